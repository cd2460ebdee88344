/** Typed client for the survey backend's /api/v1 endpoints. */

export interface SessionCredentials {
  session_id: number;
  cookie_hash: string;
}

export interface SurveyImage {
  cityname: string;
  url: string;
  image_id: number;
}

export type CategoryCounts = Record<string, number>;

export interface CountsPayload {
  category_counts: CategoryCounts;
}

export interface Demographics {
  age: number | string;
  consent: boolean;
  monthly_gross_income?: string;
  education?: string;
  gender?: string;
  country?: string;
  postcode?: string;
}

/** Error carrying the backend's JSON error code (e.g. "UndoUnavailable"). */
export class ApiError extends Error {
  constructor(
    public readonly code: string,
    public readonly status: number,
  ) {
    super(`${code} (HTTP ${status})`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface SurveyBackend {
  newperson(form: Demographics): Promise<SessionCredentials>;
  getsession(partial: Partial<SessionCredentials>): Promise<SessionCredentials>;
  fetchImage(sessionId: number): Promise<SurveyImage>;
  newRating(
    creds: SessionCredentials,
    imageId: number,
    categoryId: number,
    rating: number,
  ): Promise<CountsPayload>;
  undo(creds: SessionCredentials): Promise<CountsPayload>;
  countRatingsByCategory(sessionId: number): Promise<CountsPayload>;
  reportIssue(message: string, context?: Record<string, unknown>): Promise<void>;
}

export class SurveyApi implements SurveyBackend {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(fn: string, body: Record<string, unknown>): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/${fn}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(String(payload.error ?? "UnknownError"), response.status);
    }
    return payload as T;
  }

  newperson(form: Demographics): Promise<SessionCredentials> {
    return this.post<SessionCredentials>("newperson", { ...form });
  }

  getsession(partial: Partial<SessionCredentials>): Promise<SessionCredentials> {
    return this.post<SessionCredentials>("getsession", { ...partial });
  }

  fetchImage(sessionId: number): Promise<SurveyImage> {
    return this.post<SurveyImage>("fetch", { session_id: sessionId });
  }

  newRating(
    creds: SessionCredentials,
    imageId: number,
    categoryId: number,
    rating: number,
  ): Promise<CountsPayload> {
    return this.post<CountsPayload>("new", {
      session_id: creds.session_id,
      cookie_hash: creds.cookie_hash,
      image_id: imageId,
      category_id: categoryId,
      rating,
    });
  }

  undo(creds: SessionCredentials): Promise<CountsPayload> {
    return this.post<CountsPayload>("undo", {
      session_id: creds.session_id,
      cookie_hash: creds.cookie_hash,
    });
  }

  countRatingsByCategory(sessionId: number): Promise<CountsPayload> {
    return this.post<CountsPayload>("countratingsbycategory", { session_id: sessionId });
  }

  async reportIssue(message: string, context: Record<string, unknown> = {}): Promise<void> {
    await this.post<{ ok: boolean }>("report", { message, ...context });
  }
}
