/** Survey state machine: category scheduling, gestures, local skip/undo.
 *
 * Scheduling follows the five-in-a-row rule: a participant rates up to
 * five consecutive images under one category, then the app hops to a
 * random category that still has room, until every category holds 20
 * ratings (100 total). Skips never reach the backend; undoing a skip is
 * purely local, undoing a rating calls the backend's undo, and the two
 * look identical to the participant.
 */

import {
  ApiError,
  CategoryCounts,
  CountsPayload,
  Demographics,
  SessionCredentials,
  SurveyBackend,
  SurveyImage,
} from "./api.js";
import { CATEGORIES, IMAGES_PER_RUN, RATINGS_PER_CATEGORY, scoreForButton } from "./categories.js";
import { Locale } from "./i18n.js";

export type Gesture =
  | { kind: "button"; index: number }
  | { kind: "swipe"; index: number };

type LastAction =
  | { kind: "none" }
  | { kind: "skip"; image: SurveyImage; category: number; runRated: number }
  | { kind: "rating"; image: SurveyImage; category: number; runRated: number };

export interface CategorySwitch {
  from: number | null;
  to: number;
  atTotal: number;
}

export interface ProgressBarState {
  categoryId: number;
  count: number;
  cap: number;
  fraction: number;
  done: boolean;
}

export interface ProgressState {
  bars: ProgressBarState[];
  total: number;
  totalCap: number;
  complete: boolean;
}

export interface GestureLogEntry {
  imageId: number;
  gesture: Gesture | null; // null for skips, which are not rating gestures
  action: "rating" | "skip";
}

export function progressState(counts: Record<number, number>): ProgressState {
  const bars = CATEGORIES.map((c) => {
    const count = counts[c.id] ?? 0;
    return {
      categoryId: c.id,
      count,
      cap: RATINGS_PER_CATEGORY,
      fraction: count / RATINGS_PER_CATEGORY,
      done: count >= RATINGS_PER_CATEGORY,
    };
  });
  const total = bars.reduce((acc, b) => acc + b.count, 0);
  const totalCap = RATINGS_PER_CATEGORY * CATEGORIES.length;
  return { bars, total, totalCap, complete: total >= totalCap };
}

export interface SurveyOptions {
  rng?: () => number;
  onToast?: (messageKey: string) => void;
  onCategoryComplete?: (categoryId: number) => void;
}

export class SurveyController {
  counts: Record<number, number> = Object.fromEntries(CATEGORIES.map((c) => [c.id, 0]));
  currentCategory: number | null = null;
  runRated = 0;
  pending: SurveyImage | null = null;
  lastAction: LastAction = { kind: "none" };
  locale: Locale = "en";
  exhausted = false;

  /** Transition history for tests and debugging. */
  readonly switches: CategorySwitch[] = [];
  readonly gestureLog: GestureLogEntry[] = [];

  private creds: SessionCredentials | null = null;
  private seenCategories = new Set<number>();
  private ratedImages = new Set<number>();
  private buffer: SurveyImage[] = []; // prefetched so a skip needs no network
  private inflight: Promise<void> = Promise.resolve();
  private readonly rng: () => number;
  private readonly onToast: (key: string) => void;
  private readonly onCategoryComplete: (categoryId: number) => void;

  constructor(
    private readonly backend: SurveyBackend,
    options: SurveyOptions = {},
  ) {
    this.rng = options.rng ?? Math.random;
    this.onToast = options.onToast ?? (() => undefined);
    this.onCategoryComplete = options.onCategoryComplete ?? (() => undefined);
  }

  get credentials(): SessionCredentials | null {
    return this.creds;
  }

  get complete(): boolean {
    return CATEGORIES.every((c) => this.counts[c.id] >= RATINGS_PER_CATEGORY);
  }

  get totalRated(): number {
    return CATEGORIES.reduce((acc, c) => acc + this.counts[c.id], 0);
  }

  progress(): ProgressState {
    return progressState(this.counts);
  }

  /** True exactly once per category; later calls say the tooltip suffices. */
  isFirstEncounter(categoryId: number): boolean {
    if (this.seenCategories.has(categoryId)) return false;
    this.seenCategories.add(categoryId);
    return true;
  }

  setLocale(locale: Locale): void {
    this.locale = locale; // text only; survey state untouched
  }

  async begin(form: Demographics): Promise<SessionCredentials> {
    this.creds = await this.backend.newperson(form);
    await this.bootstrap();
    return this.creds;
  }

  async resume(partial: Partial<SessionCredentials>): Promise<SessionCredentials> {
    this.creds = await this.backend.getsession(partial);
    await this.bootstrap();
    return this.creds;
  }

  private async bootstrap(): Promise<void> {
    const payload = await this.backend.countRatingsByCategory(this.creds!.session_id);
    this.syncCounts(payload.category_counts);
    this.scheduleNextCategory(true);
    if (this.currentCategory !== null) {
      await this.advance();
      await this.topUp();
    }
  }

  private syncCounts(counts: CategoryCounts): void {
    for (const c of CATEGORIES) {
      this.counts[c.id] = counts[String(c.id)] ?? 0;
    }
  }

  /** Keep the current category until five rated in this run or its cap;
   * otherwise hop to a uniformly random category with room left. */
  scheduleNextCategory(forceSwitch = false): number | null {
    const open = CATEGORIES.filter((c) => this.counts[c.id] < RATINGS_PER_CATEGORY).map((c) => c.id);
    if (open.length === 0) {
      this.currentCategory = null;
      return null;
    }
    const current = this.currentCategory;
    const keepCurrent =
      !forceSwitch &&
      current !== null &&
      open.includes(current) &&
      this.runRated < IMAGES_PER_RUN;
    if (keepCurrent) {
      return current;
    }
    const candidates = open;
    const next = candidates[Math.floor(this.rng() * candidates.length) % candidates.length];
    this.switches.push({ from: current, to: next, atTotal: this.totalRated });
    this.currentCategory = next;
    this.runRated = 0;
    return next;
  }

  private async fetchFresh(): Promise<SurveyImage> {
    let image = await this.backend.fetchImage(this.creds!.session_id);
    // an in-flight rating may not be stored yet; never re-show it
    while (this.ratedImages.has(image.image_id)) {
      await this.inflight;
      image = await this.backend.fetchImage(this.creds!.session_id);
    }
    return image;
  }

  private takeBuffered(): SurveyImage | null {
    while (this.buffer.length > 0) {
      const candidate = this.buffer.shift()!;
      if (!this.ratedImages.has(candidate.image_id)) {
        return candidate;
      }
    }
    return null;
  }

  private async advance(): Promise<void> {
    if (this.currentCategory === null) {
      this.pending = null;
      return;
    }
    if (this.counts[this.currentCategory] >= RATINGS_PER_CATEGORY) {
      throw new Error("scheduler presented a full category");
    }
    try {
      this.pending = this.takeBuffered() ?? (await this.fetchFresh());
    } catch (error) {
      if (error instanceof ApiError && error.code === "Exhausted") {
        this.exhausted = true;
        this.pending = null;
        this.onToast("toast.exhausted");
        return;
      }
      throw error;
    }
  }

  /** Refill the one-slot prefetch buffer so skips stay network-free. */
  private async topUp(): Promise<void> {
    if (this.buffer.length >= 1 || this.pending === null || this.currentCategory === null) {
      return;
    }
    try {
      let image = await this.fetchFresh();
      for (let retry = 0; retry < 3; retry += 1) {
        const shown = image.image_id === this.pending?.image_id ||
          this.buffer.some((b) => b.image_id === image.image_id);
        if (!shown) break;
        image = await this.fetchFresh();
      }
      this.buffer.push(image);
    } catch (error) {
      if (!(error instanceof ApiError && error.code === "Exhausted")) {
        throw error;
      }
      // nothing left to prefetch; skips will fetch on demand
    }
  }

  /** Wait for queued rating submissions to settle (used before unload). */
  async settle(): Promise<void> {
    await this.inflight;
  }

  /** One rating gesture: swipe toward a button or press it. Exactly one
   * gesture consumes each displayed image. */
  async submitInteraction(gesture: Gesture): Promise<void> {
    if (!this.pending || this.currentCategory === null) {
      throw new Error("no image is displayed");
    }
    const image = this.pending;
    const category = this.currentCategory;
    const score = scoreForButton(gesture.index);
    this.gestureLog.push({ imageId: image.image_id, gesture, action: "rating" });

    // optimistic local update; the POST runs while the interface moves on
    this.pending = null;
    this.counts[category] += 1;
    this.runRated += 1;
    this.ratedImages.add(image.image_id);
    this.lastAction = { kind: "rating", image, category, runRated: this.runRated };
    this.inflight = this.inflight.then(() => this.dispatchRating(image, category, score));

    if (this.counts[category] >= RATINGS_PER_CATEGORY) {
      this.onCategoryComplete(category);
    }
    this.scheduleNextCategory();
    await this.advance();
    await this.topUp();
  }

  private async dispatchRating(image: SurveyImage, category: number, score: number): Promise<void> {
    try {
      await this.backend.newRating(this.creds!, image.image_id, category, score);
    } catch (error) {
      if (error instanceof ApiError && error.code === "Duplicate") {
        this.rollback(image, category);
      } else if (error instanceof ApiError && error.code === "CategoryFull") {
        this.rollback(image, category);
        this.counts[category] = RATINGS_PER_CATEGORY;
        if (this.currentCategory === category) {
          this.scheduleNextCategory(true);
        }
      } else {
        this.rollback(image, category);
        this.onToast("toast.retry");
      }
    }
  }

  private rollback(image: SurveyImage, category: number): void {
    this.counts[category] = Math.max(0, this.counts[category] - 1);
    this.runRated = Math.max(0, this.runRated - 1);
    this.ratedImages.delete(image.image_id);
    if (this.lastAction.kind === "rating" && this.lastAction.image.image_id === image.image_id) {
      this.lastAction = { kind: "none" };
    }
  }

  /** Skip: purely local, the backend never hears about it. */
  async skip(): Promise<void> {
    if (!this.pending || this.currentCategory === null) {
      throw new Error("no image is displayed");
    }
    const image = this.pending;
    this.gestureLog.push({ imageId: image.image_id, gesture: null, action: "skip" });
    this.lastAction = { kind: "skip", image, category: this.currentCategory, runRated: this.runRated };
    this.pending = null;
    await this.advance();
  }

  get undoAvailable(): boolean {
    return this.lastAction.kind !== "none";
  }

  /** Undo the last action. A skip is restored locally with zero backend
   * calls; a rating is removed server-side first. Either way the same
   * image returns to the screen. Returns false when the control is inert. */
  async undo(): Promise<boolean> {
    const action = this.lastAction;
    if (action.kind === "none") {
      return false;
    }
    if (action.kind === "skip") {
      this.restoreDisplay(action.image, action.category, action.runRated);
      return true;
    }
    await this.inflight; // the rating must be settled server-side
    try {
      const payload: CountsPayload = await this.backend.undo(this.creds!);
      this.syncCounts(payload.category_counts);
    } catch (error) {
      if (error instanceof ApiError && error.code === "UndoUnavailable") {
        this.lastAction = { kind: "none" }; // control disabled until the next rating
        return false;
      }
      throw error;
    }
    this.ratedImages.delete(action.image.image_id);
    this.restoreDisplay(action.image, action.category, Math.max(0, action.runRated - 1));
    return true;
  }

  private restoreDisplay(image: SurveyImage, category: number, runRated: number): void {
    if (this.pending !== null && this.pending.image_id !== image.image_id) {
      this.buffer.unshift(this.pending); // keep the displaced image for later
    }
    this.pending = image;
    this.currentCategory = category;
    this.runRated = runRated;
    this.lastAction = { kind: "none" };
  }
}
