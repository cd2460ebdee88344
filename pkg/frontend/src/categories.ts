/** The five rating categories and their participant-facing guidance.
 *
 * Descriptions are shown in full the first time a participant meets a
 * category and stay available from a tooltip afterwards. They are meant
 * to ease uncertainty, not to prescribe an answer.
 */

export interface Category {
  id: number;
  key: string;
}

export const CATEGORIES: Category[] = [
  { id: 1, key: "walkability" },
  { id: 2, key: "bikeability" },
  { id: 3, key: "pleasantness" },
  { id: 4, key: "greenness" },
  { id: 5, key: "safety" },
];

export const RATINGS_PER_CATEGORY = 20;
export const IMAGES_PER_RUN = 5;
export const SURVEY_TOTAL = RATINGS_PER_CATEGORY * CATEGORIES.length;

/** Likert scale: position 0..4 maps to score 1..5. */
export const SCORE_KEYS = ["awful", "bad", "neutral", "good", "great"] as const;

export function scoreForButton(index: number): number {
  if (index < 0 || index >= SCORE_KEYS.length) {
    throw new Error(`no rating button at index ${index}`);
  }
  return index + 1;
}

export function categoryById(id: number): Category {
  const found = CATEGORIES.find((c) => c.id === id);
  if (!found) throw new Error(`unknown category ${id}`);
  return found;
}
