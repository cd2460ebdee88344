/** Pointer-drag classification for the swipe-to-rate interaction.
 *
 * The five rating buttons sit in a row under the image; swiping the
 * image toward one of them rates with that button. A drag counts as a
 * swipe once it travels far enough, and the target is the button whose
 * horizontal fifth the drag is heading for.
 */

export const SWIPE_MIN_DISTANCE_PX = 60;

export interface DragVector {
  dx: number;
  dy: number;
  /** Where the drag ended, relative to the viewport's left edge. */
  endX: number;
  viewportWidth: number;
}

/** Rating-button index 0..4 the drag points at, or null for a non-swipe. */
export function swipeTarget(drag: DragVector, minDistance = SWIPE_MIN_DISTANCE_PX): number | null {
  const distance = Math.hypot(drag.dx, drag.dy);
  if (distance < minDistance) return null;
  if (drag.viewportWidth <= 0) return null;
  const zone = Math.floor((drag.endX / drag.viewportWidth) * 5);
  return Math.min(4, Math.max(0, zone));
}
