/** Categorical colors and continuous score gradients for point displays. */

/** Hard ceiling on categorical classes a display may color. */
export const MAX_CATEGORIES = 13;

const CATEGORICAL = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#1b9e77", "#d95f02", "#7570b3",
];

/** First n categorical colors; n beyond the ceiling is a caller bug. */
export function categoricalPalette(n: number): string[] {
  if (!Number.isInteger(n) || n < 1) {
    throw new RangeError(`palette size must be a positive integer, got ${n}`);
  }
  if (n > MAX_CATEGORIES) {
    throw new RangeError(`at most ${MAX_CATEGORIES} categorical colors supported, got ${n}`);
  }
  return CATEGORICAL.slice(0, n);
}

/**
 * Continuous gradient position in [0, 1] for a score value against the
 * observed range; constant scores map to 0.5.
 */
export function gradientPosition(value: number, min: number, max: number): number {
  if (max <= min) return 0.5;
  return Math.min(1, Math.max(0, (value - min) / (max - min)));
}
