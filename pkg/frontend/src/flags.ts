/** Pure client-side thresholding: probabilities are never mutated, only
 * the flagged/highlighted views are recomputed. */

import type { AttributePrediction, PredictionResponse } from "./api.js";

export interface ResultView {
  predictions: PredictionResponse;
  /** Flags recomputed for the operator's current threshold. */
  flagged: Set<string>;
  /** flagged AND on the watch-list. */
  highlighted: Set<string>;
  receivedAt: number;
}

/** Attributes whose stored probability clears the threshold (inclusive). */
export function reflag(predictions: AttributePrediction[], threshold: number): Set<string> {
  if (!(threshold > 0 && threshold < 1)) {
    throw new RangeError(`threshold must be in (0, 1), got ${threshold}`);
  }
  return new Set(predictions.filter((p) => p.probability >= threshold).map((p) => p.attribute));
}

export function highlight(flagged: Set<string>, watchList: Iterable<string>): Set<string> {
  const watched = new Set(watchList);
  return new Set([...flagged].filter((name) => watched.has(name)));
}

export function buildResultView(
  response: PredictionResponse,
  threshold: number,
  watchList: Iterable<string>,
  receivedAt: number = Date.now(),
): ResultView {
  const flagged = reflag(response.predictions, threshold);
  return {
    predictions: response,
    flagged,
    highlighted: highlight(flagged, watchList),
    receivedAt,
  };
}
