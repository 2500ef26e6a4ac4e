/** Static mode: upload an image and build a result view. Service errors
 * surface verbatim and never clear the previous result. */

import { ServiceError, type ApiClient } from "./api.js";
import { buildResultView, type ResultView } from "./flags.js";

export interface UploadOutcome {
  view: ResultView | null;
  /** Error text to banner; null on success. */
  error: string | null;
}

export async function uploadAndPredict(
  api: ApiClient,
  file: Blob,
  threshold: number,
  watchList: Iterable<string>,
): Promise<UploadOutcome> {
  try {
    const response = await api.predict(file, threshold);
    return { view: buildResultView(response, threshold, watchList), error: null };
  } catch (err) {
    if (err instanceof ServiceError) {
      return { view: null, error: err.body };
    }
    return { view: null, error: err instanceof Error ? err.message : String(err) };
  }
}
