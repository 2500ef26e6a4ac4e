/** Page wiring: binds the controls in index.html to the API client,
 * the live loop, and the renderers. */

import { ApiClient, type PredictionResponse } from "./api.js";
import { buildResultView, highlight, reflag } from "./flags.js";
import { LiveLoop } from "./live.js";
import { renderAlert, renderError, renderPredictions, renderStatus } from "./render.js";
import { loadSession, saveSession, type UiSession } from "./state.js";
import { uploadAndPredict } from "./upload.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function captureFromVideo(video: HTMLVideoElement): () => Promise<Blob> {
  const canvas = document.createElement("canvas");
  return () =>
    new Promise((resolve, reject) => {
      canvas.width = video.videoWidth || 320;
      canvas.height = video.videoHeight || 240;
      const ctx = canvas.getContext("2d");
      if (ctx === null) {
        reject(new Error("canvas 2d context unavailable"));
        return;
      }
      ctx.drawImage(video, 0, 0, canvas.width, canvas.height);
      canvas.toBlob((blob) => {
        if (blob === null) reject(new Error("frame encoding failed"));
        else resolve(blob);
      }, "image/png");
    });
}

export function setup(): void {
  let session: UiSession = loadSession();
  let api = new ApiClient(session.serviceBaseUrl);
  let lastResponse: PredictionResponse | null = null;
  let loop: LiveLoop | null = null;

  const results = el<HTMLDivElement>("results");
  const banner = el<HTMLDivElement>("error-banner");
  const statusEl = el<HTMLSpanElement>("loop-status");
  const alertEl = el<HTMLDivElement>("watch-alert");
  const thresholdInput = el<HTMLInputElement>("threshold");
  const thresholdLabel = el<HTMLSpanElement>("threshold-value");
  const watchInput = el<HTMLInputElement>("watch-list");
  const baseUrlInput = el<HTMLInputElement>("base-url");
  const fileInput = el<HTMLInputElement>("file-input");
  const liveButton = el<HTMLButtonElement>("live-toggle");
  const video = el<HTMLVideoElement>("camera");

  thresholdInput.value = String(session.threshold);
  thresholdLabel.textContent = session.threshold.toFixed(2);
  watchInput.value = session.watchList.join(", ");
  baseUrlInput.value = session.serviceBaseUrl;

  const persist = () => saveSession(session);

  const rerender = () => {
    if (lastResponse === null) return;
    renderPredictions(results, lastResponse, {
      threshold: session.threshold,
      watchList: session.watchList,
    });
    const flagged = reflag(lastResponse.predictions, session.threshold);
    renderAlert(alertEl, highlight(flagged, session.watchList));
  };

  const showResponse = (response: PredictionResponse) => {
    lastResponse = response;
    renderError(banner, null);
    rerender();
  };

  thresholdInput.addEventListener("input", () => {
    const value = Number(thresholdInput.value);
    if (value > 0 && value < 1) {
      session = { ...session, threshold: value };
      thresholdLabel.textContent = value.toFixed(2);
      persist();
      rerender(); // client-side re-flag only; no request is issued
    }
  });

  watchInput.addEventListener("change", () => {
    const names = watchInput.value.split(",").map((s) => s.trim()).filter(Boolean);
    session = { ...session, watchList: names };
    persist();
    rerender();
  });

  baseUrlInput.addEventListener("change", () => {
    session = { ...session, serviceBaseUrl: baseUrlInput.value };
    api = new ApiClient(session.serviceBaseUrl);
    persist();
  });

  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (file === undefined) return;
    const outcome = await uploadAndPredict(api, file, session.threshold, session.watchList);
    if (outcome.view !== null) {
      showResponse(outcome.view.predictions);
    } else {
      renderError(banner, outcome.error); // previous results stay on screen
    }
  });

  liveButton.addEventListener("click", async () => {
    if (loop !== null) {
      loop.stop();
      loop = null;
      session = { ...session, mode: "static" };
      persist();
      liveButton.textContent = "start live";
      return;
    }
    const stream = await navigator.mediaDevices.getUserMedia({ video: true });
    video.srcObject = stream;
    await video.play();
    loop = new LiveLoop({
      api,
      captureFrame: captureFromVideo(video),
      pollIntervalMs: session.pollIntervalMs,
      threshold: session.threshold,
      onResult: (response) => showResponse(response),
      onStatus: (status) => renderStatus(statusEl, status),
    });
    loop.start();
    session = { ...session, mode: "live" };
    persist();
    liveButton.textContent = "stop live";
  });

  void api
    .schema()
    .then(() => renderError(banner, null))
    .catch((err) => renderError(banner, err instanceof Error ? err.message : String(err)));

  if (session.mode === "live") {
    // Live mode never auto-starts: camera access requires a fresh gesture.
    session = { ...session, mode: "static" };
    persist();
  }
}

if (typeof document !== "undefined" && document.getElementById("results") !== null) {
  setup();
}
