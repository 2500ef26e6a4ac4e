/** DOM rendering for prediction tables, error banners, and loop status.
 * Rendering reads stored probabilities only; a threshold change re-renders
 * from the same response without touching the network. */

import type { PredictionResponse } from "./api.js";
import { highlight, reflag } from "./flags.js";
import type { LoopStatus } from "./live.js";

export interface RenderSettings {
  threshold: number;
  watchList: Iterable<string>;
}

/** Renders one row per attribute, grouped, with probability bars. */
export function renderPredictions(
  container: HTMLElement,
  response: PredictionResponse,
  settings: RenderSettings,
): void {
  const flagged = reflag(response.predictions, settings.threshold);
  const highlighted = highlight(flagged, settings.watchList);

  const table = container.ownerDocument.createElement("table");
  table.className = "predictions";

  let currentGroup: string | null = null;
  for (const prediction of response.predictions) {
    if (prediction.group !== currentGroup) {
      currentGroup = prediction.group;
      const groupRow = table.insertRow();
      groupRow.className = "group-row";
      const cell = groupRow.insertCell();
      cell.colSpan = 3;
      cell.textContent = prediction.group;
    }

    const row = table.insertRow();
    row.className = "attribute-row";
    row.dataset.attribute = prediction.attribute;
    if (flagged.has(prediction.attribute)) row.classList.add("flagged");
    if (highlighted.has(prediction.attribute)) row.classList.add("highlighted");

    row.insertCell().textContent = prediction.attribute;

    const barCell = row.insertCell();
    const bar = container.ownerDocument.createElement("div");
    bar.className = "bar";
    bar.style.width = `${(prediction.probability * 100).toFixed(1)}%`;
    barCell.appendChild(bar);

    row.insertCell().textContent = prediction.probability.toFixed(3);
  }

  container.replaceChildren(table);
}

export function renderError(banner: HTMLElement, message: string | null): void {
  if (message === null) {
    banner.hidden = true;
    banner.textContent = "";
  } else {
    banner.hidden = false;
    banner.textContent = message;
  }
}

export function renderStatus(indicator: HTMLElement, status: LoopStatus): void {
  indicator.dataset.state = status.state;
  if (status.state === "reconnecting") {
    indicator.textContent =
      `service unreachable (${status.consecutiveFailures} failures), ` +
      `retrying in ${(status.nextDelayMs / 1000).toFixed(1)} s`;
  } else if (status.state === "running") {
    indicator.textContent = "live";
  } else {
    indicator.textContent = "stopped";
  }
}

/** True when any watch-listed attribute is flagged — drives the alert style. */
export function renderAlert(element: HTMLElement, highlighted: ReadonlySet<string>): void {
  element.classList.toggle("alert", highlighted.size > 0);
  element.textContent = highlighted.size > 0 ? `watch-list hit: ${[...highlighted].join(", ")}` : "";
}
