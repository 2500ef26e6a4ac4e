/** A stub inference service: fabricated /schema and /predict responses,
 * call counting, and a toggleable outage. */

import type { AttributePrediction, PredictionResponse, Schema } from "../src/api.js";

export function makeSchema(attributeNames: string[], groupSize = 3): Schema {
  const groups = [];
  for (let i = 0; i < attributeNames.length; i += groupSize) {
    groups.push({
      name: `group${groups.length}`,
      attributes: attributeNames.slice(i, i + groupSize),
    });
  }
  return { groups };
}

export function makeResponse(
  schema: Schema,
  probabilities: number[],
  threshold = 0.5,
): PredictionResponse {
  const predictions: AttributePrediction[] = [];
  let k = 0;
  for (const group of schema.groups) {
    for (const attribute of group.attributes) {
      const probability = probabilities[k] ?? 0;
      predictions.push({
        attribute,
        group: group.name,
        probability,
        flagged: probability >= threshold,
      });
      k += 1;
    }
  }
  return {
    model_version: "stub00000000",
    threshold_used: threshold,
    predictions,
    latency_ms: 1.5,
  };
}

export interface StubService {
  fetch: (input: string, init?: RequestInit) => Promise<Response>;
  calls: { url: string; method: string }[];
  predictCalls: () => number;
  /** While true, /predict returns 503 with a JSON error body. */
  down: boolean;
  /** Extra latency (fake-timer ms) applied to /predict. */
  latencyMs: number;
  maxConcurrent: number;
}

export function stubService(schema: Schema, probabilities: number[]): StubService {
  let active = 0;
  const service: StubService = {
    calls: [],
    down: false,
    latencyMs: 0,
    maxConcurrent: 0,
    predictCalls: () =>
      service.calls.filter((c) => c.url.includes("/predict")).length,
    fetch: async (input: string, init?: RequestInit) => {
      service.calls.push({ url: input, method: init?.method ?? "GET" });
      active += 1;
      service.maxConcurrent = Math.max(service.maxConcurrent, active);
      try {
        if (service.latencyMs > 0) {
          await new Promise((resolve) => setTimeout(resolve, service.latencyMs));
        }
        if (input.includes("/schema")) {
          return new Response(JSON.stringify(schema), { status: 200 });
        }
        if (input.includes("/healthz")) {
          return new Response(
            JSON.stringify({ status: "ok", model_version: "stub00000000" }),
            { status: 200 },
          );
        }
        if (input.includes("/predict")) {
          if (service.down) {
            return new Response(JSON.stringify({ detail: "service unavailable" }), {
              status: 503,
            });
          }
          const match = /threshold=([0-9.]+)/.exec(input);
          const threshold = match ? Number(match[1]) : 0.5;
          return new Response(JSON.stringify(makeResponse(schema, probabilities, threshold)), {
            status: 200,
          });
        }
        return new Response(JSON.stringify({ detail: "not found" }), { status: 404 });
      } finally {
        active -= 1;
      }
    },
  };
  return service;
}
