import { describe, expect, it } from "vitest";

import { buildResultView, highlight, reflag } from "../src/flags.js";
import { makeResponse, makeSchema } from "./helpers.js";

const schema = makeSchema(["hat", "glasses", "backpack", "boots"]);
const response = makeResponse(schema, [0.9, 0.5, 0.2, 0.7]);

describe("reflag", () => {
  it("selects attributes at or above the threshold (inclusive)", () => {
    expect(reflag(response.predictions, 0.5)).toEqual(new Set(["hat", "glasses", "boots"]));
    expect(reflag(response.predictions, 0.75)).toEqual(new Set(["hat"]));
  });

  it("treats a probability exactly at the threshold as flagged", () => {
    expect(reflag(response.predictions, 0.5).has("glasses")).toBe(true);
  });

  it("never mutates the stored probabilities", () => {
    const before = response.predictions.map((p) => p.probability);
    reflag(response.predictions, 0.3);
    reflag(response.predictions, 0.9);
    expect(response.predictions.map((p) => p.probability)).toEqual(before);
  });

  it("rejects thresholds outside (0, 1)", () => {
    expect(() => reflag(response.predictions, 0)).toThrow(RangeError);
    expect(() => reflag(response.predictions, 1)).toThrow(RangeError);
    expect(() => reflag(response.predictions, -0.1)).toThrow(RangeError);
  });
});

describe("highlight", () => {
  it("intersects flagged attributes with the watch-list", () => {
    const flagged = new Set(["hat", "boots"]);
    expect(highlight(flagged, ["boots", "glasses"])).toEqual(new Set(["boots"]));
  });

  it("is empty when the watch-list misses every flag", () => {
    expect(highlight(new Set(["hat"]), ["backpack"])).toEqual(new Set());
  });
});

describe("buildResultView", () => {
  it("assembles flags, highlights, and the untouched response", () => {
    const view = buildResultView(response, 0.6, ["boots"], 1234);
    expect(view.predictions).toBe(response);
    expect(view.flagged).toEqual(new Set(["hat", "boots"]));
    expect(view.highlighted).toEqual(new Set(["boots"]));
    expect(view.receivedAt).toBe(1234);
  });
});
