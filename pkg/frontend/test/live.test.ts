import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, type PredictionResponse } from "../src/api.js";
import { LiveLoop, type LoopStatus } from "../src/live.js";
import { makeSchema, stubService, type StubService } from "./helpers.js";

const schema = makeSchema(["hat", "glasses", "backpack"]);

function makeLoop(
  stub: StubService,
  overrides: Partial<ConstructorParameters<typeof LiveLoop>[0]> = {},
) {
  const results: { response: PredictionResponse; sequence: number }[] = [];
  const statuses: LoopStatus[] = [];
  const loop = new LiveLoop({
    api: new ApiClient("http://svc.test", stub.fetch),
    captureFrame: () => Promise.resolve(new Blob(["frame"])),
    pollIntervalMs: 500,
    onResult: (response, sequence) => results.push({ response, sequence }),
    onStatus: (status) => statuses.push(status),
    ...overrides,
  });
  return { loop, results, statuses };
}

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("LiveLoop", () => {
  it("rejects poll intervals under 100 ms", () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    expect(() => makeLoop(stub, { pollIntervalMs: 50 })).toThrow(RangeError);
  });

  it("polls at the configured cadence", async () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    const { loop, results } = makeLoop(stub);
    loop.start();
    await vi.advanceTimersByTimeAsync(2_000);
    loop.stop();
    // Immediate first request plus one per 500 ms.
    expect(stub.predictCalls()).toBe(5);
    expect(results).toHaveLength(5);
  });

  it("delivers results in strictly increasing sequence order", async () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    const { loop, results } = makeLoop(stub);
    loop.start();
    await vi.advanceTimersByTimeAsync(3_000);
    loop.stop();
    const sequences = results.map((r) => r.sequence);
    expect(sequences).toEqual([...sequences].sort((a, b) => a - b));
    expect(new Set(sequences).size).toBe(sequences.length);
  });

  it("never overlaps requests when responses are slower than the cadence", async () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    stub.latencyMs = 1_200;
    const { loop } = makeLoop(stub);
    loop.start();
    await vi.advanceTimersByTimeAsync(6_000);
    loop.stop();
    expect(stub.maxConcurrent).toBe(1);
    // ~1700 ms per round trip (1200 response + 500 pause), far fewer than 13.
    expect(stub.predictCalls()).toBeLessThan(6);
    expect(stub.predictCalls()).toBeGreaterThanOrEqual(3);
  });

  it("backs off exponentially during an outage and reports reconnecting", async () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    const { loop, statuses } = makeLoop(stub, { maxBackoffMs: 4_000 });
    loop.start();
    await vi.advanceTimersByTimeAsync(1_000);
    stub.down = true;
    await vi.advanceTimersByTimeAsync(10_000);
    loop.stop();

    const reconnecting = statuses.filter((s) => s.state === "reconnecting");
    expect(reconnecting.length).toBeGreaterThan(0);
    const delays = reconnecting.map((s) => s.nextDelayMs);
    // 500 * 2^k capped at 4000.
    expect(delays.slice(0, 4)).toEqual([1_000, 2_000, 4_000, 4_000]);
  });

  it("resumes normal polling after the service recovers", async () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    const { loop, results, statuses } = makeLoop(stub, { maxBackoffMs: 2_000 });
    loop.start();
    await vi.advanceTimersByTimeAsync(1_000);
    const healthyResults = results.length;
    expect(healthyResults).toBeGreaterThan(0);

    stub.down = true;
    await vi.advanceTimersByTimeAsync(5_000);
    expect(results.length).toBe(healthyResults);
    expect(loop.status.state).toBe("reconnecting");

    stub.down = false;
    await vi.advanceTimersByTimeAsync(5_000);
    loop.stop();
    expect(results.length).toBeGreaterThan(healthyResults);
    const lastRunning = statuses.at(-2);
    expect(loop.status.consecutiveFailures).toBe(0);
    expect(lastRunning?.state).toBe("running");
  });

  it("stop() cancels the pending tick", async () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    const { loop } = makeLoop(stub);
    loop.start();
    await vi.advanceTimersByTimeAsync(600);
    const count = stub.predictCalls();
    loop.stop();
    await vi.advanceTimersByTimeAsync(5_000);
    expect(stub.predictCalls()).toBe(count);
    expect(loop.status.state).toBe("stopped");
  });

  it("start() is idempotent while running", async () => {
    const stub = stubService(schema, [0.9, 0.1, 0.1]);
    const { loop } = makeLoop(stub);
    loop.start();
    loop.start();
    await vi.advanceTimersByTimeAsync(1_000);
    loop.stop();
    expect(stub.predictCalls()).toBe(3);
  });
});
