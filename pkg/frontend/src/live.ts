/** Live mode: capture a frame every pollIntervalMs, POST it to /predict,
 * and surface results. At most one request is in flight; on service
 * failure the loop backs off exponentially and resumes on recovery. */

import type { ApiClient, PredictionResponse } from "./api.js";

export interface LoopStatus {
  state: "running" | "reconnecting" | "stopped";
  consecutiveFailures: number;
  nextDelayMs: number;
}

export interface LiveLoopOptions {
  api: ApiClient;
  captureFrame: () => Promise<Blob>;
  pollIntervalMs: number;
  threshold?: number;
  onResult: (response: PredictionResponse, sequence: number) => void;
  onStatus?: (status: LoopStatus) => void;
  maxBackoffMs?: number;
}

export class LiveLoop {
  private readonly options: LiveLoopOptions;
  private readonly maxBackoffMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private running = false;
  private failures = 0;
  private sequence = 0;
  private lastDelivered = 0;

  constructor(options: LiveLoopOptions) {
    if (!Number.isInteger(options.pollIntervalMs) || options.pollIntervalMs < 100) {
      throw new RangeError(`pollIntervalMs must be an integer >= 100, got ${options.pollIntervalMs}`);
    }
    this.options = options;
    this.maxBackoffMs = options.maxBackoffMs ?? 30_000;
  }

  get status(): LoopStatus {
    return {
      state: this.running ? (this.failures > 0 ? "reconnecting" : "running") : "stopped",
      consecutiveFailures: this.failures,
      nextDelayMs: this.currentDelay(),
    };
  }

  /** Starts polling; the first frame is requested immediately. */
  start(): void {
    if (this.running) return;
    this.running = true;
    this.failures = 0;
    void this.tick();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.emitStatus();
  }

  private currentDelay(): number {
    if (this.failures === 0) return this.options.pollIntervalMs;
    const backoff = this.options.pollIntervalMs * 2 ** this.failures;
    return Math.min(backoff, this.maxBackoffMs);
  }

  private emitStatus(): void {
    this.options.onStatus?.(this.status);
  }

  private schedule(delayMs: number): void {
    if (!this.running) return;
    // Only one pending timer: a completion racing a skipped tick must not
    // fork parallel polling chains.
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.tick();
    }, delayMs);
  }

  private async tick(): Promise<void> {
    if (!this.running) return;
    if (this.inFlight) {
      // A slow response is still pending; keep cadence without overlapping.
      this.schedule(this.options.pollIntervalMs);
      return;
    }
    this.inFlight = true;
    const seq = ++this.sequence;
    try {
      const frame = await this.options.captureFrame();
      const response = await this.options.api.predict(frame, this.options.threshold);
      this.failures = 0;
      // Discard anything older than what has already been delivered.
      if (seq > this.lastDelivered) {
        this.lastDelivered = seq;
        this.options.onResult(response, seq);
      }
    } catch {
      this.failures += 1;
    } finally {
      this.inFlight = false;
    }
    this.emitStatus();
    this.schedule(this.currentDelay());
  }
}
