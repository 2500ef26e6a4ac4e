/** Operator session settings, persisted across reloads via localStorage. */

export type Mode = "static" | "live";

export interface UiSession {
  serviceBaseUrl: string;
  threshold: number;
  watchList: string[];
  mode: Mode;
  pollIntervalMs: number;
}

export const STORAGE_KEY = "par-monitor-session";

export const DEFAULT_SESSION: UiSession = {
  serviceBaseUrl: "http://127.0.0.1:8080",
  threshold: 0.5,
  watchList: [],
  mode: "static",
  pollIntervalMs: 500,
};

export function validateSession(session: UiSession): UiSession {
  if (!(session.threshold > 0 && session.threshold < 1)) {
    throw new RangeError(`threshold must be in (0, 1), got ${session.threshold}`);
  }
  if (!Number.isInteger(session.pollIntervalMs) || session.pollIntervalMs < 100) {
    throw new RangeError(`pollIntervalMs must be an integer >= 100, got ${session.pollIntervalMs}`);
  }
  if (session.mode !== "static" && session.mode !== "live") {
    throw new RangeError(`mode must be "static" or "live", got ${String(session.mode)}`);
  }
  return session;
}

export function saveSession(session: UiSession, storage: Storage = localStorage): void {
  storage.setItem(STORAGE_KEY, JSON.stringify(validateSession(session)));
}

/** Load the persisted session; corrupt or invalid payloads fall back to defaults. */
export function loadSession(storage: Storage = localStorage): UiSession {
  const raw = storage.getItem(STORAGE_KEY);
  if (raw === null) {
    return { ...DEFAULT_SESSION, watchList: [] };
  }
  try {
    const parsed = JSON.parse(raw) as Partial<UiSession>;
    return validateSession({
      serviceBaseUrl: parsed.serviceBaseUrl ?? DEFAULT_SESSION.serviceBaseUrl,
      threshold: parsed.threshold ?? DEFAULT_SESSION.threshold,
      watchList: Array.isArray(parsed.watchList) ? parsed.watchList.map(String) : [],
      mode: parsed.mode ?? DEFAULT_SESSION.mode,
      pollIntervalMs: parsed.pollIntervalMs ?? DEFAULT_SESSION.pollIntervalMs,
    });
  } catch {
    return { ...DEFAULT_SESSION, watchList: [] };
  }
}
