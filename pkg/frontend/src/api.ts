/** Typed client for the par inference service REST API. */

export interface AttributePrediction {
  attribute: string;
  group: string;
  probability: number;
  flagged: boolean;
}

export interface PredictionResponse {
  model_version: string;
  threshold_used: number;
  predictions: AttributePrediction[];
  latency_ms: number;
}

export interface SchemaGroup {
  name: string;
  attributes: string[];
}

export interface Schema {
  groups: SchemaGroup[];
}

export interface HealthResponse {
  status: string;
  model_version: string;
}

/** Error carrying the service's response body verbatim for display. */
export class ServiceError extends Error {
  readonly status: number;
  readonly body: string;

  constructor(status: number, body: string) {
    super(`service responded ${status}: ${body}`);
    this.name = "ServiceError";
    this.status = status;
    this.body = body;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    if (!response.ok) {
      throw new ServiceError(response.status, text);
    }
    return JSON.parse(text) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/healthz");
  }

  schema(): Promise<Schema> {
    return this.request<Schema>("/schema");
  }

  /** Flat attribute order as the service reports probabilities. */
  static attributeOrder(schema: Schema): string[] {
    return schema.groups.flatMap((g) => g.attributes);
  }

  predict(image: Blob, threshold?: number): Promise<PredictionResponse> {
    const form = new FormData();
    form.append("image", image, "frame.png");
    const query = threshold === undefined ? "" : `?threshold=${threshold}`;
    return this.request<PredictionResponse>(`/predict${query}`, {
      method: "POST",
      body: form,
    });
  }
}
