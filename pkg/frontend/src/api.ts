/** Typed client for the studio inference service. The UI never computes
 * model math: every displayed cloud comes verbatim from these endpoints. */

export interface ModelInfo {
  roots: number;
  points_per_root: number;
  z_dim: number;
}

export interface Interpolation {
  root: number;
  t: number;
  target: string;
}

export interface GenerateRequest {
  bundle?: string;
  latents?: number[];
  root_sources?: Record<number, string>;
  interpolation?: Interpolation;
  dropped_root?: number;
}

export interface GenerateResponse {
  points: number[];
  points_per_root: number;
  roots: number;
  sources: string[];
}

export interface SampleResponse {
  id: string;
  z: number[];
  seed: number;
}

export interface HeatmapResponse {
  distances: number[];
  min: number;
  max: number;
  points: number[];
  points_per_root: number;
}

export type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class StudioApi {
  constructor(
    private base: string = "",
    private fetchFn: FetchFn = (u, i) => fetch(u, i),
  ) {}

  private async call<T>(path: string, body?: unknown): Promise<T> {
    const init: RequestInit =
      body === undefined
        ? {}
        : {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(body),
          };
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, `${path} failed: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  info(): Promise<ModelInfo> {
    return this.call<ModelInfo>("/model/info");
  }

  sample(seed?: number): Promise<SampleResponse> {
    return this.call<SampleResponse>(
      "/latents/sample",
      seed === undefined ? {} : { seed },
    );
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.call<GenerateResponse>("/generate", req);
  }

  heatmap(a: GenerateRequest, b: GenerateRequest): Promise<HeatmapResponse> {
    return this.call<HeatmapResponse>("/heatmap", { a, b });
  }
}
