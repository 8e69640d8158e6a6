// HTTP client matching the service wire format: JSON bodies with
// base64-encoded PNGs (8-bit RGB images, 8-bit grayscale masks, 255 <-> 1.0).

export interface TranslateRequestBody {
  input_image: string;
  exemplar_image: string;
  input_mask_override?: string;
  exemplar_mask_override?: string;
  checkpoint_id?: string;
}

export interface TranslateResponseBody {
  output_image: string;
  input_mask: string;
  exemplar_mask: string;
  timing_ms: number;
}

export interface MasksRequestBody {
  input_image: string;
  exemplar_image: string;
  checkpoint_id?: string;
}

export interface MasksResponseBody {
  input_mask: string;
  exemplar_mask: string;
}

export interface MetaResponseBody {
  attributes: string[];
  resolution: number;
  checkpoints: string[];
  version: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

export type FetchFn = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (e) {
      throw new ApiError(0, `service unreachable: ${e}`);
    }
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(response.status, String(body.detail ?? response.statusText));
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<{ status: string; checkpoints: string[] }> {
    return this.request("/api/health");
  }

  meta(): Promise<MetaResponseBody> {
    return this.request("/api/meta");
  }

  masks(body: MasksRequestBody): Promise<MasksResponseBody> {
    return this.post("/api/masks", body);
  }

  translate(body: TranslateRequestBody): Promise<TranslateResponseBody> {
    return this.post("/api/translate", body);
  }
}
