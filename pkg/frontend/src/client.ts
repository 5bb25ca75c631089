/** HTTP client for the inpainting service (JSON envelope, base64 PNG payloads). */

import { fromBase64, toBase64 } from "./png.js";

export interface ModelInfo {
  fingerprint: string;
  blocks: number;
  rates: number[];
  width: number;
  max_side: number;
}

export interface InpaintResult {
  resultPng: Uint8Array;
  timingMs: number;
  modelFingerprint: string;
  holeRatio: number;
  scaledForInference: boolean;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly reason: string,
  ) {
    super(`service error ${status}: ${reason}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class InpaintClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  setBaseUrl(url: string): void {
    this.baseUrl = url.replace(/\/$/, "");
  }

  async model(): Promise<ModelInfo> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/v1/model`);
    if (!resp.ok) {
      throw new ServiceError(resp.status, await reasonOf(resp));
    }
    return (await resp.json()) as ModelInfo;
  }

  async inpaint(
    imagePng: Uint8Array,
    maskPng: Uint8Array,
    options: { maxSide?: number } = {},
    signal?: AbortSignal,
  ): Promise<InpaintResult> {
    const body: Record<string, unknown> = {
      image: toBase64(imagePng),
      mask: toBase64(maskPng),
    };
    if (options.maxSide) {
      body.options = { max_side: options.maxSide };
    }
    const resp = await this.fetchImpl(`${this.baseUrl}/api/v1/inpaint`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) {
      throw new ServiceError(resp.status, await reasonOf(resp));
    }
    const payload = await resp.json();
    return {
      resultPng: fromBase64(payload.result),
      timingMs: payload.timing_ms,
      modelFingerprint: payload.model_fingerprint,
      holeRatio: payload.hole_ratio,
      scaledForInference: payload.scaled_for_inference ?? false,
    };
  }
}

async function reasonOf(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (body && typeof body === "object" && "detail" in body) {
      const detail = (body as { detail: unknown }).detail;
      if (detail && typeof detail === "object" && "reason" in detail) {
        return String((detail as { reason: unknown }).reason);
      }
      return String(detail);
    }
    return JSON.stringify(body);
  } catch {
    return resp.statusText || "unknown";
  }
}
