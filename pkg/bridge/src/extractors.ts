/**
 * Feature extractors. The model-backed adapters (DINO v2 / v1, CLIP) call an
 * inference endpoint over HTTP; without a configured endpoint they raise
 * MODEL_UNAVAILABLE. The meanrgb extractor needs no model and exists so the
 * whole export path can run and be tested end to end.
 */

import { BridgeConfig } from "./config";
import { BridgeError } from "./errors";
import { PaddedCrop } from "./padding";

export interface FeatureExtractor {
  name: string;
  inputSize: number;
  dim: number | null; // null until the first embedding fixes it
  embed(crop: PaddedCrop): Promise<Float64Array>;
}

/** 6-D descriptor: per-channel mean and standard deviation in [0, 1]. */
export class MeanRgbExtractor implements FeatureExtractor {
  name = "meanrgb";
  inputSize = 32;
  dim: number | null = 6;

  constructor(inputSize?: number) {
    if (inputSize) this.inputSize = inputSize;
  }

  async embed(crop: PaddedCrop): Promise<Float64Array> {
    const n = crop.size * crop.size;
    const mean = [0, 0, 0];
    for (let i = 0; i < n; i++) {
      for (let ch = 0; ch < 3; ch++) mean[ch] += crop.data[i * 3 + ch];
    }
    for (let ch = 0; ch < 3; ch++) mean[ch] /= n;
    const varSum = [0, 0, 0];
    for (let i = 0; i < n; i++) {
      for (let ch = 0; ch < 3; ch++) {
        const d = crop.data[i * 3 + ch] - mean[ch];
        varSum[ch] += d * d;
      }
    }
    return new Float64Array([
      mean[0] / 255, mean[1] / 255, mean[2] / 255,
      Math.sqrt(varSum[0] / n) / 255, Math.sqrt(varSum[1] / n) / 255, Math.sqrt(varSum[2] / n) / 255,
    ]);
  }
}

/**
 * POST {size, data: number[]} to the endpoint; expects {embedding: number[]}.
 */
export class HttpExtractor implements FeatureExtractor {
  dim: number | null = null;

  constructor(public name: string, public inputSize: number, private endpoint: string) {}

  async embed(crop: PaddedCrop): Promise<Float64Array> {
    const response = await fetch(this.endpoint, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ model: this.name, size: crop.size, data: Array.from(crop.data) }),
    });
    if (!response.ok) {
      throw new BridgeError("MODEL_UNAVAILABLE", `${this.name} endpoint returned ${response.status}`);
    }
    const payload = (await response.json()) as { embedding?: number[] };
    if (!Array.isArray(payload.embedding)) {
      throw new BridgeError("FORMAT_ERROR", `${this.name} endpoint returned no embedding array`);
    }
    if (this.dim === null) this.dim = payload.embedding.length;
    if (payload.embedding.length !== this.dim) {
      throw new BridgeError("FORMAT_ERROR", `${this.name} embedding dim changed ${this.dim} -> ${payload.embedding.length}`);
    }
    return Float64Array.from(payload.embedding);
  }
}

const NATIVE_SIZE: Record<string, number> = { dinov2: 224, dinov1: 224, clip: 224 };

export function makeExtractor(config: BridgeConfig): FeatureExtractor {
  if (config.extractor === "meanrgb") {
    return new MeanRgbExtractor(config.resize_target ?? undefined);
  }
  if (!config.extractor_endpoint) {
    throw new BridgeError(
      "MODEL_UNAVAILABLE",
      `extractor ${config.extractor} needs extractor_endpoint (model weights are not bundled)`,
    );
  }
  const size = config.resize_target ?? NATIVE_SIZE[config.extractor];
  return new HttpExtractor(config.extractor, size, config.extractor_endpoint);
}
