import * as fs from "fs";
import { BridgeError } from "./errors";

export interface BridgeConfig {
  /** mask proposal source; "grid" is the model-free debug path */
  proposer: "sam" | "grid";
  points_per_side: number;
  pred_iou_thresh: number;
  stability_score_thresh: number;
  grid_cells: number;
  /** feature extractor; "meanrgb" is the model-free debug path */
  extractor: "dinov2" | "dinov1" | "clip" | "meanrgb";
  /** square input size; null = the extractor's native size */
  resize_target: number | null;
  /** inference endpoints for the model-backed adapters */
  sam_endpoint: string | null;
  extractor_endpoint: string | null;
}

export const DEFAULT_CONFIG: BridgeConfig = {
  proposer: "sam",
  points_per_side: 32,
  pred_iou_thresh: 0.86,
  stability_score_thresh: 0.92,
  grid_cells: 8,
  extractor: "dinov2",
  resize_target: null,
  sam_endpoint: null,
  extractor_endpoint: null,
};

export function loadConfig(path: string | null): BridgeConfig {
  if (path === null) return { ...DEFAULT_CONFIG };
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf-8");
  } catch (e) {
    throw new BridgeError("IO_ERROR", `cannot read ${path}: ${e}`);
  }
  let parsed: Record<string, unknown>;
  try {
    parsed = JSON.parse(raw);
  } catch (e) {
    throw new BridgeError("FORMAT_ERROR", `${path}: malformed JSON`);
  }
  const known = new Set(Object.keys(DEFAULT_CONFIG));
  for (const key of Object.keys(parsed)) {
    if (!known.has(key)) throw new BridgeError("PARAM_ERROR", `${path}: unknown config key ${key}`);
  }
  return { ...DEFAULT_CONFIG, ...(parsed as Partial<BridgeConfig>) };
}
