/**
 * Mask proposal sources. The SAM adapter talks to an automatic-mask-generator
 * endpoint and filters proposals by predicted IoU and stability score;
 * without an endpoint it raises MODEL_UNAVAILABLE. The grid proposer is the
 * model-free debug path.
 */

import { BridgeConfig } from "./config";
import { BridgeError } from "./errors";
import { RgbImage } from "./images";
import { RleMask, rleEncode } from "./rle";

export interface MaskProposer {
  name: string;
  propose(image: RgbImage): Promise<RleMask[]>;
}

/** Regular cells x cells tiling (last row/column absorb the remainder). */
export class GridProposer implements MaskProposer {
  name = "grid";

  constructor(private cells: number) {
    if (cells < 1) throw new BridgeError("PARAM_ERROR", `grid cells must be >= 1, got ${cells}`);
  }

  async propose(image: RgbImage): Promise<RleMask[]> {
    const { width, height } = image;
    const ny = Math.min(this.cells, height);
    const nx = Math.min(this.cells, width);
    const proposals: RleMask[] = [];
    for (let j = 0; j < ny; j++) {
      const r0 = Math.floor((j * height) / ny);
      const r1 = Math.floor(((j + 1) * height) / ny);
      for (let i = 0; i < nx; i++) {
        const c0 = Math.floor((i * width) / nx);
        const c1 = Math.floor(((i + 1) * width) / nx);
        const bitmap = new Uint8Array(width * height);
        for (let r = r0; r < r1; r++) {
          for (let c = c0; c < c1; c++) bitmap[r * width + c] = 1;
        }
        proposals.push(rleEncode(bitmap, height, width));
      }
    }
    return proposals;
  }
}

interface SamProposalPayload {
  size: [number, number];
  counts: number[];
  predicted_iou: number;
  stability_score: number;
}

/**
 * POST {width, height, data (base64 RGB), points_per_side} to the endpoint;
 * expects {proposals: [{size, counts, predicted_iou, stability_score}]}.
 * Threshold filtering happens client-side with the configured values.
 */
export class SamHttpProposer implements MaskProposer {
  name = "sam";

  constructor(
    private endpoint: string,
    private pointsPerSide: number,
    private predIouThresh: number,
    private stabilityScoreThresh: number,
  ) {}

  async propose(image: RgbImage): Promise<RleMask[]> {
    const response = await fetch(this.endpoint, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        width: image.width,
        height: image.height,
        data: Buffer.from(image.data).toString("base64"),
        points_per_side: this.pointsPerSide,
      }),
    });
    if (!response.ok) {
      throw new BridgeError("MODEL_UNAVAILABLE", `sam endpoint returned ${response.status}`);
    }
    const payload = (await response.json()) as { proposals?: SamProposalPayload[] };
    if (!Array.isArray(payload.proposals)) {
      throw new BridgeError("FORMAT_ERROR", "sam endpoint returned no proposals array");
    }
    return payload.proposals
      .filter((p) => p.predicted_iou >= this.predIouThresh && p.stability_score >= this.stabilityScoreThresh)
      .map((p) => ({ size: p.size, counts: p.counts }));
  }
}

export function makeProposer(config: BridgeConfig): MaskProposer {
  if (config.proposer === "grid") return new GridProposer(config.grid_cells);
  if (!config.sam_endpoint) {
    throw new BridgeError(
      "MODEL_UNAVAILABLE",
      "proposer sam needs sam_endpoint (model weights are not bundled)",
    );
  }
  return new SamHttpProposer(
    config.sam_endpoint,
    config.points_per_side,
    config.pred_iou_thresh,
    config.stability_score_thresh,
  );
}
