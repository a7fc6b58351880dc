/**
 * Mask conditioning before feature extraction: crop to the bounding box,
 * fill non-mask pixels with the mean value of the rectangle boundary, and
 * resize to the extractor's square input.
 */

import { RgbImage } from "./images";
import { RleMask, rleBbox, rleDecode } from "./rle";
import { BridgeError } from "./errors";

export interface PaddedCrop {
  size: number;
  /** interleaved RGB float in [0, 255], size*size*3 */
  data: Float32Array;
}

export function padAndResize(image: RgbImage, mask: RleMask, target: number): PaddedCrop {
  const [x, y, w, h] = rleBbox(mask);
  if (w === 0 || h === 0) {
    throw new BridgeError("PARAM_ERROR", "cannot extract features from an empty mask");
  }
  const bitmap = rleDecode(mask);
  const crop = new Float32Array(w * h * 3);

  // mean RGB over the rectangle's boundary ring
  let br = 0, bg = 0, bb = 0, count = 0;
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      if (r !== 0 && r !== h - 1 && c !== 0 && c !== w - 1) continue;
      const src = ((y + r) * image.width + (x + c)) * 3;
      br += image.data[src];
      bg += image.data[src + 1];
      bb += image.data[src + 2];
      count++;
    }
  }
  br /= count;
  bg /= count;
  bb /= count;

  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      const dst = (r * w + c) * 3;
      if (bitmap[(y + r) * image.width + (x + c)]) {
        const src = ((y + r) * image.width + (x + c)) * 3;
        crop[dst] = image.data[src];
        crop[dst + 1] = image.data[src + 1];
        crop[dst + 2] = image.data[src + 2];
      } else {
        crop[dst] = br;
        crop[dst + 1] = bg;
        crop[dst + 2] = bb;
      }
    }
  }
  return { size: target, data: resizeBilinear(crop, h, w, target) };
}

export function resizeBilinear(data: Float32Array, h: number, w: number, target: number): Float32Array {
  const out = new Float32Array(target * target * 3);
  const scaleY = h / target;
  const scaleX = w / target;
  for (let r = 0; r < target; r++) {
    const sy = Math.min(h - 1, Math.max(0, (r + 0.5) * scaleY - 0.5));
    const y0 = Math.floor(sy);
    const y1 = Math.min(h - 1, y0 + 1);
    const fy = sy - y0;
    for (let c = 0; c < target; c++) {
      const sx = Math.min(w - 1, Math.max(0, (c + 0.5) * scaleX - 0.5));
      const x0 = Math.floor(sx);
      const x1 = Math.min(w - 1, x0 + 1);
      const fx = sx - x0;
      for (let ch = 0; ch < 3; ch++) {
        const v00 = data[(y0 * w + x0) * 3 + ch];
        const v01 = data[(y0 * w + x1) * 3 + ch];
        const v10 = data[(y1 * w + x0) * 3 + ch];
        const v11 = data[(y1 * w + x1) * 3 + ch];
        out[(r * target + c) * 3 + ch] =
          v00 * (1 - fy) * (1 - fx) + v01 * (1 - fy) * fx + v10 * fy * (1 - fx) + v11 * fy * fx;
      }
    }
  }
  return out;
}
