/**
 * Run-length codec matching the engine's geometry format: column-major
 * (Fortran order), first run counts zeros, counts sum to height * width.
 */

import { BridgeError } from "./errors";

export interface RleMask {
  size: [number, number]; // [height, width]
  counts: number[];
}

/** bitmap is row-major, length height*width, nonzero = foreground. */
export function rleEncode(bitmap: Uint8Array, height: number, width: number): RleMask {
  if (bitmap.length !== height * width) {
    throw new BridgeError("PARAM_ERROR", `bitmap length ${bitmap.length} != ${height}x${width}`);
  }
  const counts: number[] = [];
  let current = 0; // runs always start with zeros, so a leading foreground
  let run = 0; // pixel pushes an explicit zero-length first run
  for (let c = 0; c < width; c++) {
    for (let r = 0; r < height; r++) {
      const v = bitmap[r * width + c] ? 1 : 0;
      if (v === current) {
        run++;
      } else {
        counts.push(run);
        current = v;
        run = 1;
      }
    }
  }
  counts.push(run);
  return { size: [height, width], counts };
}

/** Returns a row-major bitmap of length height*width with values 0/1. */
export function rleDecode(rle: RleMask): Uint8Array {
  const [height, width] = rle.size;
  let total = 0;
  for (const c of rle.counts) {
    if (c < 0) throw new BridgeError("FORMAT_ERROR", "negative run length");
    total += c;
  }
  if (total !== height * width) {
    throw new BridgeError("FORMAT_ERROR", `counts sum ${total} != ${height}x${width}`);
  }
  const out = new Uint8Array(height * width);
  let pos = 0;
  for (let i = 0; i < rle.counts.length; i++) {
    const value = i % 2;
    for (let j = 0; j < rle.counts[i]; j++) {
      const r = pos % height;
      const c = Math.floor(pos / height);
      out[r * width + c] = value;
      pos++;
    }
  }
  return out;
}

export function rleArea(rle: RleMask): number {
  let area = 0;
  for (let i = 1; i < rle.counts.length; i += 2) area += rle.counts[i];
  return area;
}

/** Tight [x, y, w, h] bounds of the foreground; [0,0,0,0] when empty. */
export function rleBbox(rle: RleMask): [number, number, number, number] {
  const [height, width] = rle.size;
  const bitmap = rleDecode(rle);
  let minR = height, maxR = -1, minC = width, maxC = -1;
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      if (bitmap[r * width + c]) {
        if (r < minR) minR = r;
        if (r > maxR) maxR = r;
        if (c < minC) minC = c;
        if (c > maxC) maxC = c;
      }
    }
  }
  if (maxR < 0) return [0, 0, 0, 0];
  return [minC, minR, maxC - minC + 1, maxR - minR + 1];
}
