/**
 * Turns an arbitrary set of (possibly overlapping, possibly incomplete) mask
 * proposals into a disjoint, full-coverage partition of the image.
 *
 * Overlaps resolve with smaller-wins precedence: proposals are painted in
 * decreasing area order so smaller masks overwrite larger ones and keep
 * their pixels. Pixels claimed by nothing become one mask per 4-connected
 * region.
 */

import { RleMask, rleArea, rleDecode, rleEncode } from "./rle";

export interface ResolvedMasks {
  masks: RleMask[];
  /** index into the input proposal list, or -1 for a gap-fill mask */
  sources: number[];
}

export function resolveProposals(proposals: RleMask[], height: number, width: number): ResolvedMasks {
  const owner = new Int32Array(height * width).fill(-1);
  const order = proposals
    .map((p, i) => ({ i, area: rleArea(p) }))
    .sort((a, b) => b.area - a.area || a.i - b.i); // smaller painted later, wins

  for (const { i } of order) {
    const bitmap = rleDecode(proposals[i]);
    for (let p = 0; p < bitmap.length; p++) {
      if (bitmap[p]) owner[p] = i;
    }
  }

  const masks: RleMask[] = [];
  const sources: number[] = [];
  for (let i = 0; i < proposals.length; i++) {
    const bitmap = new Uint8Array(height * width);
    let any = false;
    for (let p = 0; p < owner.length; p++) {
      if (owner[p] === i) {
        bitmap[p] = 1;
        any = true;
      }
    }
    if (any) {
      masks.push(rleEncode(bitmap, height, width));
      sources.push(i);
    }
  }

  for (const region of connectedRegions(owner, height, width)) {
    masks.push(rleEncode(region, height, width));
    sources.push(-1);
  }
  return { masks, sources };
}

/** 4-connected regions of unowned pixels, in first-pixel (row-major) order. */
function connectedRegions(owner: Int32Array, height: number, width: number): Uint8Array[] {
  const seen = new Uint8Array(height * width);
  const regions: Uint8Array[] = [];
  const stack: number[] = [];
  for (let start = 0; start < owner.length; start++) {
    if (owner[start] >= 0 || seen[start]) continue;
    const bitmap = new Uint8Array(height * width);
    stack.push(start);
    seen[start] = 1;
    while (stack.length) {
      const p = stack.pop()!;
      bitmap[p] = 1;
      const r = Math.floor(p / width);
      const c = p % width;
      for (const [nr, nc] of [[r - 1, c], [r + 1, c], [r, c - 1], [r, c + 1]]) {
        if (nr < 0 || nr >= height || nc < 0 || nc >= width) continue;
        const q = nr * width + nc;
        if (owner[q] < 0 && !seen[q]) {
          seen[q] = 1;
          stack.push(q);
        }
      }
    }
    regions.push(bitmap);
  }
  return regions;
}
