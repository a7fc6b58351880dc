import { describe, expect, it } from "vitest";
import { RgbImage } from "../src/images";
import { padAndResize, resizeBilinear } from "../src/padding";
import { rleEncode } from "../src/rle";

function solidImage(h: number, w: number, rgb: [number, number, number]): RgbImage {
  const data = new Uint8Array(h * w * 3);
  for (let i = 0; i < h * w; i++) {
    data[i * 3] = rgb[0];
    data[i * 3 + 1] = rgb[1];
    data[i * 3 + 2] = rgb[2];
  }
  return { width: w, height: h, data };
}

describe("pad and resize", () => {
  it("pads a constant-color mask with exactly that color", () => {
    const image = solidImage(6, 6, [40, 160, 220]);
    const bitmap = new Uint8Array(36);
    for (let r = 1; r < 5; r++) for (let c = 1; c < 5; c++) if ((r + c) % 2 === 0) bitmap[r * 6 + c] = 1;
    const crop = padAndResize(image, rleEncode(bitmap, 6, 6), 8);
    for (let i = 0; i < crop.data.length; i += 3) {
      expect(crop.data[i]).toBeCloseTo(40, 4);
      expect(crop.data[i + 1]).toBeCloseTo(160, 4);
      expect(crop.data[i + 2]).toBeCloseTo(220, 4);
    }
  });

  it("is deterministic: the same mask gives identical crops", () => {
    const image = solidImage(5, 7, [10, 20, 30]);
    for (let i = 0; i < image.data.length; i++) image.data[i] = (i * 37) % 256;
    const bitmap = new Uint8Array(35);
    for (let i = 5; i < 20; i++) bitmap[i] = 1;
    const rle = rleEncode(bitmap, 5, 7);
    const a = padAndResize(image, rle, 16);
    const b = padAndResize(image, rle, 16);
    expect(Array.from(a.data)).toEqual(Array.from(b.data));
  });

  it("fills outside-mask pixels with the rectangle-boundary mean", () => {
    // 1x3 image: boundary of the full-width bbox is all three pixels
    const image: RgbImage = {
      width: 3,
      height: 1,
      data: Uint8Array.from([0, 0, 0, 90, 90, 90, 0, 0, 0]),
    };
    const bitmap = Uint8Array.from([1, 0, 1]); // middle pixel is padding
    const crop = padAndResize(image, rleEncode(bitmap, 1, 3), 3);
    // boundary mean = (0 + 90 + 0) / 3 = 30 replaces the masked-out middle
    expect(crop.data[3 * 1 + 0]).toBeCloseTo(30, 4);
  });

  it("bilinear resize preserves constant fields and interpolates midpoints", () => {
    const constant = new Float32Array(2 * 2 * 3).fill(77);
    const up = resizeBilinear(constant, 2, 2, 5);
    for (const v of up) expect(v).toBeCloseTo(77, 4);

    const ramp = new Float32Array([0, 0, 0, 100, 100, 100]); // 1x2
    const mid = resizeBilinear(ramp, 1, 2, 3);
    expect(mid[0]).toBeCloseTo(0, 4);
    expect(mid[3]).toBeCloseTo(50, 4);
    expect(mid[6]).toBeCloseTo(100, 4);
  });
});
