/** Image loading: PNG (via pngjs) and binary PPM (P6, maxval 255). */

import * as fs from "fs";
import { PNG } from "pngjs";
import { BridgeError } from "./errors";

export interface RgbImage {
  width: number;
  height: number;
  /** interleaved RGB, row-major, length width*height*3 */
  data: Uint8Array;
}

export function readPng(path: string): RgbImage {
  let raw: Buffer;
  try {
    raw = fs.readFileSync(path);
  } catch (e) {
    throw new BridgeError("IO_ERROR", `cannot read ${path}: ${e}`);
  }
  const png = PNG.sync.read(raw);
  const out = new Uint8Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    out[i * 3] = png.data[i * 4];
    out[i * 3 + 1] = png.data[i * 4 + 1];
    out[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return { width: png.width, height: png.height, data: out };
}

export function writePng(image: RgbImage, path: string): void {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = image.data[i * 3];
    png.data[i * 4 + 1] = image.data[i * 3 + 1];
    png.data[i * 4 + 2] = image.data[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png));
}

/** Single-channel label raster (e.g. ground-truth ids stored in PNG). */
export function readLabelPng(path: string): { width: number; height: number; labels: Uint8Array } {
  const img = readPng(path);
  const labels = new Uint8Array(img.width * img.height);
  for (let i = 0; i < labels.length; i++) labels[i] = img.data[i * 3];
  return { width: img.width, height: img.height, labels };
}

export function readPpm(path: string): RgbImage {
  let raw: Buffer;
  try {
    raw = fs.readFileSync(path);
  } catch (e) {
    throw new BridgeError("IO_ERROR", `cannot read ${path}: ${e}`);
  }
  if (raw.length < 2 || raw.toString("ascii", 0, 2) !== "P6") {
    throw new BridgeError("FORMAT_ERROR", `${path}: not a binary PPM`);
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < raw.length && /\s/.test(String.fromCharCode(raw[pos]))) pos++;
    if (raw[pos] === 0x23) {
      while (pos < raw.length && raw[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < raw.length && !/\s/.test(String.fromCharCode(raw[pos]))) pos++;
    const token = raw.toString("ascii", start, pos);
    if (!/^\d+$/.test(token)) throw new BridgeError("FORMAT_ERROR", `${path}: bad header token ${token}`);
    fields.push(parseInt(token, 10));
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new BridgeError("FORMAT_ERROR", `${path}: maxval ${maxval} unsupported`);
  const expected = width * height * 3;
  if (raw.length - pos < expected) {
    throw new BridgeError("FORMAT_ERROR", `${path}: ${raw.length - pos} payload bytes, expected ${expected}`);
  }
  return { width, height, data: new Uint8Array(raw.subarray(pos, pos + expected)) };
}

export function readImage(path: string): RgbImage {
  if (path.toLowerCase().endsWith(".ppm")) return readPpm(path);
  return readPng(path);
}
