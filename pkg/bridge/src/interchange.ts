/**
 * Writers for the engine's interchange files. Byte formats:
 *   records.ndjson      one JSON object per mask, file order is canonical
 *   features.meta.json  {"n":..,"d":..}; features.f32 little-endian float32
 *   geometries.ndjson   column-major zeros-first RLE per mask
 *   map_<id>.u16        "GCDM" + u16 version=1 + u16 pad + u32 h + u32 w
 *                       header, then row-major little-endian u16 pixels
 */

import * as fs from "fs";
import * as path from "path";
import { BridgeError } from "./errors";
import { RleMask } from "./rle";

export const VOID = 65535;

export interface MaskRecord {
  mask_id: number;
  image_id: number;
  area: number;
  bbox: [number, number, number, number];
  label: number | null;
  split: "labeled" | "unlabeled";
}

export function writeRecords(records: MaskRecord[], file: string): void {
  const lines = records.map((m) =>
    JSON.stringify({
      mask_id: m.mask_id,
      image_id: m.image_id,
      area: m.area,
      bbox: m.bbox,
      label: m.label,
      split: m.split,
    }),
  );
  fs.writeFileSync(file, lines.length ? lines.join("\n") + "\n" : "");
}

export function writeFeatures(rows: Float64Array[], metaFile: string, binFile: string): void {
  const n = rows.length;
  const d = n ? rows[0].length : 0;
  const buf = Buffer.alloc(n * d * 4);
  for (let i = 0; i < n; i++) {
    if (rows[i].length !== d) {
      throw new BridgeError("FORMAT_ERROR", `feature row ${i} has length ${rows[i].length}, expected ${d}`);
    }
    for (let j = 0; j < d; j++) buf.writeFloatLE(Math.fround(rows[i][j]), (i * d + j) * 4);
  }
  fs.writeFileSync(metaFile, JSON.stringify({ n, d }) + "\n");
  fs.writeFileSync(binFile, buf);
}

export function writeGeometries(geometries: Map<number, RleMask>, file: string): void {
  const ids = Array.from(geometries.keys()).sort((a, b) => a - b);
  const lines = ids.map((id) => {
    const g = geometries.get(id)!;
    return JSON.stringify({ mask_id: id, size: g.size, counts: g.counts });
  });
  fs.writeFileSync(file, lines.length ? lines.join("\n") + "\n" : "");
}

export function writeMapU16(labels: Uint16Array, height: number, width: number, file: string): void {
  if (labels.length !== height * width) {
    throw new BridgeError("FORMAT_ERROR", `raster length ${labels.length} != ${height}x${width}`);
  }
  const buf = Buffer.alloc(16 + labels.length * 2);
  buf.write("GCDM", 0, "ascii");
  buf.writeUInt16LE(1, 4);
  buf.writeUInt16LE(0, 6);
  buf.writeUInt32LE(height, 8);
  buf.writeUInt32LE(width, 12);
  for (let i = 0; i < labels.length; i++) buf.writeUInt16LE(labels[i], 16 + i * 2);
  fs.writeFileSync(file, buf);
}

export function mapFilename(imageId: number): string {
  return `map_${imageId}.u16`;
}

export interface LabelRow {
  mask_id: number;
  label: number;
  confidence: number;
}

export function readLabels(file: string): LabelRow[] {
  const text = fs.readFileSync(file, "utf-8");
  const rows: LabelRow[] = [];
  let lineno = 0;
  for (const line of text.split("\n")) {
    lineno++;
    if (!line.trim()) continue;
    let obj: Record<string, unknown>;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new BridgeError("FORMAT_ERROR", `${file}:${lineno}: malformed JSON`);
    }
    rows.push({
      mask_id: Number(obj.mask_id),
      label: Number(obj.label),
      confidence: Number(obj.confidence),
    });
  }
  return rows;
}

export function ensureDir(dir: string): void {
  fs.mkdirSync(dir, { recursive: true });
}

export function join(...parts: string[]): string {
  return path.join(...parts);
}
