import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { readLabels, writeFeatures, writeGeometries, writeMapU16, writeRecords } from "../src/interchange";

let dir: string;
beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-"));
});
afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

describe("interchange writers", () => {
  it("writes records with the exact ndjson schema", () => {
    const file = path.join(dir, "records.ndjson");
    writeRecords(
      [{ mask_id: 3, image_id: 1, area: 7, bbox: [0, 1, 2, 3], label: null, split: "unlabeled" }],
      file,
    );
    const line = fs.readFileSync(file, "utf-8").trim();
    expect(JSON.parse(line)).toEqual({
      mask_id: 3, image_id: 1, area: 7, bbox: [0, 1, 2, 3], label: null, split: "unlabeled",
    });
    expect(line.indexOf('"mask_id"')).toBeLessThan(line.indexOf('"image_id"'));
  });

  it("writes little-endian float32 features with a matching meta file", () => {
    writeFeatures([Float64Array.from([1.0, -2.0])], path.join(dir, "m.json"), path.join(dir, "f.f32"));
    expect(JSON.parse(fs.readFileSync(path.join(dir, "m.json"), "utf-8"))).toEqual({ n: 1, d: 2 });
    const bytes = fs.readFileSync(path.join(dir, "f.f32"));
    expect(bytes.length).toBe(8);
    expect(Array.from(bytes.subarray(0, 4))).toEqual([0x00, 0x00, 0x80, 0x3f]); // 1.0f LE
    expect(bytes.readFloatLE(4)).toBe(-2.0);
  });

  it("writes geometries sorted by mask_id", () => {
    const file = path.join(dir, "g.ndjson");
    const geoms = new Map([
      [5, { size: [1, 2] as [number, number], counts: [0, 2] }],
      [1, { size: [1, 2] as [number, number], counts: [2] }],
    ]);
    writeGeometries(geoms, file);
    const ids = fs.readFileSync(file, "utf-8").trim().split("\n").map((l) => JSON.parse(l).mask_id);
    expect(ids).toEqual([1, 5]);
  });

  it("writes u16 maps with the GCDM header", () => {
    const file = path.join(dir, "map_0.u16");
    writeMapU16(Uint16Array.from([0, 1, 65535, 3, 4, 5]), 2, 3, file);
    const raw = fs.readFileSync(file);
    expect(raw.subarray(0, 4).toString("ascii")).toBe("GCDM");
    expect(raw.readUInt16LE(4)).toBe(1);
    expect(raw.readUInt32LE(8)).toBe(2);
    expect(raw.readUInt32LE(12)).toBe(3);
    expect(raw.length).toBe(16 + 12);
    expect(raw.readUInt16LE(16 + 2 * 2)).toBe(65535);
  });

  it("reads back engine label files", () => {
    const file = path.join(dir, "labels.ndjson");
    fs.writeFileSync(file, '{"mask_id":0,"label":4,"confidence":0.5}\n{"mask_id":1,"label":-1,"confidence":0.0}\n');
    expect(readLabels(file)).toEqual([
      { mask_id: 0, label: 4, confidence: 0.5 },
      { mask_id: 1, label: -1, confidence: 0.0 },
    ]);
  });
});
