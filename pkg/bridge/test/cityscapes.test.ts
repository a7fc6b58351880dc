import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { afterEach, beforeEach, describe, expect, it } from "vitest";
import { COMBINATIONS, TRAIN_ID_NAMES, buildSplit, remapForCombination } from "../src/cityscapes";
import { writePng } from "../src/images";
import { VOID } from "../src/interchange";

let root: string;
let out: string;
beforeEach(() => {
  root = fs.mkdtempSync(path.join(os.tmpdir(), "cs-"));
  out = fs.mkdtempSync(path.join(os.tmpdir(), "cs-out-"));
});
afterEach(() => {
  fs.rmSync(root, { recursive: true, force: true });
  fs.rmSync(out, { recursive: true, force: true });
});

function writeGt(name: string, labels: number[], w: number, h: number) {
  const data = new Uint8Array(w * h * 3);
  labels.forEach((v, i) => {
    data[i * 3] = v;
    data[i * 3 + 1] = v;
    data[i * 3 + 2] = v;
  });
  const dir = path.join(root, "gtFine", "train", "city");
  fs.mkdirSync(dir, { recursive: true });
  writePng({ width: w, height: h, data }, path.join(dir, `${name}_labelTrainIds.png`));
}

describe("combination definitions", () => {
  it("lists the five benchmark novel-class sets", () => {
    const names = (c: number) => COMBINATIONS[c].map((t) => TRAIN_ID_NAMES[t]);
    expect(names(1)).toEqual(["rider", "truck", "bus", "train"]);
    expect(names(2)).toEqual(["rider", "bus", "train", "motorcycle"]);
    expect(names(3)).toEqual(["wall", "truck", "bus", "train"]);
    expect(names(4)).toEqual(["wall", "bus", "train", "motorcycle"]);
    expect(names(5)).toEqual(["fence", "truck", "bus", "train"]);
  });

  it("remaps base classes to 0..14, novel to 15..18, ignore to VOID", () => {
    const remap = remapForCombination(1);
    expect(remap.baseTrainIds.length).toBe(15);
    expect(remap.novelTrainIds).toEqual([12, 14, 15, 16]);
    expect(remap.table[0]).toBe(0); // road stays first base class
    expect(remap.table[12]).toBe(15); // rider becomes the first novel id
    expect(remap.table[16]).toBe(18); // train is the last novel id
    expect(remap.table[13]).toBe(12); // car shifts down past the novel gap
    expect(remap.table[255]).toBe(VOID);
    expect(() => remapForCombination(6)).toThrow(/PARAM_ERROR/);
  });
});

describe("split construction", () => {
  it("sends every novel-containing image to the unlabeled split", () => {
    writeGt("a", [0, 1, 2, 13], 2, 2); // base only
    writeGt("b", [0, 12, 13, 13], 2, 2); // contains rider -> novel in comb 1
    writeGt("c", [10, 10, 2, 2], 2, 2); // base only
    writeGt("d", [14, 14, 0, 0], 2, 2); // contains truck
    const result = buildSplit(root, 1, out, { labeledCount: 1 });
    expect(result.labeled.length).toBe(1);
    expect(result.unlabeled.length).toBe(3);
    for (const file of result.labeled) {
      expect(file).toContain("a_labelTrainIds"); // first novel-free in sorted order
    }
    expect(result.novelImageCount).toBe(2);
  });

  it("emits remapped GT maps for the unlabeled split only", () => {
    writeGt("a", [0, 1, 2, 13], 2, 2);
    writeGt("b", [0, 12, 255, 13], 2, 2);
    const result = buildSplit(root, 1, out, { labeledCount: 1 });
    const files = fs.readdirSync(path.join(out, "gt_maps"));
    expect(files.length).toBe(1);
    const raw = fs.readFileSync(path.join(out, "gt_maps", files[0]));
    expect(raw.subarray(0, 4).toString("ascii")).toBe("GCDM");
    const pixels = [raw.readUInt16LE(16), raw.readUInt16LE(18), raw.readUInt16LE(20), raw.readUInt16LE(22)];
    expect(pixels).toEqual([0, 15, VOID, 12]); // road, rider->novel, ignore, car
    // 1 novel pixel of 3 evaluated pixels
    expect(result.novelPixelFraction).toBeCloseTo(1 / 3, 6);
  });

  it("raises DATASET_NOT_FOUND for missing or empty roots", () => {
    expect(() => buildSplit(path.join(root, "nope"), 1, out)).toThrow(/DATASET_NOT_FOUND/);
    expect(() => buildSplit(root, 1, out)).toThrow(/DATASET_NOT_FOUND/);
  });
});
