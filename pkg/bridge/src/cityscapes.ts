/**
 * Cityscapes-GCD split construction.
 *
 * Works on train-id ground truth (*_labelTrainIds.png, values 0..18 plus 255
 * for ignore). For a chosen combination, the four novel classes are remapped
 * to ids 15..18 (in train-id order), the fifteen base classes to 0..14, and
 * ignore pixels to 65535. Any image containing a novel-class pixel must be
 * in the unlabeled split; novel-free images fill the labeled split up to the
 * target count (deterministic: sorted path order) and the rest go unlabeled.
 */

import * as fs from "fs";
import * as path from "path";
import { BridgeError } from "./errors";
import { readLabelPng } from "./images";
import { VOID, ensureDir, mapFilename, writeMapU16 } from "./interchange";

export const TRAIN_ID_NAMES = [
  "road", "sidewalk", "building", "wall", "fence", "pole", "traffic light",
  "traffic sign", "vegetation", "terrain", "sky", "person", "rider", "car",
  "truck", "bus", "train", "motorcycle", "bicycle",
] as const;

const IGNORE = 255;

/** Novel-class sets per combination, by train id. */
export const COMBINATIONS: Record<number, number[]> = {
  1: [12, 14, 15, 16], // rider, truck, bus, train
  2: [12, 15, 16, 17], // rider, bus, train, motorcycle
  3: [3, 14, 15, 16], // wall, truck, bus, train
  4: [3, 15, 16, 17], // wall, bus, train, motorcycle
  5: [4, 14, 15, 16], // fence, truck, bus, train
};

export interface Remap {
  /** train id (0..18) or IGNORE -> gcd id; base 0..14, novel 15..18, VOID */
  table: Uint16Array;
  baseTrainIds: number[];
  novelTrainIds: number[];
  baseNames: string[];
  novelNames: string[];
}

export function remapForCombination(combination: number): Remap {
  const novel = COMBINATIONS[combination];
  if (!novel) {
    throw new BridgeError("PARAM_ERROR", `combination must be 1..5, got ${combination}`);
  }
  const novelSet = new Set(novel);
  const base = [];
  for (let t = 0; t < TRAIN_ID_NAMES.length; t++) {
    if (!novelSet.has(t)) base.push(t);
  }
  const table = new Uint16Array(256).fill(VOID);
  base.forEach((t, i) => (table[t] = i));
  novel.forEach((t, i) => (table[t] = base.length + i));
  return {
    table,
    baseTrainIds: base,
    novelTrainIds: novel,
    baseNames: base.map((t) => TRAIN_ID_NAMES[t]),
    novelNames: novel.map((t) => TRAIN_ID_NAMES[t]),
  };
}

export interface SplitResult {
  labeled: string[];
  unlabeled: string[];
  imageIds: Map<string, number>;
  novelImageCount: number;
  novelPixelFraction: number;
}

export interface SplitOptions {
  /** labeled-set size; default keeps the 1390:2085 benchmark proportion */
  labeledCount?: number;
  gtGlob?: string;
}

const GT_SUFFIX = "_labelTrainIds.png";
const BENCHMARK_LABELED_FRACTION = 1390 / 3475;

export function findGtFiles(root: string): string[] {
  if (!fs.existsSync(root)) {
    throw new BridgeError("DATASET_NOT_FOUND", `dataset root ${root} does not exist`);
  }
  const out: string[] = [];
  const walk = (dir: string) => {
    for (const entry of fs.readdirSync(dir, { withFileTypes: true })) {
      const p = path.join(dir, entry.name);
      if (entry.isDirectory()) walk(p);
      else if (entry.name.endsWith(GT_SUFFIX)) out.push(p);
    }
  };
  walk(root);
  if (out.length === 0) {
    throw new BridgeError("DATASET_NOT_FOUND", `no *${GT_SUFFIX} files under ${root}`);
  }
  return out.sort();
}

export function buildSplit(root: string, combination: number, outDir: string,
                           options: SplitOptions = {}): SplitResult {
  const remap = remapForCombination(combination);
  const novelTrain = new Set(remap.novelTrainIds);
  const gtFiles = findGtFiles(root);

  const hasNovel: boolean[] = [];
  let novelPixels = 0;
  let unlabeledPixels = 0;
  const rasters: { file: string; width: number; height: number; labels: Uint8Array }[] = [];
  for (const file of gtFiles) {
    const gt = readLabelPng(file);
    let any = false;
    for (let i = 0; i < gt.labels.length; i++) {
      if (novelTrain.has(gt.labels[i])) {
        any = true;
        break;
      }
    }
    hasNovel.push(any);
    rasters.push({ file, ...gt });
  }

  const labeledTarget = options.labeledCount ?? Math.round(gtFiles.length * BENCHMARK_LABELED_FRACTION);
  const labeled: string[] = [];
  const unlabeled: string[] = [];
  for (let i = 0; i < gtFiles.length; i++) {
    if (!hasNovel[i] && labeled.length < labeledTarget) labeled.push(gtFiles[i]);
    else unlabeled.push(gtFiles[i]);
  }

  ensureDir(outDir);
  const gtMapDir = path.join(outDir, "gt_maps");
  ensureDir(gtMapDir);
  const imageIds = new Map<string, number>();
  gtFiles.forEach((f, i) => imageIds.set(f, i));

  let novelImageCount = 0;
  for (const file of unlabeled) {
    const { width, height, labels } = rasters[gtFiles.indexOf(file)];
    const raster = new Uint16Array(width * height);
    let sawNovel = false;
    for (let i = 0; i < labels.length; i++) {
      const gcd = remap.table[labels[i]];
      raster[i] = gcd;
      if (gcd !== VOID) {
        unlabeledPixels++;
        if (gcd >= remap.baseTrainIds.length) {
          novelPixels++;
          sawNovel = true;
        }
      }
    }
    if (sawNovel) novelImageCount++;
    writeMapU16(raster, height, width, path.join(gtMapDir, mapFilename(imageIds.get(file)!)));
  }

  fs.writeFileSync(path.join(outDir, "labeled.txt"), labeled.join("\n") + (labeled.length ? "\n" : ""));
  fs.writeFileSync(path.join(outDir, "unlabeled.txt"), unlabeled.join("\n") + (unlabeled.length ? "\n" : ""));
  const fraction = unlabeledPixels ? novelPixels / unlabeledPixels : 0;
  const manifest = {
    combination,
    base_classes: remap.baseNames,
    novel_classes: remap.novelNames,
    labeled_images: labeled.length,
    unlabeled_images: unlabeled.length,
    unlabeled_images_with_novel: novelImageCount,
    novel_pixel_fraction: fraction,
    image_ids: Object.fromEntries(Array.from(imageIds, ([f, i]) => [f, i])),
  };
  fs.writeFileSync(path.join(outDir, "split_manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
  return { labeled, unlabeled, imageIds, novelImageCount, novelPixelFraction: fraction };
}
