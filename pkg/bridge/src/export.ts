/**
 * Export pipeline: images -> mask proposals -> disjoint coverage -> padded
 * crops -> feature rows -> interchange files the engine ingests directly.
 */

import * as fs from "fs";
import * as path from "path";
import { BridgeConfig } from "./config";
import { BridgeError } from "./errors";
import { makeExtractor } from "./extractors";
import { RgbImage, readImage, readLabelPng } from "./images";
import { MaskRecord, ensureDir, writeFeatures, writeGeometries, writeRecords } from "./interchange";
import { resolveProposals } from "./overlap";
import { padAndResize } from "./padding";
import { makeProposer } from "./proposers";
import { RleMask, rleArea, rleBbox, rleDecode } from "./rle";

export interface ExportOptions {
  /** labeled exports need ground-truth train-id maps to derive mask labels */
  split: "labeled" | "unlabeled";
  gtDir?: string;
  /** remap from raw gt value to engine class id (identity when absent) */
  gtRemap?: Uint16Array;
  kBase?: number;
}

export interface ExportResult {
  images: number;
  masks: number;
  featureDim: number;
}

const IMAGE_EXTENSIONS = [".png", ".ppm"];

export function listImages(dir: string): string[] {
  if (!fs.existsSync(dir)) {
    throw new BridgeError("DATASET_NOT_FOUND", `image directory ${dir} does not exist`);
  }
  return fs
    .readdirSync(dir)
    .filter((name) => IMAGE_EXTENSIONS.some((ext) => name.toLowerCase().endsWith(ext)))
    .sort()
    .map((name) => path.join(dir, name));
}

export async function exportImages(imageDir: string, outDir: string, config: BridgeConfig,
                                   options: ExportOptions = { split: "unlabeled" }): Promise<ExportResult> {
  const files = listImages(imageDir);
  if (files.length === 0) {
    throw new BridgeError("DATASET_NOT_FOUND", `no .png/.ppm images under ${imageDir}`);
  }
  const proposer = makeProposer(config);
  const extractor = makeExtractor(config);

  const records: MaskRecord[] = [];
  const geometries = new Map<number, RleMask>();
  const rows: Float64Array[] = [];
  let maskId = 0;

  for (let imageId = 0; imageId < files.length; imageId++) {
    const image = readImage(files[imageId]);
    const proposals = await proposer.propose(image);
    const { masks } = resolveProposals(proposals, image.height, image.width);
    const labels = options.split === "labeled"
      ? deriveLabels(files[imageId], image, masks, options)
      : masks.map(() => null as number | null);

    for (let i = 0; i < masks.length; i++) {
      const rle = masks[i];
      records.push({
        mask_id: maskId,
        image_id: imageId,
        area: rleArea(rle),
        bbox: rleBbox(rle),
        label: labels[i],
        split: options.split,
      });
      geometries.set(maskId, rle);
      rows.push(await extractor.embed(padAndResize(image, rle, extractor.inputSize)));
      maskId++;
    }
  }

  ensureDir(outDir);
  writeRecords(records, path.join(outDir, "records.ndjson"));
  writeFeatures(rows, path.join(outDir, "features.meta.json"), path.join(outDir, "features.f32"));
  writeGeometries(geometries, path.join(outDir, "geometries.ndjson"));
  const manifest = {
    images: files.map((f, i) => ({ image_id: i, path: f })),
    masks: maskId,
    split: options.split,
    proposer: proposer.name,
    extractor: extractor.name,
    resize_target: extractor.inputSize,
    crop: "tight bbox, non-mask pixels filled with the rectangle-boundary mean",
    config,
  };
  fs.writeFileSync(path.join(outDir, "export_manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
  return { images: files.length, masks: maskId, featureDim: rows.length ? rows[0].length : 0 };
}

/**
 * Majority ground-truth class over the mask's pixels (ignoring VOID); falls
 * back to the majority over all pixels, then to class 0, so every labeled
 * mask carries a label as the format requires.
 */
function deriveLabels(imageFile: string, image: RgbImage, masks: RleMask[],
                      options: ExportOptions): (number | null)[] {
  if (!options.gtDir) {
    throw new BridgeError("PARAM_ERROR", "labeled export needs --gt with ground-truth maps");
  }
  const base = path.basename(imageFile).replace(/\.(png|ppm)$/i, "");
  const gtPath = path.join(options.gtDir, `${base}.png`);
  if (!fs.existsSync(gtPath)) {
    throw new BridgeError("DATASET_NOT_FOUND", `no ground truth for ${imageFile} at ${gtPath}`);
  }
  const gt = readLabelPng(gtPath);
  if (gt.width !== image.width || gt.height !== image.height) {
    throw new BridgeError("FORMAT_ERROR", `${gtPath}: size ${gt.width}x${gt.height} != image`);
  }
  const kBase = options.kBase ?? 255;
  return masks.map((rle) => {
    const bitmap = rleDecode(rle);
    const votes = new Map<number, number>();
    for (let i = 0; i < bitmap.length; i++) {
      if (!bitmap[i]) continue;
      const cls = options.gtRemap ? options.gtRemap[gt.labels[i]] : gt.labels[i];
      if (cls >= kBase) continue; // VOID or non-base: no vote
      votes.set(cls, (votes.get(cls) ?? 0) + 1);
    }
    let best = 0;
    let bestCount = -1;
    for (const [cls, count] of votes) {
      if (count > bestCount || (count === bestCount && cls < best)) {
        best = cls;
        bestCount = count;
      }
    }
    return bestCount >= 0 ? best : 0;
  });
}
