#!/usr/bin/env node
/**
 * bridge export --images DIR --out DIR [--config bridge.json]
 *               [--split labeled|unlabeled --gt DIR]
 * bridge split  --cityscapes DIR --comb N --out DIR [--labeled-count N]
 */

import { buildSplit } from "./cityscapes";
import { loadConfig } from "./config";
import { BridgeError } from "./errors";
import { exportImages } from "./export";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new BridgeError("PARAM_ERROR", `expected --flag value pairs, got ${argv[i]}`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) throw new BridgeError("PARAM_ERROR", `--${name} is required`);
  return value;
}

export async function main(argv: string[]): Promise<number> {
  try {
    const command = argv[0];
    const flags = parseFlags(argv.slice(1));
    if (command === "export") {
      const config = loadConfig(flags.get("config") ?? null);
      const split = (flags.get("split") ?? "unlabeled") as "labeled" | "unlabeled";
      if (split !== "labeled" && split !== "unlabeled") {
        throw new BridgeError("PARAM_ERROR", `--split must be labeled or unlabeled, got ${split}`);
      }
      const result = await exportImages(need(flags, "images"), need(flags, "out"), config, {
        split,
        gtDir: flags.get("gt"),
      });
      console.log(JSON.stringify(result));
      return 0;
    }
    if (command === "split") {
      const comb = parseInt(need(flags, "comb"), 10);
      const labeledCount = flags.has("labeled-count")
        ? parseInt(need(flags, "labeled-count"), 10)
        : undefined;
      const result = buildSplit(need(flags, "cityscapes"), comb, need(flags, "out"), { labeledCount });
      console.log(JSON.stringify({
        labeled: result.labeled.length,
        unlabeled: result.unlabeled.length,
        unlabeled_with_novel: result.novelImageCount,
        novel_pixel_fraction: result.novelPixelFraction,
      }));
      return 0;
    }
    throw new BridgeError("PARAM_ERROR", `unknown command ${command}; use export or split`);
  } catch (e) {
    if (e instanceof BridgeError) {
      console.error(e.message);
      return e.code === "PARAM_ERROR" ? 2 : 3;
    }
    console.error(e);
    return 4;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
