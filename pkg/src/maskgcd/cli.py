"""Command-line entry point.

    maskgcd run       --config run.json [--out DIR] [--threads N]
    maskgcd knn|propagate|complete|cluster|assemble|eval
                      --config run.json [--out DIR] [--threads N]
    maskgcd synth     --config synth.json --out DIR [--seed N]
    maskgcd slic      --image in.ppm --segments N [--compactness M]
                      --out-records F --out-geometries F
                      [--out-features F --out-meta F]

Exit codes: 0 ok, 2 config error, 3 data error, 4 internal.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import pipeline
from .core import MaskRecord, UNLABELED
from .errors import CONFIG_CODES, ConfigError, EngineError
from .mask_io import write_features, write_geometries, write_records
from .rle import rle_bbox
from .slic import SlicParams, centroid_features, read_ppm, slic_segment
from .synth import SynthSpec, generate, write_dataset

_STAGES = {
    "knn": pipeline.stage_knn,
    "propagate": pipeline.stage_propagate,
    "complete": pipeline.stage_complete,
    "cluster": pipeline.stage_cluster,
    "assemble": pipeline.stage_assemble,
    "eval": pipeline.stage_eval,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskgcd", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ["run", *_STAGES]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("synth")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("slic")
    p.add_argument("--image", required=True, type=Path)
    p.add_argument("--segments", required=True, type=int)
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--no-seed-perturb", action="store_true")
    p.add_argument("--image-id", type=int, default=0)
    p.add_argument("--out-records", required=True, type=Path)
    p.add_argument("--out-geometries", required=True, type=Path)
    p.add_argument("--out-features", type=Path, default=None)
    p.add_argument("--out-meta", type=Path, default=None)
    return parser


def _cmd_synth(args) -> None:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {args.config}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{args.config}: malformed JSON ({e.msg})") from e
    if args.seed is not None:
        raw["rng_seed"] = args.seed
    try:
        spec = SynthSpec(**raw)
    except TypeError as e:
        raise ConfigError(f"{args.config}: {e}") from e
    paths = write_dataset(generate(spec), args.out)
    print(json.dumps(paths, indent=2, sort_keys=True))


def _cmd_slic(args) -> None:
    if (args.out_features is None) != (args.out_meta is None):
        raise ConfigError("--out-features and --out-meta must be given together")
    image = read_ppm(args.image)
    params = SlicParams(n_segments=args.segments, compactness=args.compactness,
                        max_iters=args.max_iters, seed_perturb=not args.no_seed_perturb)
    masks = slic_segment(image, params)
    records = []
    geometries = {}
    for i, rle in enumerate(masks):
        records.append(MaskRecord(mask_id=i, image_id=args.image_id, area=rle.area,
                                  bbox=rle_bbox(rle), label=None, split=UNLABELED))
        geometries[i] = rle
    write_records(records, args.out_records)
    write_geometries(geometries, args.out_geometries)
    if args.out_features is not None:
        write_features(centroid_features(image, masks), args.out_meta, args.out_features)
    print(f"{len(masks)} masks from {args.image}")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            _cmd_synth(args)
        elif args.command == "slic":
            _cmd_slic(args)
        else:
            cfg = pipeline.load_config(args.config, out_override=args.out, threads=args.threads)
            if args.command == "run":
                artifacts = pipeline.run_pipeline(cfg)
                print(json.dumps(artifacts, indent=2, sort_keys=True))
            else:
                print(_STAGES[args.command](cfg))
    except EngineError as e:
        print(f"error[{e.code}]: {e.message}", file=sys.stderr)
        return 2 if e.code in CONFIG_CODES else 3
    except Exception:  # pragma: no cover - internal faults
        traceback.print_exc()
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
