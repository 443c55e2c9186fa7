"""Command-line surface: propagate, evaluate, synth, serve, bench.

Every subcommand validates its inputs up front, prints a specific error
to stderr on failure, and exits nonzero; exit code 0 means success.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .grids import resize_nearest
from .metrics import evaluate_sequence, format_report, report_records
from .propagate import run
from .seqio import (RunConfig, collect_masks, load_sequence, parse_config_file,
                    parse_ratio, partition_counts, read_mask, scene_from_mapping,
                    write_mask, write_sequence)
from .synth import generate

__all__ = ["main"]

log = logging.getLogger(__name__)

_SPLIT_NAMES = ("train", "val", "test")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memseg",
        description="Moving-object segmentation from a single annotated frame.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate",
                       help="propagate an annotation through a sequence")
    p.add_argument("--seq", required=True, help="sequence folder (frames/ + masks/)")
    p.add_argument("--annotated", required=True, type=int,
                   help="frame index carrying the annotation")
    p.add_argument("--direction", choices=("forward", "backward", "both"),
                   help="override the configured direction")
    p.add_argument("--config", help="key=value settings file")
    p.add_argument("--out", help="output directory for predicted masks")

    p = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted masks")
    p.add_argument("--gt", required=True, help="directory of ground-truth masks")
    p.add_argument("--tolerance", type=int, default=None,
                   help="boundary tolerance radius in pixels (default: from dims)")
    p.add_argument("--out", help="also write a key=value record file")

    p = sub.add_parser("synth", help="generate a synthetic sequence with ground truth")
    p.add_argument("--spec", required=True, help="key=value scene description file")
    p.add_argument("--out", required=True, help="output sequence folder")
    p.add_argument("--split", help="partition frames, e.g. 3:1:1 -> train/val/test")

    p = sub.add_parser("serve", help="start the annotation HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data", required=True, help="directory for persisted sessions")
    p.add_argument("--max-upload-mb", type=int, default=64)

    p = sub.add_parser("bench", help="run the acceptance suite")
    p.add_argument("--only", help="run only criteria whose name contains this")
    return parser


def _cmd_propagate(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    prop = cfg.propagation
    if args.direction:
        prop = replace(prop, direction=args.direction)
    out_dir = args.out or cfg.out_dir
    if not out_dir:
        raise ValueError("no output directory (pass --out or set out= in the config)")
    folder = load_sequence(args.seq, resolution=cfg.resolution)
    if args.annotated not in folder.annotations:
        raise ValueError(f"no annotation for frame {args.annotated} in '{args.seq}'")
    position = folder.position_of(args.annotated)
    annotation = folder.load_mask(args.annotated)
    frames = folder.load_frames()

    result = run(frames, position, annotation, prop)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for pos in result.visited:
        mask = result.masks[pos]
        labels = mask.labels
        if labels.shape != folder.dims:
            labels = resize_nearest(labels, folder.dims)
        write_mask(out / f"{folder.indices[pos]:05d}.png", labels)
        written += 1
    log_lines = [f"frame={folder.indices[e.frame_index]} prototypes={e.prototypes}"
                 for e in result.events]
    (out / "consolidation.log").write_text("".join(line + "\n" for line in log_lines))
    print(f"wrote {written} masks and {len(log_lines)} consolidation events to {out}")
    return 0


def _cmd_evaluate(args) -> int:
    pred_paths = collect_masks(args.pred)
    gt_paths = collect_masks(args.gt)
    missing = sorted(set(gt_paths) - set(pred_paths))
    if missing:
        raise ValueError(f"missing prediction for frame {missing[0]}")
    indices = sorted(gt_paths)
    preds = [read_mask(pred_paths[i]) for i in indices]
    gts = [read_mask(gt_paths[i]) for i in indices]
    report = evaluate_sequence(preds, gts, tol=args.tolerance, indices=indices)
    name = Path(args.pred).name or "sequence"
    print(format_report(report, name=name))
    if args.out:
        Path(args.out).write_text(report_records(report, name=name) + "\n")
    return 0


def _cmd_synth(args) -> int:
    scene = scene_from_mapping(parse_config_file(args.spec))
    frames, masks = generate(scene)
    out = Path(args.out)
    if args.split:
        counts = partition_counts(len(frames), parse_ratio(args.split))
        names = (_SPLIT_NAMES if len(counts) == len(_SPLIT_NAMES)
                 else [f"part{i + 1}" for i in range(len(counts))])
        at = 0
        for name, count in zip(names, counts):
            write_sequence(out / name, frames[at:at + count], masks[at:at + count])
            at += count
        print(f"wrote {len(frames)} frames to {out} "
              f"({', '.join(f'{n}={c}' for n, c in zip(names, counts))})")
    else:
        write_sequence(out, frames, masks)
        print(f"wrote {len(frames)} frames to {out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.data), max_upload_mb=args.max_upload_mb)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_bench(args) -> int:
    from .acceptance import run_criteria

    results = run_criteria(only=args.only)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} criteria passed")
    return 0 if failed == 0 else 1


_COMMANDS = {
    "propagate": _cmd_propagate,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
    "serve": _cmd_serve,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
