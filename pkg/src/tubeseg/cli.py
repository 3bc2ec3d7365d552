"""Command-line entry point: ``tubeseg {synth,track,segment,eval,ablate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import SOLVER_CHOICES, ConfigError, PipelineConfig, load_config
from .core import InputError
from .metrics import eval_fmeasure, match_labels, objects_from_label_maps, segmentation_iou
from .pipeline import VideoInputs, load_inputs, read_label_dir, run_pipeline, track, tubes_to_json, write_result, write_scene
from .synth import crossing_objects_scene, synthesize_scene, translating_object_scene

log = logging.getLogger("tubeseg")

SCENES = {"translate": translating_object_scene, "crossing": crossing_objects_scene}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON pipeline configuration")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--solver", choices=SOLVER_CHOICES, help="energy minimiser (overrides the config)")
    p.add_argument("--single-thread", action="store_true", help="disable the worker pool")
    p.add_argument("--report", type=Path, help="write a JSON timing/summary report here")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="tubeseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic scene directory")
    p.add_argument("out", type=Path)
    p.add_argument("--scene", choices=sorted(SCENES), default="translate")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--jitter", type=int, default=0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--false-positives", type=float, default=0.0)

    p = sub.add_parser("track", parents=[common], help="extract tubes only")
    p.add_argument("scene", type=Path)
    p.add_argument("--out", type=Path, help="tube JSON (stdout if omitted)")

    p = sub.add_parser("segment", parents=[common], help="run the full segmentation")
    p.add_argument("scene", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", parents=[common], help="score label maps against ground truth")
    p.add_argument("pred", type=Path, help="directory of predicted label PGMs")
    p.add_argument("gt", type=Path, help="directory of ground-truth label PGMs")

    p = sub.add_parser("ablate", parents=[common], help="similarity-term ablation on synthetic scenes")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--out", type=Path, help="CSV output (stdout if omitted)")
    return parser


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.solver is not None:
        changes["solver"] = args.solver
    if args.single_thread:
        changes["single_thread"] = True
    return replace(cfg, **changes) if changes else cfg


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = _config(args)
        report = _dispatch(args, cfg)
    except (InputError, ConfigError, OSError) as exc:
        print(f"tubeseg: error: {exc}", file=sys.stderr)
        return 2
    if args.report is not None and report is not None:
        args.report.write_text(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _dispatch(args, cfg: PipelineConfig):
    t0 = time.perf_counter()
    if args.command == "synth":
        spec = SCENES[args.scene](
            seed=cfg.seed,
            frames=args.frames,
            jitter=args.jitter,
            dropout=args.dropout,
            false_positive_rate=args.false_positives,
        )
        scene = synthesize_scene(spec)
        write_scene(scene, args.out)
        return {"command": "synth", "frames": len(scene.frames), "detections": len(scene.detections),
                "total": time.perf_counter() - t0}

    if args.command == "track":
        inputs = load_inputs(args.scene)
        inputs.validate()
        tubes = track(inputs, cfg)
        _emit(json.dumps(tubes_to_json(tubes), indent=2) + "\n", args.out)
        return {"command": "track", "num_tubes": len(tubes), "total": time.perf_counter() - t0}

    if args.command == "segment":
        inputs = load_inputs(args.scene)
        result = run_pipeline(inputs, cfg)
        write_result(result, args.out)
        return {"command": "segment", **result.report()}

    if args.command == "eval":
        pred = read_label_dir(args.pred)
        gt = read_label_dir(args.gt)
        if len(pred) != len(gt):
            raise InputError(f"{len(pred)} predicted frames vs {len(gt)} ground-truth frames")
        iou_report = segmentation_iou(pred, gt)
        po, go = objects_from_label_maps(pred), objects_from_label_maps(gt)
        fm = eval_fmeasure(list(po.values()), list(go.values()))
        p, r, f = fm.averages()
        out = {
            "iou": {str(k): v for k, v in iou_report["per_object"].items()},
            "average_iou": iou_report["average"],
            "matching": {str(g): pl for g, pl in match_labels(pred, gt).items()},
            "precision": p,
            "recall": r,
            "f_measure": f,
            "segmented_objects": f"{fm.matched}/{len(go)}",
        }
        print(json.dumps(out, indent=2))
        return {"command": "eval", **out, "total": time.perf_counter() - t0}

    if args.command == "ablate":
        from .ablation import ablation_grid, format_grid

        grid = ablation_grid(range(cfg.seed, cfg.seed + args.seeds), cfg)
        _emit(format_grid(grid), args.out)
        return {"command": "ablate", "grid": grid, "total": time.perf_counter() - t0}
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
