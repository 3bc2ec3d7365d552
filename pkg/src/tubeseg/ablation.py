"""Similarity-term ablation on synthetic scenes (drop-one and only-one rows)."""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, Iterable

import numpy as np

from .config import PipelineConfig
from .metrics import tube_box_iou
from .pipeline import VideoInputs, track
from .similarity import SimilarityConfig
from .synth import SceneSpec, crossing_objects_scene, synthesize_scene

COLUMNS = (
    ("score",),
    ("side",),
    ("vol",),
    ("vol", "side"),
    ("match",),
    ("center",),
    ("match", "center"),
    ("app",),
    (),  # all terms
)


def column_name(terms) -> str:
    return "+".join(terms) if terms else "all"


def tube_quality(tubes, gt_boxes) -> float:
    """Mean over ground-truth objects of the best tube's box IoU."""
    scores = []
    for boxes in gt_boxes:
        scores.append(max((tube_box_iou(t.as_dict(), boxes) for t in tubes), default=0.0))
    return float(np.mean(scores)) if scores else 0.0


def ablation_grid(
    seeds: Iterable[int],
    cfg: PipelineConfig = PipelineConfig(),
    scene: Callable[[int], SceneSpec] = lambda s: crossing_objects_scene(
        seed=s, jitter=1, dropout=0.2, false_positive_rate=0.3
    ),
) -> dict[str, dict[str, float]]:
    """``{"-": {column: iou}, "+": {column: iou}}`` averaged over seeds."""
    scenes = [synthesize_scene(scene(s)) for s in seeds]
    base = cfg.similarity
    knobs = dict(
        app_threshold=base.app_threshold, center_decay=base.center_decay, search_radius=base.search_radius
    )
    grid: dict[str, dict[str, float]] = {"-": {}, "+": {}}
    for terms in COLUMNS:
        for row in ("-", "+"):
            if not terms:
                sim = SimilarityConfig(**knobs)
            elif row == "-":
                sim = SimilarityConfig.without(*terms, **knobs)
            else:
                sim = SimilarityConfig.only(*terms, **knobs)
            run_cfg = replace(cfg, similarity=sim)
            values = [tube_quality(track(VideoInputs.from_scene(sc), run_cfg), sc.gt_boxes) for sc in scenes]
            grid[row][column_name(terms)] = float(np.mean(values))
    return grid


def format_grid(grid: dict[str, dict[str, float]]) -> str:
    cols = [column_name(t) for t in COLUMNS]
    lines = ["row," + ",".join(cols)]
    for row in ("-", "+"):
        lines.append(row + "," + ",".join(f"{100 * grid[row][c]:.2f}" for c in cols))
    return "\n".join(lines) + "\n"
