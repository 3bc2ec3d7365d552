"""End-to-end run: detections -> tubes -> priors -> superpixel labelling.

A scene directory holds::

    frames/0000.ppm ...        RGB frames (.ppm or .png)
    flow/0000.flo ...          flow from frame t to t+1 (one fewer than frames)
    superpixels/0000.pgm ...   16-bit superpixel label maps
    detections.csv             frame,x_min,y_min,x_max,y_max,score,category
    gt/0000.pgm, gt.json       optional indexed ground truth and its categories
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as tio
from .config import PipelineConfig
from .core import Detection, FlowField, Image, InputError
from .foreground import build_appearance_models, grabcut_box
from .motion import inside_outside_map, motion_boundaries, propagate_prior, restrict_map
from .segmentation import (
    build_superpixel_graph,
    labels_to_maps,
    merge_tube_groups,
    potts_energy,
    unary_potentials,
)
from .similarity import SimilarityContext
from .solvers import solve_alpha_expansion, solve_bruteforce, solve_icm
from .synth import SyntheticScene
from .tubes import Tube, build_link_graph, extract_tubes, interpolate_tube, tube_nms

log = logging.getLogger(__name__)


@dataclass
class VideoInputs:
    images: list[Image]
    flows: list[FlowField]
    label_maps: list[np.ndarray]
    detections: list[Detection]

    def validate(self) -> None:
        n = len(self.images)
        if n == 0:
            raise InputError("video has no frames")
        h, w = self.images[0].height, self.images[0].width
        for t, img in enumerate(self.images):
            if (img.height, img.width) != (h, w):
                raise InputError(f"frame {t}: size {img.width}x{img.height}, expected {w}x{h}")
        if len(self.flows) < n - 1:
            raise InputError(f"flow missing for frame {len(self.flows)} ({n} frames need {n - 1} fields)")
        for t, f in enumerate(self.flows[: n - 1]):
            if (f.height, f.width) != (h, w):
                raise InputError(f"flow for frame {t}: size {f.width}x{f.height}, expected {w}x{h}")
        if len(self.label_maps) != n:
            raise InputError(f"superpixels missing for frame {len(self.label_maps)}" if len(self.label_maps) < n
                             else f"{len(self.label_maps)} superpixel maps for {n} frames")
        for t, lab in enumerate(self.label_maps):
            if np.shape(lab) != (h, w):
                raise InputError(f"superpixels for frame {t}: shape {np.shape(lab)}, expected {(h, w)}")
        for d in self.detections:
            if d.frame >= n:
                raise InputError(f"detection in frame {d.frame} but video has {n} frames")
            if not d.box.inside(w, h):
                raise InputError(f"frame {d.frame}: detection box {d.box.as_tuple()} leaves the image")

    @classmethod
    def from_scene(cls, scene: SyntheticScene) -> VideoInputs:
        return cls(list(scene.frames), list(scene.flows), list(scene.superpixels), list(scene.detections))


@dataclass
class PipelineResult:
    tubes: list[Tube]
    label_maps: list[np.ndarray]
    priors: list[list[np.ndarray]] = field(repr=False)
    energy: float
    timings: dict[str, float]
    total_time: float

    def manifest(self) -> dict:
        return {
            "num_frames": len(self.label_maps),
            "labels": {
                str(i + 1): {
                    "category": t.category,
                    "path_score": t.path_score,
                    "start": t.start,
                    "end": t.end,
                }
                for i, t in enumerate(self.tubes)
            },
        }

    def report(self) -> dict:
        return {
            "stages": dict(self.timings),
            "total": self.total_time,
            "num_tubes": len(self.tubes),
            "energy": self.energy,
        }


class _Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0


class _SerialExecutor:
    def map(self, fn, items):
        return map(fn, items)


def track(inputs: VideoInputs, cfg: PipelineConfig = PipelineConfig(), timer: _Timer | None = None, executor=None):
    """Tube extraction, densification and suppression."""
    timer = timer or _Timer()
    executor = executor or _SerialExecutor()
    with timer.stage("graph"):
        ctx = SimilarityContext(inputs.images, inputs.flows)
        graph = build_link_graph(inputs.detections, ctx, cfg.similarity, cfg.lookahead, executor=executor)
    with timer.stage("longest_path"):
        tubes = extract_tubes(
            graph.detections, ctx, cfg.similarity, cfg.tube_threshold, cfg.max_tubes, graph=graph
        )
    with timer.stage("build_tube"):
        tubes = [interpolate_tube(t, inputs.images, cfg.similarity.search_radius) for t in tubes]
        tubes = tube_nms(tubes, cfg.nms_threshold)
    return tubes


def run_pipeline(inputs: VideoInputs, cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    inputs.validate()
    timer = _Timer()
    t_start = time.perf_counter()
    pool = None if cfg.single_thread else ThreadPoolExecutor(cfg.workers)
    executor = pool or _SerialExecutor()
    try:
        result = _run(inputs, cfg, timer, executor)
    finally:
        if pool is not None:
            pool.shutdown()
    total = time.perf_counter() - t_start
    tubes, maps, priors, energy = result
    return PipelineResult(tubes, maps, priors, energy, timer.timings, total)


def _run(inputs: VideoInputs, cfg: PipelineConfig, timer: _Timer, executor):
    images, flows = inputs.images, inputs.flows
    n = len(images)
    H, W = images[0].height, images[0].width
    tubes = track(inputs, cfg, timer, executor)
    log.info("%d tubes after suppression", len(tubes))

    with timer.stage("io_maps"):
        def io_map(t):
            if t >= n - 1:
                return np.zeros((H, W))
            return inside_outside_map(motion_boundaries(flows[t], cfg.motion), cfg.motion)

        io_maps = list(executor.map(io_map, range(n)))

    with timer.stage("grabcuts"):
        jobs = [(i, f, b) for i, tube in enumerate(tubes) for f, b in zip(tube.frames, tube.boxes)]
        fg = list(executor.map(lambda job: grabcut_box(images[job[1]], job[2], cfg.grabcut, cfg.seed), jobs))
        evidence: list[list[np.ndarray | None]] = [[None] * n for _ in tubes]
        for (i, f, b), mask in zip(jobs, fg):
            evidence[i][f] = np.maximum(restrict_map(io_maps[f], b), mask)

    with timer.stage("priors"):
        def prior(i):
            tube = tubes[i]
            per_frame = [e if e is not None else np.zeros((H, W)) for e in evidence[i]]
            return propagate_prior(per_frame, flows, (tube.start, tube.end), cfg.motion)

        priors = list(executor.map(prior, range(len(tubes))))

    with timer.stage("merge"):
        tubes, priors, members = merge_tube_groups(tubes, priors, cfg.merge_threshold)
        merged_evidence = []
        for group in members:
            seq = []
            for t in range(n):
                parts = [evidence[i][t] for i in group if evidence[i][t] is not None]
                seq.append(np.maximum.reduce(parts) if parts else None)
            merged_evidence.append(seq)

    with timer.stage("appearance"):
        models, background = build_appearance_models(
            merged_evidence, images, [t.as_dict() for t in tubes], cfg.grabcut.gmm_components, cfg.seed
        )

    with timer.stage("pairwise"):
        graph = build_superpixel_graph(inputs.label_maps, images, flows, cfg.graph)

    with timer.stage("unary"):
        unary = unary_potentials(graph, priors, models, background, images, cfg.graph)

    with timer.stage("mrf"):
        init = np.argmin(unary, axis=1)
        if not tubes:
            labels = np.zeros(graph.num_nodes, dtype=np.int64)
        elif cfg.solver == "expansion":
            labels = solve_alpha_expansion(graph.potts(), unary, init)
        elif cfg.solver == "icm":
            labels = solve_icm(graph.potts(), unary, init)
        else:
            labels = solve_bruteforce(graph.potts(), unary)
        energy = potts_energy(graph.potts(), unary, labels)
        maps = labels_to_maps(graph, labels)
    return tubes, maps, priors, energy


# ---------------------------------------------------------------- scene directories


def _numbered(directory: Path, suffixes: Sequence[str]) -> list[Path]:
    if not directory.is_dir():
        return []
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in suffixes)


def load_inputs(scene_dir) -> VideoInputs:
    root = Path(scene_dir)
    frame_paths = _numbered(root / "frames", (".ppm", ".png"))
    if not frame_paths:
        raise InputError(f"no frames found in {root / 'frames'}")
    images = [tio.read_image(p) for p in frame_paths]
    flows = []
    for t in range(len(images) - 1):
        p = root / "flow" / f"{t:04d}.flo"
        if not p.exists():
            raise InputError(f"missing flow for frame {t}: {p}")
        flows.append(tio.read_flo(p.read_bytes()))
    maps = []
    for t in range(len(images)):
        p = root / "superpixels" / f"{t:04d}.pgm"
        if not p.exists():
            raise InputError(f"missing superpixels for frame {t}: {p}")
        maps.append(tio.read_label_map(p))
    det_path = root / "detections.csv"
    detections = tio.read_detections(det_path.read_text()) if det_path.exists() else []
    return VideoInputs(images, flows, maps, detections)


def write_scene(scene: SyntheticScene, out_dir) -> Path:
    root = Path(out_dir)
    for sub in ("frames", "flow", "superpixels", "gt"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for t, img in enumerate(scene.frames):
        (root / "frames" / f"{t:04d}.ppm").write_bytes(tio.write_ppm(img))
        (root / "superpixels" / f"{t:04d}.pgm").write_bytes(tio.write_pgm(scene.superpixels[t], sixteen_bit=True))
    for t, f in enumerate(scene.flows):
        (root / "flow" / f"{t:04d}.flo").write_bytes(tio.write_flo(f))
    for t, m in enumerate(scene.label_maps()):
        (root / "gt" / f"{t:04d}.pgm").write_bytes(tio.write_pgm(m))
    (root / "detections.csv").write_text(tio.write_detections(scene.detections))
    gt_meta = {"labels": {str(i + 1): c for i, c in enumerate(scene.categories)}, "flags": scene.flags}
    (root / "gt.json").write_text(json.dumps(gt_meta, indent=2))
    return root


def read_label_dir(directory) -> list[np.ndarray]:
    paths = _numbered(Path(directory), (".pgm",))
    return [tio.read_pgm(p.read_bytes()) for p in paths if p.stem.isdigit() or p.stem.startswith("mask_")]


def write_result(result: PipelineResult, out_dir) -> Path:
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    for t, m in enumerate(result.label_maps):
        (root / f"mask_{t:04d}.pgm").write_bytes(tio.write_pgm(m))
    (root / "manifest.json").write_text(json.dumps(result.manifest(), indent=2, sort_keys=True))
    (root / "tubes.json").write_text(json.dumps(tubes_to_json(result.tubes), indent=2))
    return root


def tubes_to_json(tubes: Sequence[Tube]) -> list[dict]:
    return [
        {
            "category": t.category,
            "path_score": t.path_score,
            "frames": list(t.frames),
            "boxes": [list(b.as_tuple()) for b in t.boxes],
            "interpolated": list(t.interpolated),
        }
        for t in tubes
    ]
