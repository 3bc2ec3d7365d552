"""Deterministic synthetic videos with exact flow and scripted detections."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import BoundingBox, Detection, FlowField, Image

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectSpec:
    category: str
    color: tuple[int, int, int]
    size: tuple[int, int]  # width, height
    start: tuple[int, int]  # top-left x, y in frame 0
    velocity: tuple[int, int] = (0, 0)  # pixels per frame
    texture: float = 20.0  # amplitude of the object's own texture


@dataclass(frozen=True)
class SceneSpec:
    width: int = 64
    height: int = 48
    frames: int = 10
    objects: tuple[ObjectSpec, ...] = ()
    background: tuple[int, int, int] = (90, 110, 90)
    background_texture: float = 12.0
    jitter: int = 0
    dropout: float = 0.0
    false_positive_rate: float = 0.0
    detection_score: float = 0.9
    superpixel_cell: int = 2
    seed: int = 0


@dataclass
class SyntheticScene:
    spec: SceneSpec
    frames: list[Image]
    masks: list[list[np.ndarray]]  # masks[i][t]: visible pixels of object i
    flows: list[FlowField]  # flows[t]: frame t -> t + 1
    detections: list[Detection]
    superpixels: list[np.ndarray]
    gt_boxes: list[dict[int, BoundingBox]]  # full (unoccluded) object box per frame
    flags: list[str] = field(default_factory=list)

    @property
    def categories(self) -> list[str]:
        return [o.category for o in self.spec.objects]

    def label_maps(self) -> list[np.ndarray]:
        """Indexed ground truth: 0 background, ``i + 1`` for object ``i``."""
        out = []
        for t in range(len(self.frames)):
            m = np.zeros((self.spec.height, self.spec.width), dtype=np.uint8)
            for i, masks in enumerate(self.masks):
                m[masks[t] > 0] = i + 1
            out.append(m)
        return out


def grid_superpixels(width: int, height: int, cell: int) -> np.ndarray:
    """Regular square cells numbered in row-major order."""
    if cell < 1:
        raise ValueError("cell size must be >= 1")
    ys, xs = np.mgrid[0:height, 0:width]
    per_row = -(-width // cell)
    return (ys // cell) * per_row + xs // cell


def _clip_box(x0, y0, x1, y1, width, height) -> BoundingBox | None:
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, width), min(y1, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return BoundingBox(x0, y0, x1, y1)


def synthesize_scene(spec: SceneSpec) -> SyntheticScene:
    rng = np.random.default_rng(spec.seed)
    W, H, T = spec.width, spec.height, spec.frames
    bg = np.clip(
        np.array(spec.background, dtype=np.float64) + rng.uniform(-1, 1, (H, W, 1)) * spec.background_texture,
        0,
        255,
    )
    textures = [
        rng.uniform(-1, 1, (o.size[1], o.size[0], 1)) * o.texture for o in spec.objects
    ]

    flags = []
    for i, a in enumerate(spec.objects):
        for b in spec.objects[i + 1 :]:
            if a.color == b.color:
                flags.append(f"objects share colour {a.color}; they may overlap indistinguishably")
    for f in flags:
        log.warning(f)

    frames, flows = [], []
    masks = [[] for _ in spec.objects]
    gt_boxes: list[dict[int, BoundingBox]] = [{} for _ in spec.objects]
    for t in range(T):
        img = bg.copy()
        u = np.zeros((H, W))
        v = np.zeros((H, W))
        owner = np.full((H, W), -1)
        for i, (o, tex) in enumerate(zip(spec.objects, textures)):
            x0 = o.start[0] + o.velocity[0] * t
            y0 = o.start[1] + o.velocity[1] * t
            box = _clip_box(x0, y0, x0 + o.size[0], y0 + o.size[1], W, H)
            if box is None:
                continue
            gt_boxes[i][t] = box
            ry, rx = box.slices()
            local = tex[ry.start - y0 : ry.stop - y0, rx.start - x0 : rx.stop - x0]
            img[box.slices()] = np.clip(np.array(o.color, dtype=np.float64) + local, 0, 255)
            u[box.slices()] = o.velocity[0]
            v[box.slices()] = o.velocity[1]
            owner[box.slices()] = i
        frames.append(Image(np.round(img).astype(np.uint8)))
        for i in range(len(spec.objects)):
            masks[i].append((owner == i).astype(np.float64))
        if t < T - 1:
            flows.append(FlowField(u, v))

    detections = []
    for t in range(T):
        for i, o in enumerate(spec.objects):
            box = gt_boxes[i].get(t)
            if box is None or masks[i][t].sum() == 0:
                continue
            if spec.dropout and rng.random() < spec.dropout:
                continue
            if spec.jitter:
                j = rng.integers(-spec.jitter, spec.jitter + 1, 4)
                jittered = _clip_box(
                    box.x_min + j[0], box.y_min + j[1], box.x_max + j[2], box.y_max + j[3], W, H
                )
                box = jittered or box
            detections.append(Detection(t, box, spec.detection_score, o.category))
        if spec.false_positive_rate and rng.random() < spec.false_positive_rate and spec.objects:
            bw, bh = int(rng.integers(6, max(7, W // 3))), int(rng.integers(6, max(7, H // 3)))
            x0, y0 = int(rng.integers(0, W - bw + 1)), int(rng.integers(0, H - bh + 1))
            cat = spec.objects[int(rng.integers(len(spec.objects)))].category
            detections.append(
                Detection(t, BoundingBox(x0, y0, x0 + bw, y0 + bh), float(rng.uniform(0.1, 0.5)), cat)
            )

    sp = grid_superpixels(W, H, spec.superpixel_cell)
    return SyntheticScene(
        spec=spec,
        frames=frames,
        masks=masks,
        flows=flows,
        detections=detections,
        superpixels=[sp.copy() for _ in range(T)],
        gt_boxes=gt_boxes,
        flags=flags,
    )


def translating_object_scene(seed: int = 0, frames: int = 10, **kw) -> SceneSpec:
    """One textured red box moving right over a textured green background."""
    obj = ObjectSpec("car", (200, 40, 40), (16, 12), (8, 18), (2, 0))
    return SceneSpec(frames=frames, objects=(obj,), seed=seed, **kw)


def crossing_objects_scene(seed: int = 0, frames: int = 16, **kw) -> SceneSpec:
    """Two same-class boxes of different colour passing each other."""
    a = ObjectSpec("car", (210, 40, 40), (14, 10), (2, 14), (3, 0))
    b = ObjectSpec("car", (40, 60, 220), (14, 10), (48, 22), (-3, 0))
    return SceneSpec(width=64, height=48, frames=frames, objects=(a, b), seed=seed, **kw)
