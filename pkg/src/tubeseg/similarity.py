"""Pairwise detection similarity used as edge weight in the linking graph.

Each term is a standalone function; :func:`composite_similarity` multiplies
the enabled ones with the detection score of the later box.  A term may veto
a link by returning ``-inf``; the composite never multiplies a vetoed value,
so the ``0 * -inf`` NaN trap cannot occur.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import correlate

from .core import (
    BoundingBox,
    ColorHistogram,
    Detection,
    FlowField,
    Image,
    InputError,
    box_center,
    check_box_in_frame,
    color_histogram,
    round_half_up,
)

NEG_INF = -math.inf
TERMS = ("score", "category", "app", "vol", "side", "match", "center")

# Relative slack when comparing NCC maxima; FFT correlation is exact only to ~1e-12.
_NCC_TIE_TOL = 1e-9


@dataclass(frozen=True)
class SimilarityConfig:
    use_score: bool = True
    use_category: bool = True
    use_app: bool = True
    use_vol: bool = True
    use_side: bool = True
    use_match: bool = True
    use_center: bool = True
    app_threshold: float = 0.8
    center_decay: float = 0.1
    search_radius: int = 32

    def __post_init__(self):
        if not 0.0 <= self.app_threshold <= 1.0:
            raise ValueError("app_threshold must lie in [0, 1]")
        if self.center_decay <= 0:
            raise ValueError("center_decay must be positive")
        if self.search_radius < 1:
            raise ValueError("search_radius must be >= 1")

    def enabled(self, term: str) -> bool:
        return getattr(self, f"use_{term}")

    @classmethod
    def only(cls, *terms: str, **kw) -> SimilarityConfig:
        """Config with just ``terms`` switched on (the "+" ablation rows)."""
        unknown = set(terms) - set(TERMS)
        if unknown:
            raise ValueError(f"unknown similarity terms {sorted(unknown)}")
        flags = {f"use_{t}": t in terms for t in TERMS}
        return cls(**flags, **kw)

    @classmethod
    def without(cls, *terms: str, **kw) -> SimilarityConfig:
        """Config with ``terms`` switched off (the "-" ablation rows)."""
        unknown = set(terms) - set(TERMS)
        if unknown:
            raise ValueError(f"unknown similarity terms {sorted(unknown)}")
        flags = {f"use_{t}": t not in terms for t in TERMS}
        return cls(**flags, **kw)


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    terms: dict = field(default_factory=dict)

    @property
    def vetoed(self) -> bool:
        return self.value == NEG_INF


def s_category(a: Detection, b: Detection) -> float:
    return 1.0 if a.category == b.category else NEG_INF


def s_vol(a: BoundingBox, b: BoundingBox) -> float:
    return min(a.area / b.area, b.area / a.area)


def s_side(a: BoundingBox, b: BoundingBox) -> float:
    h = min(a.height / b.height, b.height / a.height)
    w = min(a.width / b.width, b.width / a.width)
    return min(h, w)


def _flow_at(flows, t: int) -> FlowField:
    try:
        f = flows[t]
    except (IndexError, KeyError):
        f = None
    if f is None:
        raise InputError(f"missing optical flow for frame {t}")
    return f


def transport_pixels(xs: np.ndarray, ys: np.ndarray, flows, start: int, stop: int):
    """Carry pixel coordinates from frame ``start`` to ``stop`` along the flow.

    Every hop rounds to the nearest pixel; points leaving the frame are dropped.
    """
    for t in range(start, stop):
        f = _flow_at(flows, t)
        nx = round_half_up(xs + f.u[ys, xs])
        ny = round_half_up(ys + f.v[ys, xs])
        keep = (nx >= 0) & (nx < f.width) & (ny >= 0) & (ny < f.height)
        xs, ys = nx[keep], ny[keep]
    return xs, ys


def s_match(a: Detection, b: Detection, flows) -> float:
    if a.frame >= b.frame:
        raise InputError("s_match needs a.frame < b.frame")
    ys, xs = np.mgrid[a.box.slices()]
    xs, ys = transport_pixels(xs.ravel(), ys.ravel(), flows, a.frame, b.frame)
    inside = (xs >= b.box.x_min) & (xs < b.box.x_max) & (ys >= b.box.y_min) & (ys < b.box.y_max)
    xs, ys = xs[inside], ys[inside]
    n_matches = len(np.unique(ys * b.box.width + xs)) if len(xs) else 0
    return n_matches / b.box.area


def ncc_displacement(box: BoundingBox, img_a: Image, img_b: Image, radius: int) -> tuple[int, int]:
    """Integer shift of ``box`` into ``img_b`` with maximal normalised cross-correlation.

    Only placements fully inside ``img_b`` within ``radius`` pixels (per axis)
    are considered.  Placements over a textureless window score 0.  Ties go to
    the smallest Euclidean displacement, then to row-major order.
    """
    if img_a.pixels.shape != img_b.pixels.shape:
        raise InputError("images must have the same size")
    check_box_in_frame(box, img_a.width, img_a.height)
    h, w = box.height, box.width
    x0 = max(box.x_min - radius, 0)
    y0 = max(box.y_min - radius, 0)
    x1 = min(box.x_max + radius, img_b.width)
    y1 = min(box.y_max + radius, img_b.height)
    if x1 - x0 < w or y1 - y0 < h:
        raise InputError(f"search window for box {box.as_tuple()} lies outside the image")

    template = img_a.gray()[box.slices()]
    template = template - template.mean()
    t_energy = float((template * template).sum())

    region = img_b.gray()[y0:y1, x0:x1]
    region = region - region.mean()
    n = h * w
    num = correlate(region, template, mode="valid")
    ones = np.ones((h, w))
    s1 = correlate(region, ones, mode="valid")
    s2 = correlate(region * region, ones, mode="valid")
    var = s2 - s1 * s1 / n

    flat = var <= 1e-9 * max(float((region * region).sum()), 1.0)
    if t_energy <= 1e-9 * n:
        flat[:] = True
    ncc = np.zeros_like(num)
    ok = ~flat
    ncc[ok] = num[ok] / np.sqrt(t_energy * var[ok])

    dys = np.arange(y0, y0 + ncc.shape[0]) - box.y_min
    dxs = np.arange(x0, x0 + ncc.shape[1]) - box.x_min
    best = ncc.max()
    tol = _NCC_TIE_TOL * max(abs(best), 1.0)
    rows, cols = np.nonzero(ncc >= best - tol)
    dist = dys[rows] ** 2 + dxs[cols] ** 2
    # lexsort: last key is primary
    order = np.lexsort((cols, rows, dist))
    k = order[0]
    return int(dxs[cols[k]]), int(dys[rows[k]])


def propagate_center(a: Detection, img_a: Image, img_b: Image, cfg: SimilarityConfig) -> tuple[float, float]:
    dx, dy = ncc_displacement(a.box, img_a, img_b, cfg.search_radius)
    cx, cy = box_center(a.box)
    return (cx + dx, cy + dy)


def s_center(c_p, c, cfg: SimilarityConfig | None = None) -> float:
    decay = cfg.center_decay if cfg is not None else 0.1
    return 1.0 / (1.0 + decay * math.hypot(c_p[0] - c[0], c_p[1] - c[1]))


def cosine(h_a: ColorHistogram, h_b: ColorHistogram) -> float:
    if h_a.total <= 0 or h_b.total <= 0:
        raise InputError("cannot compare an empty colour histogram")
    a = h_a.bins.astype(np.float64)
    b = h_b.bins.astype(np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def s_app(h_a: ColorHistogram, h_b: ColorHistogram, cfg: SimilarityConfig | None = None) -> float:
    threshold = cfg.app_threshold if cfg is not None else 0.8
    c = cosine(h_a, h_b)
    return NEG_INF if c <= threshold else c


class SimilarityContext:
    """Frames and flow for one video plus caches for per-box quantities.

    ``flows[t]`` maps frame ``t`` to ``t + 1``.
    """

    def __init__(self, images: Sequence[Image] | Mapping[int, Image], flows=()):
        self.images = images
        self.flows = flows
        self._hist: dict = {}
        self._shift: dict = {}

    def image(self, t: int) -> Image:
        try:
            return self.images[t]
        except (IndexError, KeyError):
            raise InputError(f"missing image for frame {t}") from None

    def histogram(self, det: Detection) -> ColorHistogram:
        key = (det.frame, det.box)
        if key not in self._hist:
            self._hist[key] = color_histogram(self.image(det.frame), det.box)
        return self._hist[key]

    def propagated_center(self, a: Detection, frame: int, cfg: SimilarityConfig) -> tuple[float, float]:
        key = (a.frame, a.box, frame, cfg.search_radius)
        if key not in self._shift:
            self._shift[key] = propagate_center(a, self.image(a.frame), self.image(frame), cfg)
        return self._shift[key]


def composite_similarity(
    a: Detection, b: Detection, context: SimilarityContext | None, cfg: SimilarityConfig
) -> SimilarityScore:
    """Product of ``score(b)`` and every enabled term; ``-inf`` if any term vetoes.

    Terms are evaluated cheapest first and evaluation stops at the first veto,
    so ``terms`` may be partial for vetoed pairs.
    """
    if a.frame >= b.frame:
        raise InputError(f"link must go forward in time ({a.frame} -> {b.frame})")
    terms: dict[str, float] = {}

    def evaluate(name):
        if name == "score":
            return b.score
        if name == "category":
            return s_category(a, b)
        if name == "vol":
            return s_vol(a.box, b.box)
        if name == "side":
            return s_side(a.box, b.box)
        if name == "app":
            return s_app(context.histogram(a), context.histogram(b), cfg)
        if name == "center":
            c_p = context.propagated_center(a, b.frame, cfg)
            return s_center(c_p, box_center(b.box), cfg)
        if name == "match":
            return s_match(a, b, context.flows)
        raise AssertionError(name)

    value = 1.0
    for name in ("score", "category", "vol", "side", "app", "center", "match"):
        if not cfg.enabled(name):
            continue
        term = evaluate(name)
        terms[name] = term
        if term == NEG_INF:
            return SimilarityScore(NEG_INF, terms)
        value *= term
    return SimilarityScore(value, terms)
