"""Colour models and box-level foreground extraction.

``fit_gmm`` is plain EM over RGB samples with a covariance eigenvalue floor.
The floored M-step is still the constrained maximiser, so the data
log-likelihood never decreases.  ``grabcut_box`` alternates model refits
(warm-started EM) with an exact binary graph cut, which makes its energy
non-increasing as well.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .core import BoundingBox, Image, check_box_in_frame
from .maxflow import FlowGraph

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1.0
UNIFORM_LOG_DENSITY = -3.0 * math.log(256.0)
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GrabcutConfig:
    iterations: int = 5
    gmm_components: int = 5
    pairwise_gamma: float = 50.0
    shrink_margin: float = 0.1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.gmm_components < 1:
            raise ValueError("gmm_components must be >= 1")
        if self.pairwise_gamma <= 0:
            raise ValueError("pairwise_gamma must be positive")
        if not 0.0 <= self.shrink_margin < 0.5:
            raise ValueError("shrink_margin must lie in [0, 0.5)")


@dataclass(frozen=True, eq=False)
class Gmm:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    degenerate: bool = False
    trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return len(self.weights)

    @classmethod
    def uniform(cls) -> Gmm:
        """Flat density over the RGB cube; stands in when there is no evidence."""
        return cls(np.ones(1), np.full((1, 3), 127.5), np.eye(3)[None] * VARIANCE_FLOOR, degenerate=True)

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """``(N, K)`` array of ``log w_k + log N(x | mu_k, Sigma_k)``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.empty((len(x), self.k))
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        for j in range(self.k):
            chol = np.linalg.cholesky(self.covs[j])
            z = np.linalg.solve(chol, (x - self.means[j]).T)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            out[:, j] = logw[j] - 0.5 * (3 * _LOG_2PI + logdet + (z * z).sum(axis=0))
        return out


def floor_covariance(cov: np.ndarray, floor: float = VARIANCE_FLOOR) -> np.ndarray:
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def gmm_score(g: Gmm, pixel) -> np.ndarray | float:
    """Log mixture density at one RGB triple (float) or at each row of ``(N, 3)``."""
    x = np.asarray(pixel, dtype=np.float64)
    single = x.ndim == 1
    if g.degenerate:
        out = np.full(len(np.atleast_2d(x)), UNIFORM_LOG_DENSITY)
    else:
        out = logsumexp(g.component_log_densities(x), axis=1)
    return float(out[0]) if single else out


def responsibilities(g: Gmm, x: np.ndarray) -> np.ndarray:
    lp = g.component_log_densities(x)
    return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


def _kmeanspp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        idx = rng.choice(len(x), p=d2 / total)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _m_step(x: np.ndarray, resp: np.ndarray, prev: Gmm | None) -> Gmm:
    nk = resp.sum(axis=0)
    n = len(x)
    k = resp.shape[1]
    means = np.empty((k, 3))
    covs = np.empty((k, 3, 3))
    for j in range(k):
        if nk[j] <= 1e-12:
            # no support: weight 0, parameters irrelevant but kept valid
            means[j] = prev.means[j] if prev is not None else x.mean(axis=0)
            covs[j] = prev.covs[j] if prev is not None else np.eye(3) * VARIANCE_FLOOR
            continue
        means[j] = resp[:, j] @ x / nk[j]
        d = x - means[j]
        covs[j] = floor_covariance((resp[:, j, None] * d).T @ d / nk[j])
    return Gmm(nk / n, means, covs)


def fit_gmm(
    pixels,
    k: int = 5,
    seed: int = 0,
    init: Gmm | None = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> Gmm:
    """EM fit of a ``k``-component RGB mixture.

    Without ``init`` the components start from k-means++ seeding.  ``k`` is
    reduced to the number of distinct samples when that is smaller.  The
    returned model carries the total log-likelihood before every M-step and
    after the last one in ``trace``.
    """
    x = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if len(x) == 0:
        raise ValueError("cannot fit a mixture to zero samples")
    if init is not None and not init.degenerate:
        g = init
    else:
        distinct = len(np.unique(x, axis=0)) if k > 1 else 1
        k_eff = max(1, min(k, distinct))
        rng = np.random.default_rng(seed)
        centers = _kmeanspp_centers(x, k_eff, rng)
        d2 = ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)
        resp = np.zeros((len(x), len(centers)))
        resp[np.arange(len(x)), d2.argmin(axis=1)] = 1.0
        g = _m_step(x, resp, None)

    trace = []
    prev_ll = None
    for _ in range(max_iter):
        lp = g.component_log_densities(x)
        norm = logsumexp(lp, axis=1, keepdims=True)
        ll = float(norm.sum())
        trace.append(ll)
        if prev_ll is not None and abs(ll - prev_ll) < tol * abs(prev_ll):
            break
        prev_ll = ll
        g = _m_step(x, np.exp(lp - norm), g)
    else:
        trace.append(float(logsumexp(g.component_log_densities(x), axis=1).sum()))
    return Gmm(g.weights, g.means, g.covs, trace=tuple(trace))


def pairwise_beta(patch: np.ndarray) -> float:
    """``1 / (2 * mean squared colour difference)`` over 4-neighbour pairs; 0 if flat."""
    p = patch.astype(np.float64)
    diffs = []
    if p.shape[1] > 1:
        diffs.append(((p[:, 1:] - p[:, :-1]) ** 2).sum(axis=2).ravel())
    if p.shape[0] > 1:
        diffs.append(((p[1:] - p[:-1]) ** 2).sum(axis=2).ravel())
    if not diffs:
        return 0.0
    mean = np.concatenate(diffs).mean()
    return 0.0 if mean <= 0 else 1.0 / (2.0 * mean)


def shrink_box(box: BoundingBox, margin: float) -> BoundingBox:
    mx = int(margin * box.width)
    my = int(margin * box.height)
    x0, y0, x1, y1 = box.x_min + mx, box.y_min + my, box.x_max - mx, box.y_max - my
    if x1 <= x0:
        x0 = (box.x_min + box.x_max - 1) // 2
        x1 = x0 + 1
    if y1 <= y0:
        y0 = (box.y_min + box.y_max - 1) // 2
        y1 = y0 + 1
    return BoundingBox(x0, y0, x1, y1)


def background_band(box: BoundingBox, width: int, height: int) -> np.ndarray:
    """Boolean mask of a ring around ``box`` holding about as many pixels as the box.

    The ring is clipped at the frame border and widened until it is large
    enough or covers the whole frame.
    """
    band = np.zeros((height, width), dtype=bool)
    for b in range(1, max(width, height) + 1):
        x0, y0 = max(box.x_min - b, 0), max(box.y_min - b, 0)
        x1, y1 = min(box.x_max + b, width), min(box.y_max + b, height)
        ring = (x1 - x0) * (y1 - y0) - box.area
        if ring >= box.area or (x0 == 0 and y0 == 0 and x1 == width and y1 == height):
            band[y0:y1, x0:x1] = True
            band[box.slices()] = False
            return band
    return band


@dataclass
class GrabcutResult:
    mask: np.ndarray
    init_mask: np.ndarray
    energies: list[float]
    fallback: bool


class _BoxProblem:
    """Pixel graph over a box: neighbour weights and the energy functional."""

    def __init__(self, img: Image, box: BoundingBox, band: np.ndarray, gamma: float):
        self.box = box
        patch = img.pixels[box.slices()].astype(np.float64)
        self.patch = patch
        self.h, self.w = patch.shape[:2]
        beta = pairwise_beta(img.pixels[box.slices()])
        self.wx = gamma * np.exp(-beta * ((patch[:, 1:] - patch[:, :-1]) ** 2).sum(axis=2))
        self.wy = gamma * np.exp(-beta * ((patch[1:] - patch[:-1]) ** 2).sum(axis=2))
        # contrast-weighted links to the fixed-background pixels just outside the box
        full = img.pixels.astype(np.float64)
        H, W = full.shape[:2]
        border = np.zeros((self.h, self.w))
        y0, x0 = box.y_min, box.x_min
        for (dy, dx), edge in (((0, -1), np.s_[:, 0]), ((0, 1), np.s_[:, -1]), ((-1, 0), np.s_[0, :]), ((1, 0), np.s_[-1, :])):
            ys, xs = np.mgrid[0 : self.h, 0 : self.w]
            ys, xs = ys[edge] + y0, xs[edge] + x0
            ny, nx = ys + dy, xs + dx
            ok = (ny >= 0) & (ny < H) & (nx >= 0) & (nx < W)
            d2 = ((full[ys, xs] - full[np.clip(ny, 0, H - 1), np.clip(nx, 0, W - 1)]) ** 2).sum(axis=-1)
            border[edge] += np.where(ok, gamma * np.exp(-beta * d2), 0.0)
        self.border = border
        self.band_pixels = img.pixels[band].astype(np.float64)

    def unaries(self, fg: Gmm, bg: Gmm):
        x = self.patch.reshape(-1, 3)
        d_fg = -gmm_score(fg, x).reshape(self.h, self.w)
        d_bg = -gmm_score(bg, x).reshape(self.h, self.w)
        return d_fg, d_bg

    def energy(self, labels: np.ndarray, fg: Gmm, bg: Gmm) -> float:
        d_fg, d_bg = self.unaries(fg, bg)
        e = float(np.where(labels, d_fg, d_bg).sum())
        if len(self.band_pixels):
            e += float(-gmm_score(bg, self.band_pixels).sum())
        e += float((self.wx * (labels[:, 1:] != labels[:, :-1])).sum())
        e += float((self.wy * (labels[1:] != labels[:-1])).sum())
        e += float((self.border * labels).sum())
        return e

    def cut(self, d_fg: np.ndarray, d_bg: np.ndarray) -> np.ndarray:
        h, w = self.h, self.w
        g = FlowGraph(h * w)
        cost_fg = d_fg + self.border
        base = np.minimum(cost_fg, d_bg)
        src = (d_bg - base).ravel()
        snk = (cost_fg - base).ravel()
        for i in range(h * w):
            if src[i] or snk[i]:
                g.add_tweights(i, src[i], snk[i])
        for y in range(h):
            row = y * w
            for x in range(w - 1):
                c = self.wx[y, x]
                g.add_edge(row + x, row + x + 1, c, c)
        for y in range(h - 1):
            for x in range(w):
                c = self.wy[y, x]
                g.add_edge(y * w + x, (y + 1) * w + x, c, c)
        g.maxflow()
        return np.array([g.in_source_segment(i) for i in range(h * w)]).reshape(h, w)


def grabcut(img: Image, box: BoundingBox, cfg: GrabcutConfig = GrabcutConfig(), seed: int = 0) -> GrabcutResult:
    check_box_in_frame(box, img.width, img.height)
    H, W = img.height, img.width
    inner = shrink_box(box, cfg.shrink_margin)
    init = np.zeros((box.height, box.width), dtype=bool)
    init[inner.y_min - box.y_min : inner.y_max - box.y_min, inner.x_min - box.x_min : inner.x_max - box.x_min] = True

    band = background_band(box, W, H)
    prob = _BoxProblem(img, box, band, cfg.pairwise_gamma)
    x = prob.patch.reshape(-1, 3)

    def embed(labels):
        out = np.zeros((H, W))
        out[box.slices()] = labels
        return out

    bg_samples = prob.band_pixels if len(prob.band_pixels) else x[~init.ravel()]
    if len(bg_samples) == 0:
        return GrabcutResult(embed(init), embed(init), [], True)

    k = cfg.gmm_components
    fg = fit_gmm(x[init.ravel()], k, seed)
    bg = fit_gmm(bg_samples, k, seed)
    labels = init
    energies: list[float] = []
    fallback = False
    for it in range(cfg.iterations):
        if it > 0:
            fg_x = x[labels.ravel()]
            bg_x = np.concatenate([prob.band_pixels, x[~labels.ravel()]])
            if len(fg_x):
                fg = fit_gmm(fg_x, k, seed, init=fg)
            if len(bg_x):
                bg = fit_gmm(bg_x, k, seed, init=bg)
        d_fg, d_bg = prob.unaries(fg, bg)
        if np.abs(d_fg - d_bg).max() <= 1e-9:
            # the two models cannot tell pixels apart: keep the current labelling
            fallback = True
            break
        before = prob.energy(labels, fg, bg)
        new = prob.cut(d_fg, d_bg)
        after = prob.energy(new, fg, bg)
        changed = not np.array_equal(new, labels)
        if after <= before:
            labels = new
            energies.append(after)
        else:
            energies.append(before)
        if it > 0 and not changed:
            break
    return GrabcutResult(embed(labels), embed(init), energies, fallback)


def grabcut_box(img: Image, box: BoundingBox, cfg: GrabcutConfig = GrabcutConfig(), seed: int = 0) -> np.ndarray:
    """Binary foreground mask of the object in ``box``; zero outside the box."""
    return grabcut(img, box, cfg, seed).mask


def build_appearance_models(
    object_masks: Sequence[Sequence[np.ndarray | None]],
    images: Sequence[Image],
    tube_boxes: Sequence[dict],
    k: int = 5,
    seed: int = 0,
    max_samples: int = 100_000,
) -> tuple[list[Gmm], Gmm]:
    """Per-object colour mixtures plus one background mixture.

    ``object_masks[i][t]`` is object ``i``'s evidence in frame ``t`` (or
    ``None``).  Background samples come from pixels outside every box in
    ``tube_boxes`` (one ``{frame: BoundingBox}`` dict per tube).
    """
    rng = np.random.default_rng(seed)

    def subsample(x):
        if len(x) > max_samples:
            x = x[np.sort(rng.choice(len(x), max_samples, replace=False))]
        return x

    models = []
    for masks in object_masks:
        chunks = [images[t].pixels[m > 0.5] for t, m in enumerate(masks) if m is not None and (m > 0.5).any()]
        if not chunks:
            log.warning("object without colour evidence; using a flat model")
            models.append(Gmm.uniform())
            continue
        models.append(fit_gmm(subsample(np.concatenate(chunks).astype(np.float64)), k, seed))

    chunks = []
    for t, img in enumerate(images):
        free = np.ones((img.height, img.width), dtype=bool)
        for boxes in tube_boxes:
            b = boxes.get(t)
            if b is not None:
                free[b.slices()] = False
        chunks.append(img.pixels[free])
    bg_x = np.concatenate(chunks) if chunks else np.empty((0, 3))
    background = fit_gmm(subsample(bg_x.astype(np.float64)), k, seed) if len(bg_x) else Gmm.uniform()
    return models, background
