"""Spatio-temporal superpixel graph, Potts energy terms and tube fusion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import FlowField, Image, InputError, round_half_up
from .foreground import Gmm, gmm_score
from .tubes import Tube

PRIOR_FLOOR = 1e-4


@dataclass(frozen=True)
class GraphConfig:
    sigma_color: float = 30.0
    spatial_weight: float = 1.0
    temporal_weight: float = 2.0
    prior_floor: float = PRIOR_FLOOR

    def __post_init__(self):
        if self.sigma_color <= 0:
            raise ValueError("sigma_color must be positive")
        if self.spatial_weight < 0 or self.temporal_weight < 0:
            raise ValueError("edge weights must be non-negative")
        if not 0 < self.prior_floor < 1:
            raise ValueError("prior_floor must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class Superpixel:
    id: int
    frame: int
    local_label: int
    pixels: np.ndarray  # flat indices into the frame
    centroid: tuple[float, float]
    mean_color: tuple[float, float, float]

    @property
    def area(self) -> int:
        return len(self.pixels)


@dataclass
class PottsGraph:
    """Bare Potts instance: node count plus weighted undirected edges."""

    num_nodes: int
    edge_index: np.ndarray  # (m, 2) int
    edge_weight: np.ndarray  # (m,) float, >= 0

    def __post_init__(self):
        self.edge_index = np.asarray(self.edge_index, dtype=np.int64).reshape(-1, 2)
        self.edge_weight = np.asarray(self.edge_weight, dtype=np.float64).reshape(-1)
        if len(self.edge_index) != len(self.edge_weight):
            raise ValueError("one weight per edge required")
        if (self.edge_weight < 0).any():
            raise ValueError("Potts weights must be non-negative")


@dataclass
class SuperpixelVideoGraph:
    nodes: list[Superpixel]
    spatial_edges: list[tuple[int, int, float]]
    temporal_edges: list[tuple[int, int, float]]
    node_maps: list[np.ndarray] = field(repr=False)  # per frame: pixel -> global node id

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def edge_index(self) -> np.ndarray:
        e = [(a, b) for a, b, _ in self.spatial_edges + self.temporal_edges]
        return np.array(e, dtype=np.int64).reshape(-1, 2)

    @property
    def edge_weight(self) -> np.ndarray:
        return np.array([w for _, _, w in self.spatial_edges + self.temporal_edges], dtype=np.float64)

    def potts(self) -> PottsGraph:
        return PottsGraph(self.num_nodes, self.edge_index, self.edge_weight)

    def frame_nodes(self, t: int) -> np.ndarray:
        return np.unique(self.node_maps[t])


def _pair_counts(a: np.ndarray, b: np.ndarray):
    """Unique ``(a, b)`` pairs with multiplicities."""
    if len(a) == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)
    pairs, counts = np.unique(np.stack([a, b], axis=1), axis=0, return_counts=True)
    return pairs, counts


def build_superpixel_graph(
    label_maps: Sequence[np.ndarray],
    images: Sequence[Image],
    flows: Sequence[FlowField],
    cfg: GraphConfig = GraphConfig(),
) -> SuperpixelVideoGraph:
    if len(label_maps) != len(images):
        raise InputError(f"{len(label_maps)} label maps for {len(images)} frames")
    if len(label_maps) > 1 and len(flows) < len(label_maps) - 1:
        raise InputError(f"{len(label_maps)} frames need {len(label_maps) - 1} flow fields, got {len(flows)}")
    nodes: list[Superpixel] = []
    node_maps = []
    for t, (lab, img) in enumerate(zip(label_maps, images)):
        lab = np.asarray(lab)
        if lab.shape != (img.height, img.width):
            raise InputError(f"frame {t}: label map {lab.shape} vs image {(img.height, img.width)}")
        local, inverse = np.unique(lab, return_inverse=True)
        inverse = inverse.reshape(lab.shape)
        offset = len(nodes)
        node_maps.append(inverse + offset)
        flat = inverse.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.searchsorted(flat[order], np.arange(len(local) + 1))
        colors = img.pixels.reshape(-1, 3).astype(np.float64)
        w = lab.shape[1]
        for k, label in enumerate(local):
            pix = order[bounds[k] : bounds[k + 1]]
            ys, xs = np.divmod(pix, w)
            nodes.append(
                Superpixel(
                    id=offset + k,
                    frame=t,
                    local_label=int(label),
                    pixels=pix,
                    centroid=(float(xs.mean()), float(ys.mean())),
                    mean_color=tuple(colors[pix].mean(axis=0)),
                )
            )
    mean_colors = np.array([n.mean_color for n in nodes]).reshape(-1, 3)
    areas = np.array([n.area for n in nodes])

    spatial = []
    for nm in node_maps:
        a = np.concatenate([nm[:, :-1].ravel(), nm[:-1, :].ravel()])
        b = np.concatenate([nm[:, 1:].ravel(), nm[1:, :].ravel()])
        diff = a != b
        lo, hi = np.minimum(a[diff], b[diff]), np.maximum(a[diff], b[diff])
        pairs, counts = _pair_counts(lo, hi)
        for (u, v), length in zip(pairs, counts):
            d2 = float(((mean_colors[u] - mean_colors[v]) ** 2).sum())
            lam = cfg.spatial_weight * np.exp(-d2 / (2.0 * cfg.sigma_color**2)) * length
            spatial.append((int(u), int(v), float(lam)))

    temporal = []
    for t in range(len(node_maps) - 1):
        f = flows[t]
        src, dst = node_maps[t], node_maps[t + 1]
        if (f.height, f.width) != src.shape:
            raise InputError(f"flow for frame {t} has size {f.width}x{f.height}")
        ys, xs = np.mgrid[0 : f.height, 0 : f.width]
        tx = round_half_up(xs + f.u)
        ty = round_half_up(ys + f.v)
        ok = (tx >= 0) & (tx < f.width) & (ty >= 0) & (ty < f.height)
        pairs, counts = _pair_counts(src[ok], dst[ty[ok], tx[ok]])
        for (u, v), c in zip(pairs, counts):
            temporal.append((int(u), int(v), float(cfg.temporal_weight * c / areas[u])))
    return SuperpixelVideoGraph(nodes, spatial, temporal, node_maps)


def _node_means(graph: SuperpixelVideoGraph, t: int, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean of a per-pixel array over each node of frame ``t``; returns ``(ids, means)``."""
    nm = graph.node_maps[t].ravel()
    lo = nm.min()
    sums = np.bincount(nm - lo, weights=values.ravel())
    counts = np.bincount(nm - lo)
    ids = np.nonzero(counts)[0]
    return ids + lo, sums[ids] / counts[ids]


def unary_potentials(
    graph: SuperpixelVideoGraph,
    priors: Sequence[Sequence[np.ndarray]],
    models: Sequence[Gmm],
    background: Gmm,
    images: Sequence[Image],
    cfg: GraphConfig = GraphConfig(),
) -> np.ndarray:
    """``(num_nodes, K + 1)`` cost table; column 0 is the background.

    Location cost is ``-log`` of the node-averaged prior (background prior is
    one minus the strongest object prior), floored.  Appearance cost is the
    negated node-averaged log density, shifted so each row's minimum is 0.
    """
    k = len(priors)
    if len(models) != k:
        raise InputError(f"{k} object priors but {len(models)} appearance models")
    n_frames = len(graph.node_maps)
    for i, p in enumerate(priors):
        if len(p) != n_frames:
            raise InputError(f"prior for object {i + 1} covers {len(p)} of {n_frames} frames")
    all_models = [background, *models]
    loc = np.zeros((graph.num_nodes, k + 1))
    app = np.zeros((graph.num_nodes, k + 1))
    for t in range(n_frames):
        shape = graph.node_maps[t].shape
        stack = np.stack([np.asarray(p[t], dtype=np.float64) for p in priors]) if k else np.zeros((0, *shape))
        bg_prior = 1.0 - stack.max(axis=0) if k else np.ones(shape)
        layers = [bg_prior, *stack]
        x = images[t].pixels.reshape(-1, 3)
        for j, (layer, model) in enumerate(zip(layers, all_models)):
            ids, mean_prior = _node_means(graph, t, layer)
            loc[ids, j] = -np.log(np.maximum(mean_prior, cfg.prior_floor))
            ids, mean_ll = _node_means(graph, t, gmm_score(model, x).reshape(shape))
            app[ids, j] = -mean_ll
    app -= app.min(axis=1, keepdims=True)
    return np.maximum(loc, 0.0) + app


def potts_energy(graph, unary: np.ndarray, labels) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    n = graph.num_nodes
    if labels.shape != (n,):
        raise ValueError(f"labelling has shape {labels.shape}, expected ({n},)")
    if n and (labels.min() < 0 or labels.max() >= unary.shape[1]):
        raise ValueError("label out of range")
    e = float(unary[np.arange(n), labels].sum())
    ei = graph.edge_index
    if len(ei):
        e += float(graph.edge_weight[labels[ei[:, 0]] != labels[ei[:, 1]]].sum())
    return e


def labels_to_maps(graph: SuperpixelVideoGraph, labels) -> list[np.ndarray]:
    labels = np.asarray(labels)
    return [labels[nm].astype(np.uint8) for nm in graph.node_maps]


def prior_correlation(p: Sequence[np.ndarray], q: Sequence[np.ndarray]) -> float:
    """Cosine similarity of two prior sequences over frames where both are non-zero."""
    shared = [t for t in range(min(len(p), len(q))) if np.any(p[t]) and np.any(q[t])]
    if not shared:
        return 0.0
    a = np.concatenate([np.ravel(p[t]) for t in shared]).astype(np.float64)
    b = np.concatenate([np.ravel(q[t]) for t in shared]).astype(np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _fuse(tubes: Sequence[Tube]) -> Tube:
    if len(tubes) == 1:
        return tubes[0]
    boxes: dict = {}
    detected: dict = {}
    for t in tubes:
        for f, b, interp in zip(t.frames, t.boxes, t.interpolated):
            boxes[f] = b if f not in boxes else boxes[f].union_box(b)
            detected[f] = detected.get(f, False) or not interp
    frames = tuple(sorted(boxes))
    return Tube(
        category=tubes[0].category,
        frames=frames,
        boxes=tuple(boxes[f] for f in frames),
        interpolated=tuple(not detected[f] for f in frames),
        path_score=max(t.path_score for t in tubes),
        detections=tuple(d for t in tubes for d in t.detections),
    )


def merge_tube_groups(
    tubes: Sequence[Tube], priors: Sequence[Sequence[np.ndarray]], threshold: float = 0.5
) -> tuple[list[Tube], list[list[np.ndarray]], list[list[int]]]:
    """Like :func:`merge_tubes`, also returning the input indices behind each output tube."""
    if len(tubes) != len(priors):
        raise InputError(f"{len(tubes)} tubes but {len(priors)} priors")
    tubes = list(tubes)
    priors = [list(p) for p in priors]
    members = [[i] for i in range(len(tubes))]
    while True:
        n = len(tubes)
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(n):
            for j in range(i + 1, n):
                if tubes[i].category != tubes[j].category or find(i) == find(j):
                    continue
                if prior_correlation(priors[i], priors[j]) >= threshold:
                    ri, rj = find(i), find(j)
                    parent[max(ri, rj)] = min(ri, rj)
        groups: dict[int, list[int]] = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(i)
        if len(groups) == n:
            return tubes, priors, members
        new_tubes, new_priors, new_members = [], [], []
        for root in sorted(groups):
            g = groups[root]
            new_tubes.append(_fuse([tubes[i] for i in g]))
            new_priors.append([np.maximum.reduce([priors[i][t] for i in g]) for t in range(len(priors[root]))])
            new_members.append(sorted(k for i in g for k in members[i]))
        tubes, priors, members = new_tubes, new_priors, new_members


def merge_tubes(
    tubes: Sequence[Tube], priors: Sequence[Sequence[np.ndarray]], threshold: float = 0.5
) -> tuple[list[Tube], list[list[np.ndarray]]]:
    """Fuse same-class tubes whose priors correlate at ``>= threshold``.

    Fusion is transitive and repeated until no pair qualifies, so applying
    the function to its own output changes nothing.  Fused priors are the
    pixelwise max; fused boxes are per-frame box unions.  A fused tube sits
    at the position of its first member.
    """
    merged, merged_priors, _ = merge_tube_groups(tubes, priors, threshold)
    return merged, merged_priors
