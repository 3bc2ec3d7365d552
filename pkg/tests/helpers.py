"""Shared builders and brute-force oracles for the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np

from tubeseg.core import BoundingBox, Detection, FlowField, Image
from tubeseg.segmentation import PottsGraph
from tubeseg.tubes import LinkGraph, Tube


def box(x0, y0, x1, y1) -> BoundingBox:
    return BoundingBox(x0, y0, x1, y1)


def det(frame, b=(0, 0, 10, 10), score=1.0, category="car") -> Detection:
    return Detection(frame, BoundingBox(*b), score, category)


def solid_image(width, height, color=(0, 0, 0)) -> Image:
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[:] = color
    return Image(px)


def textured_image(width, height, seed=0) -> Image:
    rng = np.random.default_rng(seed)
    return Image(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def shift_image(img: Image, dx: int, dy: int, fill=0) -> Image:
    """Content moves by (dx, dy); uncovered pixels get ``fill``."""
    src = img.pixels
    out = np.full_like(src, fill)
    h, w = src.shape[:2]
    ys, yd = (slice(0, h - dy), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
    xs, xd = (slice(0, w - dx), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
    out[yd, xd] = src[ys, xs]
    return Image(out)


def moving_rect_flow(width, height, b: BoundingBox, du, dv) -> FlowField:
    u = np.zeros((height, width))
    v = np.zeros((height, width))
    u[b.slices()] = du
    v[b.slices()] = dv
    return FlowField(u, v)


def make_tube(frames, boxes, category="car", score=1.0, interpolated=None) -> Tube:
    boxes = tuple(BoundingBox(*b) if not isinstance(b, BoundingBox) else b for b in boxes)
    return Tube(
        category,
        tuple(frames),
        boxes,
        tuple(interpolated) if interpolated is not None else (False,) * len(frames),
        score,
    )


# ------------------------------------------------------------------ DAG oracles


def random_link_graph(rng: np.random.Generator, n: int, values=None) -> LinkGraph:
    """Random detections over a handful of frames with random forward edges.

    ``values`` restricts weights and scores to a small exact set so that ties
    actually happen; roughly a third of the candidate edges are ``-inf``.
    """
    frames = np.sort(rng.integers(0, max(2, n // 2 + 1), n))
    pick = (lambda: float(rng.choice(values))) if values is not None else (lambda: float(rng.random()))
    dets = [Detection(int(f), BoundingBox(0, 0, 4, 4), pick() if values is None else min(pick(), 1.0), "car")
            for f in frames]
    weights = {}
    for i in range(n):
        for j in range(i + 1, n):
            if dets[j].frame > dets[i].frame and rng.random() < 0.7:
                weights[(i, j)] = -math.inf if rng.random() < 0.33 else pick()
    return LinkGraph.from_weights(dets, weights)


def all_paths(g: LinkGraph, removed=frozenset()):
    """Every non-empty source-to-sink path as (nodes, score), score summed left to right."""
    out = []

    def walk(nodes, score):
        out.append((tuple(nodes), score))
        for j, w in g.succ[nodes[-1]]:
            if j not in removed:
                walk(nodes + [j], score + w)

    for i in range(len(g.detections)):
        if i not in removed:
            walk([i], g.source[i])
    return out


def exhaustive_longest_path(g: LinkGraph, removed=frozenset()):
    """Best path under: max score, earlier start, more nodes, lexicographically smaller."""
    paths = all_paths(g, removed)
    if not paths:
        return (), 0.0
    best = min(paths, key=lambda p: (-p[1], g.detections[p[0][0]].frame, -len(p[0]), p[0]))
    return best


# --------------------------------------------------------------- Potts oracles


def random_potts(rng: np.random.Generator, n: int, n_labels: int, density=0.4):
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < density]
    weights = rng.uniform(0, 2, len(edges))
    graph = PottsGraph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), weights)
    unary = rng.uniform(0, 3, (n, n_labels))
    return graph, unary


def energy_by_loops(graph, unary, labels) -> float:
    """Independent re-implementation of the Potts energy."""
    e = 0.0
    for v in range(graph.num_nodes):
        e += float(unary[v][labels[v]])
    for (a, b), w in zip(graph.edge_index, graph.edge_weight):
        if labels[a] != labels[b]:
            e += float(w)
    return e


def enumerate_min_energy(graph, unary) -> float:
    n, k = unary.shape
    return min(energy_by_loops(graph, unary, lab) for lab in itertools.product(range(k), repeat=n))
