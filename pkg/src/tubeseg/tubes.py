"""Linking detections into tubes.

Detections become nodes of a DAG whose edges point forward in time and carry
the pairwise similarity.  A virtual source enters every node with the node's
detection score and every node leaves to a virtual sink at zero cost, so the
heaviest source-sink path is the best single tube.  Tubes are peeled off one
at a time, then densified and de-duplicated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import BoundingBox, Detection, Image, round_half_up
from .similarity import NEG_INF, SimilarityConfig, SimilarityContext, composite_similarity, ncc_displacement

DEFAULT_LOOKAHEAD = 20


@dataclass
class LinkGraph:
    """Detections in frame order plus forward edges.

    ``succ[i]`` lists ``(j, weight)`` with ``j > i``; ``source[i]`` is the
    weight of the source edge into node ``i``.  Sink edges all weigh 0.
    """

    detections: list[Detection]
    source: list[float]
    succ: list[list[tuple[int, float]]]

    def __post_init__(self):
        n = len(self.detections)
        if len(self.source) != n or len(self.succ) != n:
            raise ValueError("graph arrays disagree in length")
        for i, edges in enumerate(self.succ):
            for j, w in edges:
                if not (i < j < n) or self.detections[j].frame <= self.detections[i].frame:
                    raise ValueError(f"edge {i}->{j} does not go forward in time")
                if w == NEG_INF:
                    raise ValueError(f"edge {i}->{j} has -inf weight; drop it instead")

    @property
    def num_edges(self) -> int:
        return sum(len(e) for e in self.succ)

    @classmethod
    def from_weights(cls, detections: Sequence[Detection], weights: dict) -> LinkGraph:
        """Build from explicit ``{(i, j): weight}``; ``-inf`` entries are skipped."""
        succ: list[list[tuple[int, float]]] = [[] for _ in detections]
        for (i, j), w in sorted(weights.items()):
            if w != NEG_INF:
                succ[i].append((j, float(w)))
        return cls(list(detections), [d.score for d in detections], succ)


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]
    score: float


@dataclass(frozen=True)
class Tube:
    category: str
    frames: tuple[int, ...]
    boxes: tuple[BoundingBox, ...]
    interpolated: tuple[bool, ...]
    path_score: float
    detections: tuple[Detection, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not (len(self.frames) == len(self.boxes) == len(self.interpolated)) or not self.frames:
            raise ValueError("tube needs one box and one flag per frame")
        if any(b <= a for a, b in zip(self.frames, self.frames[1:])):
            raise ValueError("tube frames must be strictly increasing")
        if self.interpolated[0] or self.interpolated[-1]:
            raise ValueError("tube must start and end on a detected box")

    @property
    def start(self) -> int:
        return self.frames[0]

    @property
    def end(self) -> int:
        return self.frames[-1]

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def is_dense(self) -> bool:
        return len(self.frames) == self.length

    def box_at(self, frame: int) -> BoundingBox | None:
        i = np.searchsorted(self.frames, frame)
        if i < len(self.frames) and self.frames[i] == frame:
            return self.boxes[i]
        return None

    def as_dict(self) -> dict[int, BoundingBox]:
        return dict(zip(self.frames, self.boxes))


def sort_detections(detections: Sequence[Detection]) -> list[Detection]:
    return sorted(detections, key=lambda d: d.frame)


def build_link_graph(
    detections: Sequence[Detection],
    context: SimilarityContext | None,
    cfg: SimilarityConfig,
    lookahead: int = DEFAULT_LOOKAHEAD,
    executor=None,
) -> LinkGraph:
    if lookahead < 1:
        raise ValueError("lookahead must be >= 1")
    dets = sort_detections(detections)
    frames = np.array([d.frame for d in dets], dtype=np.int64)
    pairs = []
    for i, d in enumerate(dets):
        lo = np.searchsorted(frames, d.frame, side="right")
        hi = np.searchsorted(frames, d.frame + lookahead, side="right")
        pairs.extend((i, j) for j in range(lo, hi))

    def weigh(pair):
        i, j = pair
        return composite_similarity(dets[i], dets[j], context, cfg).value

    weights = list(executor.map(weigh, pairs)) if executor is not None else [weigh(p) for p in pairs]
    succ: list[list[tuple[int, float]]] = [[] for _ in dets]
    for (i, j), w in zip(pairs, weights):
        if w != NEG_INF:
            succ[i].append((j, w))
    return LinkGraph(dets, [d.score for d in dets], succ)


def _trace(pred: list[int], j: int) -> list[int]:
    seq = []
    while j >= 0:
        seq.append(j)
        j = pred[j]
    return seq[::-1]


def longest_path(g: LinkGraph, removed=frozenset()) -> Path:
    """Heaviest source-to-sink path by one sweep in frame order.

    Ties prefer the earlier start frame, then more nodes, then the
    lexicographically smaller node sequence.  Nodes in ``removed`` are ignored.
    """
    n = len(g.detections)
    best = [0.0] * n
    start = [0] * n
    count = [0] * n
    pred = [-1] * n
    alive = [i not in removed for i in range(n)]
    for i in range(n):
        if alive[i]:
            best[i] = g.source[i]
            start[i] = g.detections[i].frame
            count[i] = 1

    def beats(score, st, cnt, i_pred, j_cur_pred, cur_score, cur_st, cur_cnt):
        if score != cur_score:
            return score > cur_score
        if st != cur_st:
            return st < cur_st
        if cnt != cur_cnt:
            return cnt > cur_cnt
        # equal length prefixes: compare them lexicographically
        return _trace(pred, i_pred) < _trace(pred, j_cur_pred)

    for i in range(n):
        if not alive[i]:
            continue
        bi, si, ci = best[i], start[i], count[i]
        for j, w in g.succ[i]:
            if not alive[j]:
                continue
            cand = bi + w
            if beats(cand, si, ci + 1, i, pred[j], best[j], start[j], count[j]):
                best[j], start[j], count[j], pred[j] = cand, si, ci + 1, i

    end = -1
    for j in range(n):
        if not alive[j]:
            continue
        if end < 0:
            end = j
            continue
        if best[j] != best[end]:
            better = best[j] > best[end]
        elif start[j] != start[end]:
            better = start[j] < start[end]
        elif count[j] != count[end]:
            better = count[j] > count[end]
        else:
            better = _trace(pred, j) < _trace(pred, end)
        if better:
            end = j
    if end < 0:
        return Path((), 0.0)
    return Path(tuple(_trace(pred, end)), best[end])


def path_to_tube(g: LinkGraph, path: Path) -> Tube:
    dets = [g.detections[i] for i in path.nodes]
    return Tube(
        category=dets[0].category,
        frames=tuple(d.frame for d in dets),
        boxes=tuple(d.box for d in dets),
        interpolated=(False,) * len(dets),
        path_score=path.score,
        detections=tuple(dets),
    )


def extract_tubes(
    detections: Sequence[Detection],
    context: SimilarityContext | None,
    cfg: SimilarityConfig,
    tube_threshold: float = 1.0,
    max_tubes: int = 32,
    lookahead: int = DEFAULT_LOOKAHEAD,
    graph: LinkGraph | None = None,
) -> list[Tube]:
    """Peel off heaviest paths until the best one scores below ``tube_threshold``."""
    if tube_threshold < 0:
        raise ValueError("tube_threshold must be >= 0")
    if graph is None:
        graph = build_link_graph(detections, context, cfg, lookahead)
    removed: set[int] = set()
    tubes: list[Tube] = []
    while len(tubes) < max_tubes:
        path = longest_path(graph, removed)
        if not path.nodes or path.score < tube_threshold:
            break
        tubes.append(path_to_tube(graph, path))
        removed.update(path.nodes)
    # peeling already yields non-increasing scores; the sort only fixes ties
    return sorted(tubes, key=lambda t: -t.path_score)


def track_box(box: BoundingBox, img_from: Image, img_to: Image, radius: int) -> BoundingBox:
    dx, dy = ncc_displacement(box, img_from, img_to, radius)
    return box.shifted(dx, dy)


def _blend(a: BoundingBox, b: BoundingBox, frac: float) -> BoundingBox:
    coords = round_half_up((1.0 - frac) * np.array(a.as_tuple()) + frac * np.array(b.as_tuple()))
    x0, y0, x1, y1 = (int(c) for c in coords)
    return BoundingBox(x0, y0, max(x1, x0 + 1), max(y1, y0 + 1))


def interpolate_tube(t: Tube, images, search_radius: int = 32) -> Tube:
    """Fill missing frames by correlation tracking.

    A single missing frame is tracked forward from its predecessor.  Longer
    gaps are tracked from both ends and the two placements are blended by
    temporal fraction.
    """
    frames, boxes, flags = [t.frames[0]], [t.boxes[0]], [t.interpolated[0]]
    for (f0, b0, i0), (f1, b1, i1) in zip(
        zip(t.frames, t.boxes, t.interpolated), zip(t.frames[1:], t.boxes[1:], t.interpolated[1:])
    ):
        gap = f1 - f0 - 1
        if gap == 1:
            frames.append(f0 + 1)
            boxes.append(track_box(b0, images[f0], images[f0 + 1], search_radius))
            flags.append(True)
        elif gap > 1:
            fwd = [b0]
            for f in range(f0 + 1, f1):
                fwd.append(track_box(fwd[-1], images[f - 1], images[f], search_radius))
            bwd = [b1]
            for f in range(f1 - 1, f0, -1):
                bwd.append(track_box(bwd[-1], images[f + 1], images[f], search_radius))
            bwd = bwd[::-1]  # bwd[k] now belongs to frame f0 + 1 + k
            for k in range(1, gap + 1):
                frames.append(f0 + k)
                boxes.append(_blend(fwd[k], bwd[k - 1], k / (f1 - f0)))
                flags.append(True)
        frames.append(f1)
        boxes.append(b1)
        flags.append(i1)
    return replace(t, frames=tuple(frames), boxes=tuple(boxes), interpolated=tuple(flags))


def volumetric_iou(a: Tube, b: Tube) -> float:
    """Frame-summed intersection over frame-summed union.

    Frames covered by only one tube contribute that box's area to the union.
    """
    da, db = a.as_dict(), b.as_dict()
    inter = union = 0
    for f in set(da) | set(db):
        ba, bb = da.get(f), db.get(f)
        if ba is not None and bb is not None:
            i = ba.intersection_area(bb)
            inter += i
            union += ba.area + bb.area - i
        else:
            union += (ba or bb).area
    return inter / union if union else 0.0


def tube_nms(tubes: Sequence[Tube], threshold: float = 0.5) -> list[Tube]:
    """Suppress same-class tubes overlapping a longer (then higher-scoring) one.

    Suppression needs volumetric IoU strictly above ``threshold``.  Survivors
    keep their input order.
    """
    order = sorted(range(len(tubes)), key=lambda i: (-tubes[i].length, -tubes[i].path_score, i))
    kept: list[int] = []
    for i in order:
        t = tubes[i]
        if all(
            tubes[k].category != t.category or volumetric_iou(tubes[k], t) <= threshold for k in kept
        ):
            kept.append(i)
    return [tubes[i] for i in sorted(kept)]
