"""Segmentation and tube quality measures."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BoundingBox, iou

F_SUCCESS = 0.75


def eval_iou(
    pred: Mapping[object, Sequence[np.ndarray | None]],
    gt: Mapping[object, Sequence[np.ndarray | None]],
    categories: Mapping[object, str] | None = None,
) -> dict:
    """Aggregated IoU per ground-truth object.

    ``gt[obj][t]`` is ``None`` for frames without annotation; those frames
    are skipped.  A missing prediction counts as empty.  Objects without any
    annotated frame are reported as ``None`` and left out of the averages.
    """
    per_object: dict = {}
    for obj, gt_seq in gt.items():
        pred_seq = pred.get(obj, [])
        inter = union = 0
        annotated = False
        for t, g in enumerate(gt_seq):
            if g is None:
                continue
            annotated = True
            g = np.asarray(g) > 0.5
            p = pred_seq[t] if t < len(pred_seq) and pred_seq[t] is not None else None
            p = np.zeros_like(g) if p is None else np.asarray(p) > 0.5
            inter += int((p & g).sum())
            union += int((p | g).sum())
        if not annotated:
            per_object[obj] = None
        else:
            per_object[obj] = inter / union if union else 1.0
    scored = {k: v for k, v in per_object.items() if v is not None}
    by_cat: dict = defaultdict(list)
    if categories:
        for k, v in scored.items():
            by_cat[categories.get(k, "?")].append(v)
    return {
        "per_object": per_object,
        "per_category": {c: float(np.mean(v)) for c, v in sorted(by_cat.items())},
        "average": float(np.mean(list(scored.values()))) if scored else None,
    }


def f_measure(inter: int, pred_size: int, gt_size: int) -> float:
    """Harmonic mean of precision and recall, via ``2|S∩G| / (|S| + |G|)``."""
    total = pred_size + gt_size
    return 2.0 * inter / total if total else 0.0


@dataclass
class FMeasureResult:
    precision: np.ndarray  # (n_pred, n_gt)
    recall: np.ndarray
    f: np.ndarray
    assignment: list[tuple[int, int]]  # (pred index, gt index)
    matched: int  # assigned pairs with F >= 0.75
    inter: np.ndarray
    pred_sizes: np.ndarray
    gt_sizes: np.ndarray

    def pair(self, i: int, j: int) -> tuple[float, float, float]:
        return float(self.precision[i, j]), float(self.recall[i, j]), float(self.f[i, j])

    def averages(self) -> tuple[float, float, float]:
        """Mean P, R, F over assigned pairs (unassigned ground truth counts as 0)."""
        n_gt = self.f.shape[1]
        if n_gt == 0:
            return (0.0, 0.0, 0.0)
        p = sum(self.precision[i, j] for i, j in self.assignment) / n_gt
        r = sum(self.recall[i, j] for i, j in self.assignment) / n_gt
        f = sum(self.f[i, j] for i, j in self.assignment) / n_gt
        return float(p), float(r), float(f)


def _flatten(obj) -> np.ndarray:
    return np.concatenate([np.ravel(np.asarray(m) > 0.5) for m in obj]) if len(obj) else np.zeros(0, bool)


def eval_fmeasure(pred_objects: Sequence, gt_objects: Sequence) -> FMeasureResult:
    """Precision/recall/F for every predicted-vs-true pair plus the F-maximising matching.

    Objects are sequences of per-frame masks; background is never passed in.
    Success is ``F >= 0.75``, decided in exact integer arithmetic.
    """
    P = [_flatten(o) for o in pred_objects]
    G = [_flatten(o) for o in gt_objects]
    n, m = len(P), len(G)
    inter = np.zeros((n, m), dtype=np.int64)
    for i, p in enumerate(P):
        for j, g in enumerate(G):
            if len(p) != len(g):
                raise ValueError(f"object {i} and ground truth {j} cover different pixel counts")
            inter[i, j] = int((p & g).sum())
    ps = np.array([int(p.sum()) for p in P], dtype=np.int64)
    gs = np.array([int(g.sum()) for g in G], dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(ps[:, None] > 0, inter / np.maximum(ps[:, None], 1), 0.0)
        recall = np.where(gs[None, :] > 0, inter / np.maximum(gs[None, :], 1), 0.0)
    denom = ps[:, None] + gs[None, :]
    f = np.where(denom > 0, 2.0 * inter / np.maximum(denom, 1), 0.0)
    assignment: list[tuple[int, int]] = []
    if n and m:
        rows, cols = linear_sum_assignment(f, maximize=True)
        assignment = [(int(i), int(j)) for i, j in zip(rows, cols)]
    # F >= 3/4  <=>  8 * inter >= 3 * (|S| + |G|)
    matched = sum(1 for i, j in assignment if denom[i, j] > 0 and 8 * inter[i, j] >= 3 * denom[i, j])
    return FMeasureResult(precision, recall, f, assignment, matched, inter, ps, gs)


def objects_from_label_maps(maps: Sequence[np.ndarray]) -> dict[int, list[np.ndarray]]:
    """Split indexed label maps into per-label boolean mask sequences (label 0 skipped)."""
    labels = sorted(set(np.unique(np.concatenate([np.ravel(m) for m in maps]))) - {0}) if maps else []
    return {int(k): [np.asarray(m) == k for m in maps] for k in labels}


def match_labels(pred_maps: Sequence[np.ndarray], gt_maps: Sequence[np.ndarray]) -> dict[int, int]:
    """Assign predicted labels to ground-truth labels maximising total aggregated IoU."""
    pred = objects_from_label_maps(pred_maps)
    gt = objects_from_label_maps(gt_maps)
    pk, gk = list(pred), list(gt)
    if not pk or not gk:
        return {}
    score = np.zeros((len(pk), len(gk)))
    for i, a in enumerate(pk):
        pa = _flatten(pred[a])
        for j, b in enumerate(gk):
            gb = _flatten(gt[b])
            u = (pa | gb).sum()
            score[i, j] = (pa & gb).sum() / u if u else 0.0
    rows, cols = linear_sum_assignment(score, maximize=True)
    return {gk[j]: pk[i] for i, j in zip(rows, cols)}


def segmentation_iou(pred_maps: Sequence[np.ndarray], gt_maps: Sequence[np.ndarray]) -> dict:
    """IoU report after matching predicted labels to ground-truth objects."""
    mapping = match_labels(pred_maps, gt_maps)
    gt = objects_from_label_maps(gt_maps)
    pred = objects_from_label_maps(pred_maps)
    aligned = {g: pred[p] for g, p in mapping.items()}
    return eval_iou(aligned, gt)


def tube_box_iou(boxes: Mapping[int, BoundingBox], gt_boxes: Mapping[int, BoundingBox]) -> float:
    """Mean box IoU over ground-truth frames; frames the tube misses score 0."""
    if not gt_boxes:
        return 0.0
    total = 0.0
    for t, g in gt_boxes.items():
        b = boxes.get(t)
        if b is not None:
            total += iou(b, g)
    return total / len(gt_boxes)
