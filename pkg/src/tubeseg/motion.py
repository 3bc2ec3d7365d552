"""Motion evidence: flow boundaries, inside-outside maps and the location prior.

Masks are plain ``(H, W)`` float arrays with values in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BoundingBox, FlowField, InputError, check_box_in_frame, round_half_up

AXIS_DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIAGONAL_DIRECTIONS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class MotionPriorConfig:
    boundary_threshold: float = 1.0
    ray_directions: int = 8
    smoothing_decay: float = 0.7
    smoothing_window: int = 5

    def __post_init__(self):
        if self.boundary_threshold <= 0:
            raise ValueError("boundary_threshold must be positive")
        if self.ray_directions not in (4, 8):
            raise ValueError("ray_directions must be 4 or 8")
        if not 0.0 <= self.smoothing_decay < 1.0:
            raise ValueError("smoothing_decay must lie in [0, 1)")
        if self.smoothing_window < 0:
            raise ValueError("smoothing_window must be >= 0")


def flow_gradient_magnitude(f: FlowField) -> np.ndarray:
    du_dy, du_dx = np.gradient(f.u)
    dv_dy, dv_dx = np.gradient(f.v)
    return np.sqrt(du_dx**2 + du_dy**2 + dv_dx**2 + dv_dy**2)


def motion_boundaries(f: FlowField, cfg: MotionPriorConfig = MotionPriorConfig()) -> np.ndarray:
    if min(f.u.shape) < 2:
        return np.zeros(f.u.shape)
    return (flow_gradient_magnitude(f) > cfg.boundary_threshold).astype(np.float64)


def _shift(a: np.ndarray, dx: int) -> np.ndarray:
    """``out[x] = a[x + dx]`` with False beyond the edge."""
    out = np.zeros_like(a)
    if dx == 0:
        out[:] = a
    elif dx > 0:
        out[:-dx] = a[dx:]
    else:
        out[-dx:] = a[:dx]
    return out


def ray_hits(boundary: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """For every pixel, does a ray stepping by ``(dx, dy)`` meet a boundary pixel?

    The starting pixel itself is not tested.
    """
    b = boundary.astype(bool)
    if dy == 0:
        b, hit = b.T, np.zeros(b.T.shape, dtype=bool)
        dy, dx = dx, 0
        transpose = True
    else:
        hit = np.zeros(b.shape, dtype=bool)
        transpose = False
    h = b.shape[0]
    rows = range(h - 2, -1, -1) if dy > 0 else range(1, h)
    for y in rows:
        nxt = y + dy
        hit[y] = _shift(b[nxt] | hit[nxt], dx)
    return hit.T if transpose else hit


def inside_outside_map(boundaries: np.ndarray, cfg: MotionPriorConfig = MotionPriorConfig()) -> np.ndarray:
    """Pixels enclosed by motion boundaries.

    A non-boundary pixel is inside when rays in more than half of the
    directions hit a boundary before leaving the frame.  Boundary pixels
    themselves straddle the object edge; each one follows the majority of its
    non-boundary 8-neighbours (outside if it has none), and on an even split
    follows its own ray vote.
    """
    b = boundaries.astype(bool)
    directions = AXIS_DIRECTIONS if cfg.ray_directions == 4 else AXIS_DIRECTIONS + DIAGONAL_DIRECTIONS
    votes = np.zeros(b.shape, dtype=np.int64)
    for dx, dy in directions:
        votes += ray_hits(b, dx, dy)
    inside = (votes * 2 > len(directions)) & ~b

    if b.any():
        pad_in = np.pad(inside, 1)
        pad_free = np.pad(~b, 1)
        n_in = np.zeros(b.shape, dtype=np.int64)
        n_free = np.zeros(b.shape, dtype=np.int64)
        h, w = b.shape
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                n_in += pad_in[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
                n_free += pad_free[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        # an even split (typical at inner corners) falls back to the pixel's own rays
        majority = (n_in * 2 > n_free) | ((n_in * 2 == n_free) & (votes * 2 > len(directions)))
        inside |= b & (n_free > 0) & majority
    return inside.astype(np.float64)


def restrict_map(m: np.ndarray, box: BoundingBox) -> np.ndarray:
    h, w = m.shape
    check_box_in_frame(box, w, h)
    out = np.zeros_like(m, dtype=np.float64)
    out[box.slices()] = m[box.slices()]
    return out


def box_mask(box: BoundingBox, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width))
    out[box.slices()] = 1.0
    return out


def _flow_targets(f: FlowField):
    ys, xs = np.mgrid[0 : f.height, 0 : f.width]
    tx = round_half_up(xs + f.u)
    ty = round_half_up(ys + f.v)
    valid = (tx >= 0) & (tx < f.width) & (ty >= 0) & (ty < f.height)
    return tx, ty, valid


def warp_forward(m: np.ndarray, f: FlowField) -> np.ndarray:
    """Splat ``m`` along the flow into the next frame, keeping the max per target."""
    tx, ty, valid = _flow_targets(f)
    out = np.zeros_like(m)
    sel = valid & (m > 0)
    np.maximum.at(out, (ty[sel], tx[sel]), m[sel])
    return out


def warp_backward(m_next: np.ndarray, f: FlowField) -> np.ndarray:
    """Pull values of the next frame back to where the flow says they came from."""
    tx, ty, valid = _flow_targets(f)
    out = np.zeros_like(m_next)
    out[valid] = m_next[ty[valid], tx[valid]]
    return out


def propagate_prior(
    per_frame: Sequence[np.ndarray],
    flows: Sequence[FlowField],
    tube_interval: tuple[int, int],
    cfg: MotionPriorConfig = MotionPriorConfig(),
) -> list[np.ndarray]:
    """Temporal max-smoothing of per-frame evidence along the flow.

    Evidence inside ``tube_interval`` (inclusive) is carried up to
    ``smoothing_window`` frames forward and backward, scaled by
    ``smoothing_decay`` per hop; each output frame takes the pixelwise max of
    everything that reaches it.
    """
    n = len(per_frame)
    if len(flows) < n - 1:
        raise InputError(f"{n} frames need {n - 1} flow fields, got {len(flows)}")
    start, end = tube_interval
    if not (0 <= start <= end < n):
        raise InputError(f"tube interval {tube_interval} outside 0..{n - 1}")
    shape = np.shape(per_frame[0])
    for t, m in enumerate(per_frame):
        if np.shape(m) != shape:
            raise InputError(f"evidence for frame {t} has shape {np.shape(m)}, expected {shape}")
    alpha = cfg.smoothing_decay
    out = [np.zeros(shape) for _ in range(n)]
    for s in range(start, end + 1):
        ev = np.clip(np.asarray(per_frame[s], dtype=np.float64), 0.0, 1.0)
        np.maximum(out[s], ev, out=out[s])
        if alpha == 0.0 or not ev.any():
            continue
        cur = ev
        for t in range(s + 1, min(s + cfg.smoothing_window, n - 1) + 1):
            cur = alpha * warp_forward(cur, flows[t - 1])
            np.maximum(out[t], cur, out=out[t])
        cur = ev
        for t in range(s - 1, max(s - cfg.smoothing_window, 0) - 1, -1):
            cur = alpha * warp_backward(cur, flows[t])
            np.maximum(out[t], cur, out=out[t])
    return out
