"""Domain types and box/colour primitives shared by every stage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HIST_BINS_PER_CHANNEL = 8
HIST_BIN_WIDTH = 256 // HIST_BINS_PER_CHANNEL
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class InputError(ValueError):
    """Raised for malformed, misaligned or out-of-range inputs."""


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Integer half-open box: covers pixels ``x_min <= x < x_max``."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = getattr(self, name)
            if int(value) != value:
                raise InputError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise InputError(f"degenerate box {self.as_tuple()}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def shifted(self, dx: int, dy: int) -> BoundingBox:
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def intersection_area(self, other: BoundingBox) -> int:
        w = min(self.x_max, other.x_max) - max(self.x_min, other.x_min)
        h = min(self.y_max, other.y_max) - max(self.y_min, other.y_min)
        return max(w, 0) * max(h, 0)

    def union_box(self, other: BoundingBox) -> BoundingBox:
        return BoundingBox(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def inside(self, width: int, height: int) -> bool:
        return self.x_min >= 0 and self.y_min >= 0 and self.x_max <= width and self.y_max <= height

    def slices(self) -> tuple[slice, slice]:
        """Row/column slices for indexing ``array[rows, cols]``."""
        return slice(self.y_min, self.y_max), slice(self.x_min, self.x_max)


@dataclass(frozen=True)
class Detection:
    frame: int
    box: BoundingBox
    score: float
    category: str

    def __post_init__(self):
        if self.frame < 0:
            raise InputError(f"negative frame index {self.frame}")
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"score {self.score} outside [0, 1]")


class Image:
    """RGB frame stored as a ``(height, width, 3)`` uint8 array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InputError(f"expected (H, W, 3) pixels, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise InputError("pixel channels must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = arr.copy()
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def gray(self) -> np.ndarray:
        return self.pixels.astype(np.float64) @ LUMA_WEIGHTS

    def crop(self, box: BoundingBox) -> np.ndarray:
        check_box_in_frame(box, self.width, self.height)
        return self.pixels[box.slices()]

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Image({self.width}x{self.height})"


@dataclass(frozen=True, eq=False)
class ColorHistogram:
    bins: np.ndarray  # shape (512,), int64 counts

    @property
    def total(self) -> int:
        return int(self.bins.sum())

    def __eq__(self, other):
        return isinstance(other, ColorHistogram) and np.array_equal(self.bins, other.bins)


class FlowField:
    """Per-pixel displacement from frame t to frame t+1."""

    __slots__ = ("u", "v")

    def __init__(self, u, v):
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise InputError(f"flow components disagree: {u.shape} vs {v.shape}")
        self.u = u
        self.v = v

    @classmethod
    def zeros(cls, width: int, height: int) -> FlowField:
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def constant(cls, width: int, height: int, du: float, dv: float) -> FlowField:
        return cls(np.full((height, width), float(du)), np.full((height, width), float(dv)))

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, FlowField)
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )

    def __repr__(self):
        return f"FlowField({self.width}x{self.height})"


def check_box_in_frame(box: BoundingBox, width: int, height: int) -> None:
    if not box.inside(width, height):
        raise InputError(f"box {box.as_tuple()} exceeds frame {width}x{height}")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    inter = a.intersection_area(b)
    return inter / (a.area + b.area - inter)


def box_center(b: BoundingBox) -> tuple[float, float]:
    return ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)


def color_histogram(img: Image, box: BoundingBox) -> ColorHistogram:
    patch = img.crop(box).reshape(-1, 3).astype(np.int64) // HIST_BIN_WIDTH
    n = HIST_BINS_PER_CHANNEL
    index = (patch[:, 0] * n + patch[:, 1]) * n + patch[:, 2]
    bins = np.bincount(index, minlength=n**3).astype(np.int64)
    bins.setflags(write=False)
    return ColorHistogram(bins)


def round_half_up(x):
    """Round to nearest integer, halves upward; works on scalars and arrays."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)
