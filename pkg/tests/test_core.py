import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import solid_image
from tubeseg.core import (
    BoundingBox,
    Detection,
    FlowField,
    Image,
    InputError,
    box_center,
    color_histogram,
    iou,
    round_half_up,
)


@st.composite
def boxes(draw, limit=40):
    x0 = draw(st.integers(0, limit - 1))
    y0 = draw(st.integers(0, limit - 1))
    x1 = draw(st.integers(x0 + 1, limit))
    y1 = draw(st.integers(y0 + 1, limit))
    return BoundingBox(x0, y0, x1, y1)


class TestBoundingBox:
    def test_geometry(self):
        b = BoundingBox(2, 3, 12, 8)
        assert (b.width, b.height, b.area) == (10, 5, 50)
        assert b.shifted(1, -1) == BoundingBox(3, 2, 13, 7)

    @pytest.mark.parametrize("coords", [(5, 0, 5, 10), (0, 5, 10, 5), (6, 0, 5, 10), (0.5, 0, 3, 3)])
    def test_rejects_bad_coordinates(self, coords):
        with pytest.raises(InputError):
            BoundingBox(*coords)

    def test_union_box(self):
        assert BoundingBox(0, 0, 2, 2).union_box(BoundingBox(5, 1, 6, 9)) == BoundingBox(0, 0, 6, 9)


class TestDetection:
    @pytest.mark.parametrize("score", [-0.1, 1.01])
    def test_score_range(self, score):
        with pytest.raises(InputError):
            Detection(0, BoundingBox(0, 0, 1, 1), score, "car")

    def test_negative_frame(self):
        with pytest.raises(InputError):
            Detection(-1, BoundingBox(0, 0, 1, 1), 0.5, "car")


class TestIou:
    def test_examples(self):
        a = BoundingBox(0, 0, 10, 10)
        assert iou(a, a) == 1.0
        assert iou(a, BoundingBox(20, 20, 30, 30)) == 0.0
        assert iou(a, BoundingBox(5, 0, 15, 10)) == pytest.approx(50 / 150, abs=1e-12)

    @given(boxes(), boxes())
    def test_symmetric_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0
        assert (v == 1.0) == (a == b)


class TestBoxCenter:
    @pytest.mark.parametrize(
        "b, c", [((0, 0, 10, 10), (5, 5)), ((2, 4, 6, 8), (4, 6)), ((0, 0, 1, 1), (0.5, 0.5))]
    )
    def test_midpoint(self, b, c):
        assert box_center(BoundingBox(*b)) == c


class TestColorHistogram:
    def test_uniform_red(self):
        img = solid_image(20, 20, (255, 0, 0))
        h = color_histogram(img, BoundingBox(0, 0, 10, 10))
        assert h.total == 100
        assert h.bins[(7 * 8 + 0) * 8 + 0] == 100
        assert np.count_nonzero(h.bins) == 1

    def test_half_red_half_blue(self):
        px = np.zeros((10, 10, 3), dtype=np.uint8)
        px[:, :5] = (255, 0, 0)
        px[:, 5:] = (0, 0, 255)
        h = color_histogram(Image(px), BoundingBox(0, 0, 10, 10))
        assert sorted(h.bins[h.bins > 0].tolist()) == [50, 50]

    def test_out_of_bounds(self):
        with pytest.raises(InputError):
            color_histogram(solid_image(10, 10), BoundingBox(5, 5, 11, 8))

    @given(boxes(limit=24), st.integers(0, 2**16))
    def test_total_equals_area(self, b, seed):
        img = Image(np.random.default_rng(seed).integers(0, 256, (24, 24, 3), dtype=np.uint8))
        h = color_histogram(img, b)
        assert h.total == b.area
        assert (h.bins >= 0).all()

    @given(boxes(limit=16), st.integers(0, 8), st.integers(0, 8))
    def test_translation_invariant_on_constant_image(self, b, dx, dy):
        img = solid_image(30, 30, (17, 200, 90))
        assert color_histogram(img, b) == color_histogram(img, b.shifted(dx, dy))


class TestImageAndFlow:
    def test_image_is_read_only(self):
        img = solid_image(4, 3)
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 1

    def test_image_rejects_bad_shape(self):
        with pytest.raises(InputError):
            Image(np.zeros((4, 4)))

    def test_gray_luma(self):
        img = solid_image(1, 1, (100, 200, 50))
        assert img.gray()[0, 0] == pytest.approx(0.299 * 100 + 0.587 * 200 + 0.114 * 50)

    def test_flow_shapes(self):
        with pytest.raises(InputError):
            FlowField(np.zeros((2, 3)), np.zeros((3, 2)))
        f = FlowField.constant(5, 4, 1.5, -2)
        assert (f.width, f.height) == (5, 4)
        assert (f.u == 1.5).all() and (f.v == -2).all()


def test_round_half_up():
    assert round_half_up(np.array([-1.5, -0.5, 0.5, 1.5, 2.49])).tolist() == [-1, 0, 1, 2, 2]
