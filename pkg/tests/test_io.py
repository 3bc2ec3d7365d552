import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import det
from tubeseg.core import FlowField, Image
from tubeseg.io import (
    FormatError,
    read_detections,
    read_flo,
    read_pgm,
    read_ppm,
    write_detections,
    write_flo,
    write_pgm,
    write_ppm,
)

HEADER = "frame,x_min,y_min,x_max,y_max,score,category\n"


class TestFlo:
    def test_one_pixel_example(self):
        data = b"PIEH" + struct.pack("<ii", 1, 1) + struct.pack("<ff", 1.5, -2.0)
        f = read_flo(data)
        assert (f.width, f.height) == (1, 1)
        assert f.u[0, 0] == 1.5 and f.v[0, 0] == -2.0
        assert write_flo(f) == data

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="magic"):
            read_flo(b"XXXX" + struct.pack("<iiff", 1, 1, 0, 0))

    @pytest.mark.parametrize("cut", [3, 12, 15])
    def test_truncated(self, cut):
        data = write_flo(FlowField.constant(2, 2, 1, 1))
        with pytest.raises(FormatError):
            read_flo(data[:cut])

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
    def test_round_trip_is_byte_identical(self, seed, w, h):
        rng = np.random.default_rng(seed)
        f = FlowField(rng.normal(0, 5, (h, w)).astype(np.float32), rng.normal(0, 5, (h, w)).astype(np.float32))
        data = write_flo(f)
        assert write_flo(read_flo(data)) == data
        assert np.array_equal(read_flo(data).u, f.u)


class TestDetections:
    def test_valid(self):
        text = HEADER + "1,0,0,4,4,0.5,dog\n0,1,2,3,4,0.9,car\n"
        ds = read_detections(text)
        assert [d.frame for d in ds] == [0, 1]
        assert ds[0].box.as_tuple() == (1, 2, 3, 4) and ds[0].category == "car"

    def test_round_trip(self):
        ds = [det(0, (1, 2, 5, 6), 0.25), det(2, (0, 0, 3, 3), 1 / 3, "person")]
        assert read_detections(write_detections(ds)) == ds

    @pytest.mark.parametrize(
        "body, line",
        [
            ("0,5,0,4,4,0.5,car\n", 2),  # inverted
            ("0,0,0,4,4,0.5,car\n0,0,0,4,x,0.5,car\n", 3),  # non-numeric
            ("0,0,0,4,4,0.5\n", 2),  # missing field
            ("0,0,0,4,4,0.5,\n", 2),  # empty category
            ("-1,0,0,4,4,0.5,car\n", 2),  # negative frame
        ],
    )
    def test_errors_name_the_line(self, body, line):
        with pytest.raises(FormatError, match=f"line {line}"):
            read_detections(HEADER + body)

    def test_bad_header(self):
        with pytest.raises(FormatError, match="header"):
            read_detections("a,b,c\n")

    def test_empty(self):
        assert read_detections("") == [] and read_detections(HEADER) == []


class TestNetpbm:
    def test_pgm_8bit_round_trip(self):
        a = np.arange(12).reshape(3, 4) * 20
        assert np.array_equal(read_pgm(write_pgm(a)), a)

    def test_pgm_16bit_round_trip(self):
        a = np.array([[0, 300], [65535, 7]])
        assert np.array_equal(read_pgm(write_pgm(a, sixteen_bit=True)), a)

    def test_pgm_range(self):
        with pytest.raises(ValueError):
            write_pgm(np.array([[256]]))

    def test_pgm_comment(self):
        assert read_pgm(b"P5\n# hi\n2 1\n255\n\x01\x02").tolist() == [[1, 2]]

    def test_ppm_round_trip(self):
        img = Image(np.random.default_rng(0).integers(0, 256, (5, 7, 3), dtype=np.uint8))
        back = read_ppm(write_ppm(img))
        assert np.array_equal(back.pixels, img.pixels)

    @pytest.mark.parametrize("data", [b"P6\n2 2\n255\n\x00", b"P3\n1 1\n255\n000", b"P5\n1"])
    def test_bad_files(self, data):
        with pytest.raises(FormatError):
            read_ppm(data)
