import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cospike import (
    ParseError,
    load_matrix,
    load_measurements,
    save_matrix,
    save_measurements,
)

matrices = hnp.arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
    elements=st.floats(-1e12, 1e12, allow_nan=False),
)


class TestMatrixRoundTrip:
    @given(matrices)
    @settings(max_examples=40)
    def test_bit_exact(self, a):
        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "m.txt"
            save_matrix(path, a)
            back = load_matrix(path)
        assert back.shape == a.shape
        assert np.array_equal(back, a)

    def test_header_records_shape(self, tmp_path):
        path = tmp_path / "m.txt"
        save_matrix(path, np.zeros((3, 5)))
        first = path.read_text().splitlines()[0]
        assert first == "3,5"

    def test_shape_mismatch_detected(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("2,2\n1.0,2.0\n")
        with pytest.raises(ParseError):
            load_matrix(path)

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("1,2\n1.0,zzz\n")
        with pytest.raises(ParseError, match=":2:"):
            load_matrix(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("2,3\n1,2,3\n4,5\n")
        with pytest.raises(ParseError):
            load_matrix(path)


class TestMeasurementsRoundTrip:
    def test_bit_exact(self, tmp_path, rng):
        y = rng.normal(size=(7, 24)) * 1e3
        path = tmp_path / "y.txt"
        save_measurements(path, y)
        assert np.array_equal(load_measurements(path), y)

    def test_single_row(self, tmp_path):
        path = tmp_path / "y.txt"
        save_measurements(path, np.array([[1.5, -2.5]]))
        back = load_measurements(path)
        assert back.shape == (1, 2)
