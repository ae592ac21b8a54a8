import json
import math

import numpy as np
import pytest

from src.Exceptions import OutOfValidatedRange
from utils.BesselUtils import BesselUtils
from utils.ChebyshevUtils import ChebyshevUtils
from utils.ContourUtils import ContourUtils
from utils.ParallelUtils import ParallelUtils
from utils.ReportUtils import ReportUtils


class TestChebyshev:
    def test_clenshaw_curtis_integrates_polynomials(self):
        x, _ = ChebyshevUtils.chebdiff(16)
        w = ChebyshevUtils.clenshaw_curtis_weights(16)
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(2.0)
        assert np.sum(w * x ** 6) == pytest.approx(2.0 / 7.0)

    def test_odd_degree_weights(self):
        x, _ = ChebyshevUtils.chebdiff(15)
        w = ChebyshevUtils.clenshaw_curtis_weights(15)
        assert np.sum(w * x ** 4) == pytest.approx(2.0 / 5.0)

    def test_radial_operators_respect_parity(self):
        r, d1, d2, w = ChebyshevUtils.radial_operators(2.0, 20, m=0)
        assert r[0] == pytest.approx(2.0)
        np.testing.assert_allclose(d1 @ r ** 2, 2 * r, atol=1e-9)
        np.testing.assert_allclose(d2 @ r ** 4, 12 * r ** 2, atol=1e-8)
        r, d1, _, _ = ChebyshevUtils.radial_operators(1.0, 20, m=1)
        np.testing.assert_allclose(d1 @ r ** 3, 3 * r ** 2, atol=1e-9)
        assert w.sum() == pytest.approx(4.0 * np.pi)


class TestContour:
    def test_rectangle_winding_counts_zeros(self):
        f = lambda z: (z - 1.0) * (z - 2.0j) ** 2
        assert ContourUtils.rectangle_winding(f, (0.5, 1.5), (-0.5, 0.5)) == 1
        assert ContourUtils.rectangle_winding(f, (-1.0, 1.5), (-0.5, 3.0)) == 3
        assert ContourUtils.rectangle_winding(f, (3.0, 4.0), (3.0, 4.0)) == 0

    def test_roots_in_rectangle(self):
        f = lambda z: np.cos(z)
        roots = ContourUtils.roots_in_rectangle(f, (0.0, 10.0), (-1.0, 1.0), 1.0)
        found = sorted(r.real for r, _ in roots)
        np.testing.assert_allclose(found, [np.pi / 2, 3 * np.pi / 2, 5 * np.pi / 2], atol=1e-10)
        assert all(m == 1 for _, m in roots)

    def test_double_root_keeps_its_multiplicity(self):
        roots = ContourUtils.roots_in_rectangle(lambda z: (z - 1.3) ** 2, (0.0, 3.0), (-1.0, 1.0), 1.0)
        assert sum(m for _, m in roots) == 2

    def test_newton(self):
        assert ContourUtils.newton(lambda z: z * z - 2.0, 1.0) == pytest.approx(math.sqrt(2.0))
        assert ContourUtils.newton(lambda z: 1.0 + 0 * z, 1.0) is None


class TestBessel:
    def test_small_arguments(self):
        assert BesselUtils.bessel_j(0, 0.0) == pytest.approx(1.0)
        assert BesselUtils.bessel_j(1, 1.0) == pytest.approx(0.4400505857449335)

    def test_derivative_identity(self):
        z = np.array([0.5, 3.0 + 1.0j, 12.0])
        j1, dj1 = BesselUtils.bessel_j_and_derivative(1, z)
        np.testing.assert_allclose(dj1, BesselUtils.bessel_j(0, z) - j1 / z, rtol=1e-9)

    def test_range_is_checked(self):
        with pytest.raises(OutOfValidatedRange):
            BesselUtils.bessel_j(61, 1.0)
        with pytest.raises(OutOfValidatedRange):
            BesselUtils.bessel_j(0, 250.0)


class TestParallel:
    @pytest.mark.parametrize("threads", [1, 4])
    def test_map_keeps_order(self, threads):
        assert ParallelUtils.map(lambda v: v * v, range(20), threads) == [v * v for v in range(20)]

    def test_empty_input(self):
        assert ParallelUtils.map(lambda v: v, [], 3, progress=True) == []


class TestReport:
    def test_csv_format(self, tmp_path):
        path = ReportUtils.write_csv(tmp_path / "t.csv", ["a", "b", "ok"], [(0.1, 2, True), (1e-20, -3, False)])
        assert path.read_bytes() == b"a,b,ok\r\n0.1,2,true\r\n1e-20,-3,false\r\n"
        rows = ReportUtils.read_csv(path)
        assert rows[1] == {"a": "1e-20", "b": "-3", "ok": "false"}

    def test_json_is_sorted_with_nulls(self, tmp_path):
        path = ReportUtils.write_json(tmp_path / "t.json", {"b": float("inf"), "a": 1 + 2j, "c": np.float64(0.5)})
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert json.loads(text) == {"a": [1.0, 2.0], "b": None, "c": 0.5}

    def test_plot_data(self, tmp_path):
        path = ReportUtils.write_plot_data(tmp_path / "t.dat", [1.0, 2.0], [0.5, 0.25])
        assert path.read_text(encoding="utf-8") == "1.0 0.5\n2.0 0.25\n"

    def test_matrix_header(self, tmp_path):
        matrix = np.arange(4, dtype=complex).reshape(2, 2) * (1 + 1j)
        path = ReportUtils.write_matrix(tmp_path / "m.bin", matrix, 2)
        blob = path.read_bytes()
        assert blob[:8] == b"ITESPEC1"
        assert len(blob) == 16 + 4 * 16
        loaded, tag = ReportUtils.read_matrix(path)
        assert tag == 2
        np.testing.assert_array_equal(loaded, matrix)
        with pytest.raises(ValueError):
            ReportUtils.write_matrix(tmp_path / "bad.bin", np.ones((2, 3)), 1)
