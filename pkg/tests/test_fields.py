"""Grid bookkeeping, finite differences, and field serialization."""

import numpy as np
import pytest

from minsurf.fields import (
    GridSpec,
    OperatorField,
    ScalarField,
    diff1,
    diff2,
    laplacian,
)


def spec_np(nx=21, ny=17):
    return GridSpec(nx=nx, ny=ny, hx=0.05, hy=0.05, origin=(-0.5, -0.4),
                    periodic_y=False)


def spec_per(nx=21, ny=32):
    return GridSpec(nx=nx, ny=ny, hx=0.05, hy=1.0 / ny, origin=(-0.5, 0.0),
                    periodic_y=True)


class TestGridSpec:
    def test_axes(self):
        s = spec_np()
        assert s.xs[0] == -0.5 and s.shape == (21, 17)
        assert np.allclose(np.diff(s.xs), 0.05)
        assert s.width == pytest.approx(1.0)

    def test_period(self):
        s = spec_per()
        assert s.period_y == pytest.approx(1.0)
        # last node sits one step short of the wrap
        assert s.ys[-1] == pytest.approx(1.0 - s.hy)

    def test_interior_mask(self):
        s = spec_np(5, 4)
        m = s.interior_mask()
        assert not m[0].any() and not m[-1].any()
        assert not m[:, 0].any() and not m[:, -1].any()
        assert m[1:-1, 1:-1].all()

    def test_interior_mask_periodic(self):
        s = spec_per(5, 8)
        m = s.interior_mask()
        # periodic direction has no boundary
        assert not m[0].any() and not m[-1].any()
        assert m[1:-1, :].all()

    def test_json_round_trip(self):
        s = spec_per()
        assert GridSpec.from_json_dict(s.to_json_dict()) == s

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(nx=1, ny=8, hx=0.1, hy=0.1, origin=(0, 0),
                     periodic_y=False)
        with pytest.raises(ValueError):
            GridSpec(nx=8, ny=8, hx=-0.1, hy=0.1, origin=(0, 0),
                     periodic_y=False)


class TestDifferences:
    def _f(self, s):
        X, Y = s.nodes()
        return np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)

    def test_diff1_second_order(self):
        errs = []
        for n in (32, 64):
            s = GridSpec(nx=n + 1, ny=n + 1, hx=1.0 / n, hy=1.0 / n,
                         origin=(0.0, 0.0), periodic_y=False)
            X, Y = s.nodes()
            v = np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)
            d = diff1(v, s.hx, axis=0)
            exact = 2 * np.pi * np.cos(2 * np.pi * X) * np.cos(2 * np.pi * Y)
            errs.append(np.max(np.abs(d - exact)[1:-1, :]))
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_diff2_periodic_wraps(self):
        n = 64
        s = GridSpec(nx=9, ny=n, hx=0.1, hy=1.0 / n, origin=(0.0, 0.0),
                     periodic_y=True)
        X, Y = s.nodes()
        v = np.cos(2 * np.pi * Y) + 0.0 * X
        d = diff2(v, s.hy, axis=1, periodic=True)
        exact = -(2 * np.pi) ** 2 * np.cos(2 * np.pi * Y)
        # wraps cleanly: the error is uniform in j, including j = 0
        err = np.abs(d - exact)
        assert err.max() <= 10.0 / n ** 2 * (2 * np.pi) ** 4
        assert err[:, 0].max() <= 2 * err[:, n // 2].max() + 1e-12

    def test_laplacian_matches_analytic(self):
        n = 64
        s = GridSpec(nx=n + 1, ny=n, hx=1.0 / n, hy=1.0 / n,
                     origin=(0.0, 0.0), periodic_y=True)
        f = ScalarField.from_function(
            s, lambda x, y: np.sin(np.pi * x) * np.sin(2 * np.pi * y))
        lap = laplacian(f)
        exact = -(np.pi ** 2 + 4 * np.pi ** 2) * f.values
        err = np.abs(lap.values - exact)[s.interior_mask()]
        # truncation constant (f_xxxx + f_yyyy)/12 = 17 pi^4 / 12 ~ 138
        assert err.max() <= 150.0 / n ** 2


class TestScalarField:
    def test_from_function_and_sup(self):
        s = spec_np(5, 5)
        f = ScalarField.from_function(s, lambda x, y: x + 2 * y)
        assert f.values.shape == s.shape
        assert f.sup() == np.abs(f.values).max()
        assert f.sup(interior_only=True) == np.abs(
            f.values[s.interior_mask()]).max()

    def test_rejects_nonfinite(self):
        s = spec_np(4, 4)
        vals = np.zeros(s.shape)
        vals[2, 2] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            ScalarField(s, vals)

    def test_rejects_wrong_shape(self):
        s = spec_np(4, 4)
        with pytest.raises(ValueError):
            ScalarField(s, np.zeros((3, 4)))

    def test_csv_round_trip(self, tmp_path):
        s = spec_per(7, 8)
        f = ScalarField.from_function(s, lambda x, y: np.sin(x) * y + 0.1)
        p = tmp_path / "f.csv"
        f.to_csv(p)
        g = ScalarField.from_csv(p)
        assert g.spec == s
        assert np.array_equal(g.values, f.values)


class TestOperatorField:
    def test_algebra(self):
        s = spec_np(6, 6)
        A = OperatorField.from_components(s, 2.0, 1.0, 0.0, 3.0)
        B = OperatorField.from_components(s, 1.0, 0.0, 1.0, 1.0)
        C = A @ B
        assert np.allclose(C.a11, 3.0) and np.allclose(C.a12, 1.0)
        assert np.allclose(C.a21, 3.0) and np.allclose(C.a22, 3.0)
        assert np.allclose(A.trace(), 5.0)
        assert np.allclose(A.det(), 6.0)
        assert np.allclose((A - A).sup(), 0.0)
        assert np.allclose((2.0 * A).a11, 4.0)

    def test_inverse(self):
        s = spec_np(6, 6)
        A = OperatorField.from_components(s, 2.0, 1.0, 0.5, 3.0)
        P = A @ A.inverse()
        assert (P - OperatorField.identity(s)).sup() <= 1e-14

    def test_singular_inverse_raises(self):
        s = spec_np(4, 4)
        A = OperatorField.from_components(s, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ZeroDivisionError):
            A.inverse()

    def test_symmetry_flag(self):
        s = spec_np(4, 4)
        assert OperatorField.from_components(s, 1.0, 0.5, 0.5, 2.0).is_symmetric()
        assert not OperatorField.from_components(s, 1, 0.5, -0.5, 2).is_symmetric()

    def test_scalarfield_multiplication(self):
        s = spec_np(6, 6)
        f = ScalarField.from_function(s, lambda x, y: x)
        A = OperatorField.identity(s) * f
        assert np.allclose(A.a11, f.values)
        assert np.allclose(A.a12, 0.0)

    def test_csv_round_trip(self, tmp_path):
        s = spec_np(5, 6)
        A = OperatorField.from_components(
            s, 1.0, 0.25, -0.25,
            ScalarField.from_function(s, lambda x, y: y).values)
        p = tmp_path / "a.csv"
        A.to_csv(p)
        B = OperatorField.from_csv(p)
        assert B.spec == s
        assert np.array_equal(B.mat, A.mat)
