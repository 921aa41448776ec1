"""Newton solver for the conformal-factor equation on strips and squares."""

import numpy as np
import pytest

from minsurf.fields import GridSpec, ScalarField, diff2
from minsurf import pde
from minsurf.errors import NewtonDiverged


def square_problem(width: float, c: float, n: int = 33) -> pde.PdeProblem:
    spec = GridSpec(nx=n, ny=n, hx=width / (n - 1), hy=width / (n - 1),
                    origin=(-width / 2, -width / 2), periodic_y=False)
    return pde.PdeProblem(spec=spec,
                          boundary=ScalarField(spec, np.full(spec.shape, c)))


def strip_problem(width: float, c: float, nx: int = 49,
                  ny: int = 32) -> pde.PdeProblem:
    def bfor(spec):
        vals = np.zeros(spec.shape)
        vals[0, :] = c
        vals[-1, :] = c
        return ScalarField(spec, vals)

    spec = GridSpec(nx=nx, ny=ny, hx=width / (nx - 1), hy=1.0 / ny,
                    origin=(-width / 2, 0.0), periodic_y=True)
    return pde.PdeProblem(spec=spec, boundary=bfor(spec), boundary_func=bfor)


class TestSolve:
    def test_invariant_strip_convergence(self, sol0):
        errs = {}
        for n in (32, 64):
            p = pde.invariant_strip_problem(sol0, 0.8, nx=n + 1, ny=n)
            s = pde.solve(p)
            assert pde.residual(s) <= 1e-10
            exact = np.asarray(sol0.g_at(np.abs(s.spec.xs)))[:, None]
            errs[n] = np.max(np.abs(s.u.values - exact))
        assert 3.5 <= errs[32] / errs[64] <= 4.5

    def test_boundary_matches_exactly(self, sol0):
        p = pde.invariant_strip_problem(sol0, 0.8, nx=33, ny=32)
        s = pde.solve(p)
        assert np.array_equal(s.u.values[0, :], p.boundary.values[0, :])
        assert np.array_equal(s.u.values[-1, :], p.boundary.values[-1, :])

    @pytest.mark.parametrize("width,c", [(0.05, 0.3), (0.02, 0.3),
                                         (0.1, 0.0)])
    def test_tiny_square_stays_near_constant(self, width, c):
        s = pde.solve(square_problem(width, c))
        dev = np.max(np.abs(s.u.values - c))
        assert dev <= 10.0 * width ** 2 * np.cosh(2 * c)

    def test_no_interior_maximum(self):
        # the forcing is strictly positive, so the discrete maximum sits on
        # the boundary; the minimum may be interior (and is, for constant
        # data: the solution dips below it)
        s = pde.solve(square_problem(0.4, 0.2))
        u = s.u.values
        boundary_max = max(u[0, :].max(), u[-1, :].max(),
                           u[:, 0].max(), u[:, -1].max())
        assert u[1:-1, 1:-1].max() < boundary_max
        assert u[1:-1, 1:-1].min() < 0.2  # interior dip

    def test_comparison_of_nested_boundary_data(self):
        s1 = pde.solve(square_problem(0.4, 0.2))
        s2 = pde.solve(square_problem(0.4, 0.3))
        assert np.all(s2.u.values - s1.u.values >= -1e-12)

    def test_wide_zero_boundary_diverges(self):
        # symmetric zero-boundary profiles cease to exist near width 1.2497
        with pytest.raises(NewtonDiverged):
            pde.solve(strip_problem(1.4, 0.0))

    @pytest.mark.parametrize("c", [0.0, 3.0])
    def test_beyond_universal_width_diverges(self, c):
        # width 2.9 exceeds the widest strip any profile admits (about
        # 2.858, attained by a symmetric profile with center value -0.39),
        # and in particular 2 delta(0) = 2.622
        with pytest.raises(NewtonDiverged):
            pde.solve(strip_problem(2.9, c))

    def test_nan_guess_rejected(self):
        p = square_problem(0.4, 0.0)
        bad = np.zeros(p.spec.shape)
        bad[3, 3] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            pde.PdeProblem(spec=p.spec, boundary=p.boundary,
                           initial_guess=ScalarField(p.spec, bad))


class TestResidual:
    def test_matches_definition(self, sol0):
        s = pde.solve(pde.invariant_strip_problem(sol0, 0.8, nx=33, ny=32))
        spec = s.spec
        lap = (diff2(s.u.values, spec.hx, axis=0)
               + diff2(s.u.values, spec.hy, axis=1, periodic=True))
        r = np.abs(lap - 2.0 * np.cosh(2.0 * s.u.values))
        assert pde.residual(s) == np.max(r[spec.interior_mask()])


class TestHarmonicExtension:
    def test_reproduces_linear_data(self):
        spec = GridSpec(nx=17, ny=17, hx=1 / 16, hy=1 / 16, origin=(0, 0),
                        periodic_y=False)
        lin = ScalarField.from_function(spec, lambda x, y: 0.3 * x - 0.2 * y + 0.1)
        he = pde.harmonic_extension(spec, lin)
        assert np.max(np.abs(he.values - lin.values)) <= 1e-11


class TestContinuation:
    def test_invariant_family(self, sol0):
        p = pde.invariant_strip_problem(sol0, 0.2, nx=33, ny=32)
        res = pde.continuation(p, [0.2, 0.4, 0.6])
        assert res.widths == (0.2, 0.4, 0.6)
        assert res.diverged_at is None
        for s in res.solutions:
            assert pde.residual(s) <= 1e-10

    def test_empty_width_list(self, sol0):
        p = pde.invariant_strip_problem(sol0, 0.2, nx=33, ny=32)
        res = pde.continuation(p, [])
        assert res.widths == () and res.solutions == ()
        assert res.diverged_at is None

    def test_truncates_at_divergence(self):
        res = pde.continuation(strip_problem(0.8, 0.0),
                               [0.8, 1.0, 1.2, 1.4])
        assert res.widths == (0.8, 1.0, 1.2)
        assert res.diverged_at == 1.4
        assert res.last_residual is not None and res.last_residual > 0.1

    def test_rejects_unsorted_widths(self, sol0):
        p = pde.invariant_strip_problem(sol0, 0.2, nx=33, ny=32)
        with pytest.raises(ValueError, match="increasing"):
            pde.continuation(p, [0.4, 0.3])


class TestInvariantStripProblem:
    def test_rejects_width_at_maximal_strip(self, sol0):
        with pytest.raises(ValueError):
            pde.invariant_strip_problem(sol0, 2.0 * sol0.delta_est + 0.1,
                                        nx=33, ny=32)

    def test_newton_params_validation(self):
        with pytest.raises(ValueError):
            pde.NewtonParams(tol_residual=-1.0)
        with pytest.raises(ValueError):
            pde.NewtonParams(damping=1.5)
