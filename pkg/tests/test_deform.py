"""Zero-locus detection and the curvature-opening field constructions."""

import numpy as np
import pytest

from minsurf.fields import GridSpec, ScalarField
from minsurf import deform
from minsurf.geometry import SurfaceData
from minsurf.errors import (
    BallExceedsChart,
    ClosednessViolation,
    NonGenericCurve,
    OverlappingNeighbourhoods,
    WrongHolonomyClass,
    ZeroHolonomyInTranslationCase,
)


# ---------------------------------------------------------------------------
# primitives


class TestSmoothstep:
    def test_endpoint_plateaus_exact(self):
        assert deform.smoothstep(-0.2) == 0.0
        assert deform.smoothstep(0.0) == 0.0
        assert deform.smoothstep(1.0) == 1.0
        assert deform.smoothstep(1.3) == 1.0

    def test_midpoint_and_monotonicity(self):
        t = np.linspace(0, 1, 101)
        s = deform.smoothstep(t)
        assert s[50] == pytest.approx(0.5, abs=1e-12)
        assert np.all(np.diff(s) >= 0)

    def test_flat_derivatives_at_ends(self):
        h = 1e-4
        for a in (0.0, 1.0):
            d = (deform.smoothstep(a + h) - deform.smoothstep(a - h)) / (2 * h)
            assert abs(d) <= 1e-6


class TestBumpProfile:
    def test_plateau_and_support(self):
        r = 0.4
        d = np.array([0.0, 0.19, 0.2, 0.3, 0.4, 0.5])
        v = deform.bump_profile(d, r)
        assert v[0] == 1.0 and v[1] == 1.0 and v[2] == 1.0
        assert 0.0 < v[3] < 1.0
        assert v[4] == 0.0 and v[5] == 0.0


class TestPointDistance:
    def test_periodic_wrap(self):
        spec = GridSpec(nx=5, ny=10, hx=0.1, hy=0.1, origin=(0.0, 0.0),
                        periodic_y=True)
        d = deform.point_distance(spec, (0.2, 0.05))
        # node y = 0.95 is 0.1 away through the wrap, not 0.9
        j = 9  # y = 0.9
        i = 2  # x = 0.2
        assert d[i, j] == pytest.approx(0.15, abs=1e-12)


# ---------------------------------------------------------------------------
# zero locus


class TestDetectZ:
    def test_invariant_chart_axis_curve(self, chart64):
        comps = deform.detect_z(chart64)
        assert len(comps) == 1
        c = comps[0]
        assert c.kind == "Curve" and c.closed
        assert len(c.nodes) == 64  # one full periodic column
        assert c.center[0] == pytest.approx(0.0, abs=1e-12)
        assert c.line_deviation == pytest.approx(0.0, abs=1e-12)

    def test_coarse_tolerance_band_is_thinned(self, chart64):
        # tol far above the node values of the neighbouring columns turns
        # the locus into a band several nodes wide; classification must
        # still see one closed straight circle, not the band
        comps = deform.detect_z(chart64, tol_z=1e-3)
        assert len(comps) == 1
        c = comps[0]
        assert c.kind == "Curve" and c.closed
        assert len(c.nodes) == 64
        assert c.line_deviation == pytest.approx(0.0, abs=1e-12)
        assert 0.0 <= c.center[1] < 1.0

    def test_positive_profile_has_empty_locus(self, sol05):
        from minsurf.invariant_ode import to_surface
        spec = GridSpec(nx=33, ny=32, hx=1 / 32, hy=1 / 32,
                        origin=(-0.5, 0.0), periodic_y=True)
        s = to_surface(sol05, spec)
        assert deform.detect_z(s) == []

    def test_isolated_point(self):
        spec = GridSpec(nx=65, ny=64, hx=1 / 64, hy=1 / 64,
                        origin=(-0.5, 0.0), periodic_y=True)
        u = ScalarField.from_function(
            spec, lambda x, y: 2.0 * (x ** 2 + (y - 0.5) ** 2))
        comps = deform.detect_z(SurfaceData(u))
        assert len(comps) == 1
        c = comps[0]
        assert c.kind == "Point"
        assert np.allclose(c.center, (0.0, 0.5))
        assert c.diameter == 0.0

    def test_straight_curve_fails_genericity(self, chart64):
        c = deform.detect_z(chart64)[0]
        verdict = deform.genericity_check(c)
        assert not verdict
        assert verdict.reason == "NonGenericCurve"
        assert verdict.line_deviation <= verdict.tol_line

    def test_genericity_rejects_points(self):
        spec = GridSpec(nx=65, ny=64, hx=1 / 64, hy=1 / 64,
                        origin=(-0.5, 0.0), periodic_y=True)
        u = ScalarField.from_function(
            spec, lambda x, y: 2.0 * (x ** 2 + (y - 0.5) ** 2))
        c = deform.detect_z(SurfaceData(u))[0]
        with pytest.raises(ValueError):
            deform.genericity_check(c)


# ---------------------------------------------------------------------------
# point construction


class TestBuildPointF:
    def test_plateau_is_exact_quadratic(self, chart64):
        spec = chart64.spec
        center, r = (0.0, 0.5), 0.45
        f = deform.build_point_f(center, r, spec)
        X, Y = spec.nodes()
        quad = (-(X - 0.0) ** 2 + (Y - 0.5) ** 2) / 2.0
        d = deform.point_distance(spec, center)
        inner = d <= r / 2
        assert np.array_equal(f.values[inner], quad[inner])

    def test_support_is_the_ball(self, chart64):
        f = deform.build_point_f((0.0, 0.5), 0.45, chart64.spec)
        d = deform.point_distance(chart64.spec, (0.0, 0.5))
        assert np.all(f.values[d >= 0.45] == 0.0)

    def test_center_hessian(self, chart64):
        spec = chart64.spec
        f = deform.build_point_f((0.0, 0.5), 0.45, spec)
        i, j = 32, 32  # node at the center
        h2 = spec.hx ** 2
        fxx = (f.values[i + 1, j] - 2 * f.values[i, j] + f.values[i - 1, j]) / h2
        fyy = (f.values[i, j + 1] - 2 * f.values[i, j] + f.values[i, j - 1]) / h2
        assert fxx == pytest.approx(-1.0, abs=1e-10)
        assert fyy == pytest.approx(1.0, abs=1e-10)

    def test_ball_must_fit(self, chart64):
        with pytest.raises(BallExceedsChart):
            deform.build_point_f((0.4, 0.5), 0.2, chart64.spec)


# ---------------------------------------------------------------------------
# moment system


def graph_samples(n=4097):
    xs = np.linspace(0.0, 1.0, n)
    return xs, 0.3 * xs * (1.0 - xs)


class TestSolveXi:
    def test_moment_conditions(self):
        xs, hs = graph_samples()
        res = deform.solve_xi(xs, hs, 0.2, -0.1)
        assert np.max(np.abs(res.residual_sample)) <= 1e-10
        assert np.max(np.abs(res.residual_refined)) <= 1e-8

    def test_frozen_coefficients(self):
        xs, hs = graph_samples()
        res = deform.solve_xi(xs, hs, 0.2, -0.1)
        assert res.coefficients == pytest.approx((18.919182, -17.117356),
                                                 abs=1e-5)
        assert res.placement_index == 0
        assert res.centers == pytest.approx((1 / 3, 2 / 3))

    def test_support_and_antiderivative(self):
        xs, hs = graph_samples()
        res = deform.solve_xi(xs, hs, 0.2, -0.1)
        assert res.func.xi(-0.01) == 0.0
        assert res.func.xi(1.01) == 0.0
        assert res.func.Xi(0.0) == 0.0
        # int xi = -y0
        assert res.func.Xi(1.0) == pytest.approx(0.1, abs=1e-10)

    def test_zero_targets_give_zero_xi(self):
        xs, hs = graph_samples()
        res = deform.solve_xi(xs, hs, 0.0, 0.0)
        assert np.allclose(res.coefficients, 0.0)
        assert np.max(np.abs(res.func.xi(xs))) == 0.0

    def test_affine_graph_is_degenerate(self):
        xs = np.linspace(0.0, 1.0, 4097)
        hs = 0.1 + 0.05 * xs
        with pytest.raises(NonGenericCurve):
            deform.solve_xi(xs, hs, 0.2, -0.1)


# ---------------------------------------------------------------------------
# prescribed-Hessian interpolant


def xi_for_tests():
    xs, hs = graph_samples()
    return (xs, hs), deform.solve_xi(xs, hs, 0.2, -0.1)


class TestBuildG:
    def test_certificate(self):
        h_samples, xi = xi_for_tests()
        dom = GridSpec(nx=141, ny=81, hx=1.4 / 140, hy=2.0 / 80,
                       origin=(-0.2, -1.0), periodic_y=False)
        g = deform.build_G(h_samples, xi, dom)
        cert = g.certificate
        assert cert["left_slab_residual"] == 0.0
        assert cert["right_slab_constancy"] <= 1e-10
        assert cert["byparts_residual"] <= 1e-10
        # the on-curve probe certifies the Hessian to 10 h^2 of its own step
        assert cert["curve_hessian_residual"] <= 10.0 * cert["curve_hessian_step"] ** 2

    def test_right_slab_is_shifted_template(self):
        h_samples, xi = xi_for_tests()
        dom = GridSpec(nx=141, ny=81, hx=1.4 / 140, hy=2.0 / 80,
                       origin=(-0.2, -1.0), periodic_y=False)
        g = deform.build_G(h_samples, xi, dom)
        ys = np.linspace(-0.9, 0.9, 7)
        xs = np.full_like(ys, 1.25)
        vals = g.G(xs, ys)
        template = (-(xs - 0.2) ** 2 + (ys + 0.1) ** 2) / 2.0
        dev = vals - template - g.constant
        assert np.max(np.abs(dev)) <= 1e-10

    def test_inconsistent_antiderivative_rejected(self):
        (h_samples, xi) = xi_for_tests()
        broken = deform.XiFunction(
            xi=xi.func.xi,
            xi_prime=xi.func.xi_prime,
            Xi=lambda x: 0.9 * xi.func.Xi(x),
            support=xi.func.support,
        )
        dom = GridSpec(nx=41, ny=21, hx=1.4 / 40, hy=2.0 / 20,
                       origin=(-0.2, -1.0), periodic_y=False)
        with pytest.raises(ClosednessViolation):
            deform.build_G(h_samples, broken, dom)


# ---------------------------------------------------------------------------
# tube constructions


def halfturn_tube():
    w = np.pi

    def curve(t):
        t = np.asarray(t, dtype=float)
        return 0.3 * np.stack([np.cos(w * t), np.sin(w * t)], axis=-1)

    def curve_deriv(t):
        t = np.asarray(t, dtype=float)
        return 0.3 * w * np.stack([-np.sin(w * t), np.cos(w * t)], axis=-1)

    return deform.CurveTube(period=1.0, s_bar=0.12, holonomy="halfturn",
                            curve=curve, curve_deriv=curve_deriv)


def translation_tube():
    hol = (1.0, -0.2)

    def curve(t):
        t = np.asarray(t, dtype=float)
        return np.stack([t + 0.02 * np.sin(2 * np.pi * t),
                         -0.2 * t + 0.02 * np.cos(2 * np.pi * t)], axis=-1)

    def curve_deriv(t):
        t = np.asarray(t, dtype=float)
        return np.stack([1.0 + 0.04 * np.pi * np.cos(2 * np.pi * t),
                         -0.2 - 0.04 * np.pi * np.sin(2 * np.pi * t)],
                        axis=-1)

    return deform.CurveTube(period=1.0, s_bar=0.1, holonomy="translation",
                            curve=curve, curve_deriv=curve_deriv,
                            hol_vector=hol)


def tube_spec(ny=128):
    return GridSpec(nx=17, ny=ny, hx=0.16 / 16, hy=1.0 / ny,
                    origin=(-0.08, 0.0), periodic_y=True)


class TestCurveTube:
    def test_rejects_unknown_holonomy(self):
        with pytest.raises(ValueError):
            deform.CurveTube(period=1.0, s_bar=0.1, holonomy="glide",
                             curve=lambda t: t, curve_deriv=lambda t: t)

    def test_equivariance_residuals(self):
        assert halfturn_tube().equivariance_residual() <= 1e-12
        assert translation_tube().equivariance_residual() <= 1e-12


class TestBuildHalfturnF:
    def test_certificate_and_periodicity(self):
        tf = deform.build_halfturn_f(halfturn_tube(), tube_spec(), r=0.06)
        cert = tf.certificate
        assert cert["glue_residual"] <= 1e-12
        assert cert["hessian_residual"] <= 1e-8
        ts = np.linspace(0.0, 1.0, 13)
        dev = np.abs(tf.evaluate(ts + 1.0, 0.03) - tf.evaluate(ts, 0.03))
        assert np.max(dev) <= 1e-12

    def test_transverse_support(self):
        tf = deform.build_halfturn_f(halfturn_tube(), tube_spec(), r=0.06)
        assert np.max(np.abs(tf.evaluate(0.3, 0.07))) == 0.0

    def test_wrong_holonomy_rejected(self):
        with pytest.raises(WrongHolonomyClass):
            deform.build_halfturn_f(translation_tube(), tube_spec(), r=0.06)


@pytest.fixture(scope="module")
def tf():
    return deform.build_translation_f(translation_tube(), tube_spec(256),
                                      r=0.06)


class TestBuildTranslationF:
    def test_periodicity(self, tf):
        ts = np.linspace(0.0, 1.0, 17)
        for s in (0.0, 0.03, -0.05):
            dev = np.abs(tf.evaluate(ts + 1.0, s) - tf.evaluate(ts, s))
            assert np.max(dev) <= 1e-12

    def test_certificate(self, tf):
        cert = tf.certificate
        assert cert["periodicity_residual"] <= 1e-12
        assert cert["curve_hessian_residual"] <= 10.0 * cert["curve_hessian_step"] ** 2
        assert max(abs(v) for v in cert["seam_value_residuals"]) <= 1e-10
        assert max(abs(v) for v in cert["seam_slope_residuals"]) <= 1e-10

    def test_on_curve_hessian_via_flat_core(self, tf):
        # 4th-order probe of the un-bumped plane field along the developing
        # curve, crossing both branch cuts; flat_core's frame puts the graph
        # window at x in [0, delta_c], so undo the shift/flip it applied
        tube = tf.tube
        cert = tf.certificate
        a, b = cert["window"]
        sgn = -1.0 if cert["flipped"] else 1.0
        za = sgn * np.asarray(tube.curve(a), dtype=float)
        margin = 0.45 * min(a, tube.period - b)
        ts = np.linspace(a - margin, b + margin, 33)
        pts = sgn * np.asarray(tube.curve(ts), dtype=float) - za
        hfd = cert["delta_c"] / 4096.0
        gxx = deform._fd4_second(tf.flat_core, pts, hfd, axis=0)
        gyy = deform._fd4_second(tf.flat_core, pts, hfd, axis=1)
        tol = 10.0 * hfd ** 2
        assert np.max(np.abs(gxx + 1.0)) <= tol
        assert np.max(np.abs(gyy - 1.0)) <= tol

    def test_wrong_class_and_zero_holonomy(self):
        with pytest.raises(WrongHolonomyClass):
            deform.build_translation_f(halfturn_tube(), tube_spec(256),
                                       r=0.06)
        t = translation_tube()
        zero = deform.CurveTube(period=1.0, s_bar=0.1, holonomy="translation",
                                curve=lambda s: np.zeros(
                                    np.shape(s) + (2,)) if np.ndim(s) else np.zeros(2),
                                curve_deriv=t.curve_deriv,
                                hol_vector=(0.0, 0.0))
        with pytest.raises(ZeroHolonomyInTranslationCase):
            deform.build_translation_f(zero, tube_spec(256), r=0.06)

    def test_broken_equivariance_rejected(self):
        t = translation_tube()
        lying = deform.CurveTube(period=1.0, s_bar=0.1,
                                 holonomy="translation", curve=t.curve,
                                 curve_deriv=t.curve_deriv,
                                 hol_vector=(0.5, -0.2))
        with pytest.raises(WrongHolonomyClass, match="equivariance"):
            deform.build_translation_f(lying, tube_spec(256), r=0.06)


# ---------------------------------------------------------------------------
# chart-level assembly


class TestAssembleF:
    def point_chart(self):
        spec = GridSpec(nx=65, ny=64, hx=1 / 64, hy=1 / 64,
                        origin=(-0.5, 0.0), periodic_y=True)
        u = ScalarField.from_function(
            spec, lambda x, y: 2.0 * (x ** 2 + (y - 0.5) ** 2))
        return SurfaceData(u)

    def test_point_component_field(self):
        s = self.point_chart()
        comps = deform.detect_z(s)
        f = deform.assemble_f(s, comps, r=0.3)
        direct = deform.build_point_f((0.0, 0.5), 0.3, s.spec)
        assert np.array_equal(f.values, direct.values)

    def test_winding_curve_needs_tube_construction(self, chart64):
        comps = deform.detect_z(chart64)
        with pytest.raises(WrongHolonomyClass):
            deform.assemble_f(chart64, comps, r=0.2)

    def test_overlap_rejected(self):
        spec = GridSpec(nx=65, ny=64, hx=1 / 64, hy=1 / 64,
                        origin=(-0.5, 0.0), periodic_y=True)
        u = ScalarField.from_function(
            spec,
            lambda x, y: 20.0 * (x ** 2 + (y - 0.25) ** 2)
            * (x ** 2 + (y - 0.5) ** 2))
        comps = deform.detect_z(SurfaceData(u))
        assert len(comps) == 2
        # centers sit 0.25 apart; r = 0.15 needs a gap of 0.3
        with pytest.raises(OverlappingNeighbourhoods):
            deform.assemble_f(SurfaceData(u), comps, r=0.15)
