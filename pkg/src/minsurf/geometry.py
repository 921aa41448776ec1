"""Pointwise geometry of a minimal surface chart in hyperbolic 3-space.

A chart is carried by a single scalar field u on a flat coordinate grid.
In these coordinates the fundamental forms of the surface are

    I  = e^{2u} (dx^2 + dy^2),     II = dx^2 - dy^2,

so the shape operator is B = I^{-1} II = e^{-2u} diag(1, -1), the principal
curvatures are +-e^{-2u}, the mean curvature vanishes identically, and the
Gauss equation reduces to the cosh-Gordon equation

    Delta u = 2 cosh(2u).

The locus Z = {u = 0} is where |principal curvature| = 1; on a weakly bounded
chart (u >= 0) it is the closure of the curvature-extreme set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ComplexEigenvalues
from .fields import GridSpec, OperatorField, ScalarField, diff1, diff2

__all__ = [
    "SurfaceData",
    "PrincipalCurvatures",
    "Christoffels",
    "embedding_data",
    "third_form",
    "principal_curvatures",
    "gauss_residual",
    "christoffel",
]

WEAK_BOUND_TOL = 1e-12
UMBILIC_TOL = 1e-12


@dataclass(frozen=True)
class SurfaceData:
    """A chart: conformal factor exponent u, with an optional sign certificate.

    weakly_bounded promises u >= 0 up to rounding; constructors that obtain u
    from the invariant profile with v0 >= 0 set it.
    """

    u: ScalarField
    weakly_bounded: bool = False

    def __post_init__(self):
        if self.weakly_bounded and float(self.u.values.min()) < -WEAK_BOUND_TOL:
            raise ValueError(
                f"weakly_bounded set but min u = {self.u.values.min():.3e}"
            )

    @property
    def spec(self) -> GridSpec:
        return self.u.spec


def embedding_data(s: SurfaceData) -> tuple[OperatorField, OperatorField, OperatorField]:
    """First form I, second form II, shape operator B = I^{-1} II.

    All three are returned as coefficient fields in the chart frame
    (I and II as bilinear-form coefficients, B as an endomorphism).
    """
    spec = s.spec
    e2u = np.exp(2.0 * s.u.values)
    one = np.ones(spec.shape)
    I = OperatorField.from_diag(spec, e2u, e2u)
    II = OperatorField.from_diag(spec, one, -one)
    B = OperatorField.from_diag(spec, 1.0 / e2u, -1.0 / e2u)
    return I, II, B


def third_form(s: SurfaceData) -> OperatorField:
    """III(X, Y) = I(BX, BY) = e^{-2u} (dx^2 + dy^2)."""
    spec = s.spec
    em2u = np.exp(-2.0 * s.u.values)
    return OperatorField.from_diag(spec, em2u, em2u)


@dataclass(frozen=True)
class PrincipalCurvatures:
    """Eigen-data of a shape operator field.

    e_plus / e_minus are unit eigenvectors (w.r.t. the supplied metric, else
    Euclidean), fixed by the sign convention: nonnegative x-component, ties
    broken by nonnegative y-component. `defined` is False at (near-)umbilic
    nodes, where the frame entries fall back to the coordinate axes.
    """

    lambda_plus: ScalarField
    lambda_minus: ScalarField
    e_plus: np.ndarray = field(repr=False)
    e_minus: np.ndarray = field(repr=False)
    defined: np.ndarray = field(repr=False)


def _eigvec(a, b, c, d, lam) -> np.ndarray:
    """Nullspace direction of ([[a,b],[c,d]] - lam) for stacked scalars."""
    # rows of (A - lam): (a-lam, b) and (c, d-lam); the nullspace vector can be
    # read off either row, pick the numerically larger candidate
    v1 = np.stack([b, lam - a], axis=-1)
    v2 = np.stack([lam - d, c], axis=-1)
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    v = np.where((n1 >= n2)[..., None], v1, v2)
    n = np.linalg.norm(v, axis=-1)
    deg = n < 1e-300  # exactly umbilic node, caller masks it out
    v = np.where(deg[..., None], np.array([1.0, 0.0]), v / np.where(deg, 1.0, n)[..., None])
    return v


def _metric_normalize(v: np.ndarray, metric: OperatorField | None) -> np.ndarray:
    if metric is None:
        return v / np.linalg.norm(v, axis=-1, keepdims=True)
    g = metric.mat
    q = (
        g[..., 0, 0] * v[..., 0] ** 2
        + (g[..., 0, 1] + g[..., 1, 0]) * v[..., 0] * v[..., 1]
        + g[..., 1, 1] * v[..., 1] ** 2
    )
    return v / np.sqrt(q)[..., None]


def _fix_sign(v: np.ndarray) -> np.ndarray:
    flip = (v[..., 0] < 0) | ((v[..., 0] == 0) & (v[..., 1] < 0))
    return np.where(flip[..., None], -v, v)


def principal_curvatures(
    B: OperatorField,
    metric: OperatorField | None = None,
    disc_tol: float = UMBILIC_TOL,
) -> PrincipalCurvatures:
    """Eigenvalues/eigenframe of the shape operator field.

    Raises ComplexEigenvalues if the discriminant tr^2 - 4 det drops below
    -disc_tol anywhere; near-umbilic nodes (discriminant below +disc_tol)
    keep their eigenvalues but are flagged undefined in the frame.
    """
    tr = B.trace()
    det = B.det()
    disc = tr * tr - 4.0 * det
    dmin = float(disc.min())
    if dmin < -disc_tol:
        raise ComplexEigenvalues(dmin)
    sq = np.sqrt(np.maximum(disc, 0.0))
    lam_p = 0.5 * (tr + sq)
    lam_m = 0.5 * (tr - sq)
    defined = disc > disc_tol

    a, b, c, d = B.a11, B.a12, B.a21, B.a22
    e_p = _fix_sign(_metric_normalize(_eigvec(a, b, c, d, lam_p), metric))
    e_m = _fix_sign(_metric_normalize(_eigvec(a, b, c, d, lam_m), metric))
    axis_x = np.broadcast_to(np.array([1.0, 0.0]), e_p.shape)
    axis_y = np.broadcast_to(np.array([0.0, 1.0]), e_m.shape)
    e_p = np.where(defined[..., None], e_p, _metric_normalize(axis_x.copy(), metric))
    e_m = np.where(defined[..., None], e_m, _metric_normalize(axis_y.copy(), metric))

    spec = B.spec
    return PrincipalCurvatures(
        lambda_plus=ScalarField(spec, lam_p),
        lambda_minus=ScalarField(spec, lam_m),
        e_plus=e_p,
        e_minus=e_m,
        defined=defined,
    )


def gauss_residual(s: SurfaceData) -> ScalarField:
    """Delta_h u - 2 cosh(2u) on the full grid.

    Interior nodes use centered stencils; non-periodic edges use one-sided
    second-order stencils, so contract tolerances apply to the interior.
    """
    spec = s.spec
    u = s.u.values
    lap = diff2(u, spec.hx, axis=0) + diff2(u, spec.hy, axis=1, periodic=spec.periodic_y)
    return ScalarField(spec, lap - 2.0 * np.cosh(2.0 * u))


@dataclass(frozen=True)
class Christoffels:
    """Christoffel symbols of I = e^{2u}(dx^2+dy^2); only 6 are independent.

    Component naming: x_xy is Gamma^x_{xy}, etc. For a conformal metric these
    are first derivatives of u:

        Gamma^x_xx =  u_x   Gamma^y_xx = -u_y
        Gamma^x_xy =  u_y   Gamma^y_xy =  u_x
        Gamma^x_yy = -u_x   Gamma^y_yy =  u_y
    """

    spec: GridSpec
    x_xx: np.ndarray = field(repr=False)
    y_xx: np.ndarray = field(repr=False)
    x_xy: np.ndarray = field(repr=False)
    y_xy: np.ndarray = field(repr=False)
    x_yy: np.ndarray = field(repr=False)
    y_yy: np.ndarray = field(repr=False)


def christoffel(s: SurfaceData) -> Christoffels:
    spec = s.spec
    ux = diff1(s.u.values, spec.hx, axis=0)
    uy = diff1(s.u.values, spec.hy, axis=1, periodic=spec.periodic_y)
    return Christoffels(
        spec=spec, x_xx=ux, y_xx=-uy, x_xy=uy, y_xy=ux, x_yy=-ux, y_yy=uy
    )
