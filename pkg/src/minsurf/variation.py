"""First variation of the fundamental forms under a normal deformation.

For a normal field f nu on a minimal chart, the time derivatives at t = 0 of
the embedding data along the flow sigma + (tf) nu are, in chart coordinates,

    dI/dt   = -2 f II
    dII/dt  = Hess f - f (I + III)          (Hess = covariant Hessian of I)
    dB/dt   = Hess^{(1,1)} f + f (B^2 - Id)

with Hess^{(1,1)} = I^{-1} Hess f.  Because the chart metric is conformal and
II = diag(1, -1), the trace of dB/dt against the eigenframe of B yields the
rate of change of the principal curvatures; on the locus Z = {u = 0} where
B^2 = Id, that rate is just the Hessian diagonal in the eigenframe, which is
what the deformation construction drives negative.

Every formula here is checked against an independent oracle that flows the
immersion by +-t, recovers the forms by finite differences, and central-
differences in t (immersion_fd_rate).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotOnZ
from .fields import OperatorField, ScalarField, diff1, diff2
from .geometry import (
    SurfaceData,
    christoffel,
    embedding_data,
    principal_curvatures,
    third_form,
)
from .immersion import forms_from_immersion, immerse, normal_flow

__all__ = [
    "cov_hessian",
    "hessian_11",
    "metric_rate",
    "metric_inverse_rate",
    "second_form_rate",
    "shape_rate",
    "curvature_rate_at_Z",
    "immersion_fd_rate",
    "VariationReport",
    "variation_report",
]


def _grad(s: SurfaceData, f: ScalarField):
    spec = s.spec
    fx = diff1(f.values, spec.hx, axis=0)
    fy = diff1(f.values, spec.hy, axis=1, periodic=spec.periodic_y)
    return fx, fy

def cov_hessian(s: SurfaceData, f: ScalarField) -> OperatorField:
    """Covariant Hessian (nabla df)_ij = f_,ij - Gamma^k_ij f_,k as a (0,2) field."""
    if f.spec != s.spec:
        raise ValueError("profile lives on a different grid")
    spec = s.spec
    per = spec.periodic_y
    fx, fy = _grad(s, f)
    fxx = diff2(f.values, spec.hx, axis=0)
    fyy = diff2(f.values, spec.hy, axis=1, periodic=per)
    fxy = diff1(fx, spec.hy, axis=1, periodic=per)
    G = christoffel(s)
    Hxx = fxx - (G.x_xx * fx + G.y_xx * fy)
    Hxy = fxy - (G.x_xy * fx + G.y_xy * fy)
    Hyy = fyy - (G.x_yy * fx + G.y_yy * fy)
    return OperatorField.from_components(spec, Hxx, Hxy, Hxy, Hyy)


def hessian_11(s: SurfaceData, f: ScalarField) -> OperatorField:
    """Hessian with one index raised by I^{-1} = e^{-2u} Id."""
    H = cov_hessian(s, f)
    return H * np.exp(-2.0 * s.u.values)


def metric_rate(s: SurfaceData, f: ScalarField) -> OperatorField:
    """dI/dt = -2 f II."""
    _, II, _ = embedding_data(s)
    return II * (-2.0 * f.values)


def metric_inverse_rate(s: SurfaceData, f: ScalarField) -> OperatorField:
    """d(I^{-1})/dt = 2 f B I^{-1} (follows from dI/dt by differentiating I I^{-1})."""
    I, _, B = embedding_data(s)
    return (B @ I.inverse()) * (2.0 * f.values)


def second_form_rate(s: SurfaceData, f: ScalarField) -> OperatorField:
    """dII/dt = Hess f - f (I + III)."""
    I, _, _ = embedding_data(s)
    III = third_form(s)
    return cov_hessian(s, f) - (I + III) * f.values


def shape_rate(s: SurfaceData, f: ScalarField) -> OperatorField:
    """dB/dt = Hess^{(1,1)} f + f (B^2 - Id).

    Identical to d(I^{-1})/dt II + I^{-1} dII/dt by the product rule; the
    equality of the two routes is a property test, not an assumption.
    """
    _, _, B = embedding_data(s)
    eye = OperatorField.identity(s.spec)
    return hessian_11(s, f) + (B @ B - eye) * f.values


def curvature_rate_at_Z(
    s: SurfaceData,
    f: ScalarField,
    node: tuple[int, int],
    tol_z: float = 1e-8,
) -> tuple[float, float]:
    """Rates of the principal curvatures at a zero-locus node.

    At u = 0 the shape operator is diag(1, -1) with I-unit eigenframe e+, e-;
    the eigenvalue rates are the diagonal Hessian entries
    (d lambda_+/dt, d lambda_-/dt) = (Hess f(e+, e+), Hess f(e-, e-)).
    Raises NotOnZ when |u(node)| > tol_z.
    """
    i, j = node
    uval = float(s.u.values[i, j])
    if abs(uval) > tol_z:
        raise NotOnZ(f"u[{i},{j}] = {uval:.3e} exceeds tol_z = {tol_z:.1e}")
    I, _, B = embedding_data(s)
    frames = principal_curvatures(B, metric=I)
    H = cov_hessian(s, f).mat[i, j]
    ep = frames.e_plus[i, j]
    em = frames.e_minus[i, j]
    rate_p = float(ep @ H @ ep)
    rate_m = float(em @ H @ em)
    return rate_p, rate_m


def immersion_fd_rate(
    s: SurfaceData,
    f: ScalarField,
    t: float = 1e-5,
    which: str = "B",
    order: str = "rows_then_columns",
) -> OperatorField:
    """Oracle: central difference in t of forms recovered from flowed immersions.

    Flows the immersed chart by +-t f along the normal, recovers (I, II, B)
    by finite differences on each flowed surface, and differences in t.  The
    spatial FD error is O(h^2) but identical on both branches to leading
    order, so it cancels in the t-difference; the result is accurate to
    O(t^2) + O(t h^2) and serves as the independent check of the formulas.
    """
    pick = {"I": 0, "II": 1, "B": 2}
    if which not in pick:
        raise ValueError(f"which must be one of {list(pick)}, got {which!r}")
    if not t > 0:
        raise ValueError("t must be positive")
    g = immerse(s, order=order)
    plus = forms_from_immersion(normal_flow(g, f, +t))[pick[which]]
    minus = forms_from_immersion(normal_flow(g, f, -t))[pick[which]]
    return (plus - minus) * (0.5 / t)


@dataclass(frozen=True)
class VariationReport:
    """Formula-vs-oracle comparison for one variation formula."""

    name: str
    sup_discrepancy: float
    t: float
    h: float
    formula: OperatorField = field(repr=False)
    fd: OperatorField = field(repr=False)

    def summary(self) -> dict:
        return {
            "formula": self.name,
            "sup_discrepancy": self.sup_discrepancy,
            "fd_step_t": self.t,
            "grid_h": self.h,
        }


_FORMULAS = {
    "I": metric_rate,
    "II": second_form_rate,
    "B": shape_rate,
}


def variation_report(
    s: SurfaceData,
    f: ScalarField,
    which: str = "B",
    t: float = 1e-5,
) -> VariationReport:
    """Evaluate one variation formula and its immersion oracle, interior sup.

    Symmetric (0,2) rates are compared entrywise against the unsymmetrized
    oracle output, so the reported discrepancy includes the oracle's own
    off-diagonal O(h^2) asymmetry; tolerances are stated for the interior.
    """
    if which not in _FORMULAS:
        raise ValueError(f"which must be one of {list(_FORMULAS)}, got {which!r}")
    formula = _FORMULAS[which](s, f)
    fd = immersion_fd_rate(s, f, t=t, which=which)
    diff = formula - fd
    return VariationReport(
        name=which,
        sup_discrepancy=diff.sup(interior_only=True),
        t=t,
        h=max(s.spec.hx, s.spec.hy),
        formula=formula,
        fd=fd,
    )
