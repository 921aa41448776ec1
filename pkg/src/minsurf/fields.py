"""Grids, scalar/operator fields, finite differences, CSV serialization.

Conventions used everywhere in the package:

  * values[i, j] is the sample at node (x_i, y_j) with x_i = origin_x + i*hx,
    y_j = origin_y + j*hy ("ij" indexing, x = axis 0, y = axis 1);
  * the x direction is never periodic; the y direction is periodic iff
    spec.periodic_y, in which case y_j + ny*hy is identified with y_j;
  * derivative helpers return full-grid arrays, second-order accurate in the
    interior (central) and at non-periodic edges (one-sided);
  * CSV files carry the grid as a JSON comment in the first line and node
    values at 17 significant digits, enough to round-trip float64 exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "OperatorField",
    "diff1",
    "diff2",
    "laplacian",
    "sup_interior",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on a rectangle or flat cylinder."""

    nx: int
    ny: int
    hx: float
    hy: float
    origin: tuple[float, float] = (0.0, 0.0)
    periodic_y: bool = False

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs nx, ny >= 3, got {self.nx} x {self.ny}")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.hx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.hy * np.arange(self.ny)

    @property
    def width(self) -> float:
        """Extent in x, (nx-1)*hx."""
        return (self.nx - 1) * self.hx

    @property
    def period_y(self) -> float:
        """Circumference ny*hy; only meaningful when periodic_y."""
        return self.ny * self.hy

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Full coordinate arrays X, Y of shape (nx, ny)."""
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def interior_mask(self) -> np.ndarray:
        """True at nodes not subject to Dirichlet data / one-sided stencils."""
        m = np.ones(self.shape, dtype=bool)
        m[0, :] = False
        m[-1, :] = False
        if not self.periodic_y:
            m[:, 0] = False
            m[:, -1] = False
        return m

    def to_json_dict(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "hx": self.hx,
            "hy": self.hy,
            "origin": [self.origin[0], self.origin[1]],
            "periodic_y": self.periodic_y,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "GridSpec":
        return cls(
            nx=int(d["nx"]),
            ny=int(d["ny"]),
            hx=float(d["hx"]),
            hy=float(d["hy"]),
            origin=tuple(d.get("origin", (0.0, 0.0))),
            periodic_y=bool(d.get("periodic_y", False)),
        )


def _as_grid_array(spec: GridSpec, values, name: str) -> np.ndarray:
    a = np.array(values, dtype=float, copy=True)
    if a.shape != spec.shape:
        raise ValueError(f"{name} has shape {a.shape}, grid wants {spec.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalarField:
    """Nodal samples of a scalar function on a grid."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_grid_array(self.spec, self.values, "values"))

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable) -> "ScalarField":
        X, Y = spec.nodes()
        return cls(spec, np.broadcast_to(fn(X, Y), spec.shape))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    def sup(self, interior_only: bool = False) -> float:
        if interior_only:
            return float(np.max(np.abs(self.values[self.spec.interior_mask()])))
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        return ScalarField(self.spec, self.values + _coerce(self.spec, other))

    def __sub__(self, other):
        return ScalarField(self.spec, self.values - _coerce(self.spec, other))

    def __mul__(self, other):
        return ScalarField(self.spec, self.values * _coerce(self.spec, other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.spec, -self.values)

    def to_csv(self, path) -> None:
        _write_csv(path, self.spec, {"v": self.values})

    @classmethod
    def from_csv(cls, path) -> "ScalarField":
        spec, cols = _read_csv(path, ["v"])
        return cls(spec, cols["v"])


def _coerce(spec: GridSpec, other) -> np.ndarray | float:
    if isinstance(other, ScalarField):
        if other.spec != spec:
            raise ValueError("field grids differ")
        return other.values
    return other


@dataclass(frozen=True)
class OperatorField:
    """Field of real 2x2 matrices (endomorphisms in chart coordinates).

    Stored as one (nx, ny, 2, 2) array so pointwise products and inverses
    broadcast through numpy's stacked-matrix routines.
    """

    spec: GridSpec
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.mat, dtype=float, copy=True)
        if a.shape != (self.spec.nx, self.spec.ny, 2, 2):
            raise ValueError(f"operator field has shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator field contains non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "mat", a)

    @classmethod
    def from_components(cls, spec: GridSpec, a11, a12, a21, a22) -> "OperatorField":
        m = np.empty((spec.nx, spec.ny, 2, 2))
        m[..., 0, 0] = a11
        m[..., 0, 1] = a12
        m[..., 1, 0] = a21
        m[..., 1, 1] = a22
        return cls(spec, m)

    @classmethod
    def from_diag(cls, spec: GridSpec, d1, d2) -> "OperatorField":
        return cls.from_components(spec, d1, np.zeros(spec.shape), np.zeros(spec.shape), d2)

    @classmethod
    def identity(cls, spec: GridSpec) -> "OperatorField":
        one = np.ones(spec.shape)
        return cls.from_diag(spec, one, one)

    @property
    def a11(self) -> np.ndarray:
        return self.mat[..., 0, 0]

    @property
    def a12(self) -> np.ndarray:
        return self.mat[..., 0, 1]

    @property
    def a21(self) -> np.ndarray:
        return self.mat[..., 1, 0]

    @property
    def a22(self) -> np.ndarray:
        return self.mat[..., 1, 1]

    def trace(self) -> np.ndarray:
        return self.a11 + self.a22

    def det(self) -> np.ndarray:
        return self.a11 * self.a22 - self.a12 * self.a21

    def transpose(self) -> "OperatorField":
        return OperatorField(self.spec, np.swapaxes(self.mat, -1, -2))

    def inverse(self) -> "OperatorField":
        d = self.det()
        if np.any(np.abs(d) < np.finfo(float).tiny):
            raise ZeroDivisionError("operator field is singular at some node")
        inv = np.empty_like(self.mat)
        inv[..., 0, 0] = self.a22
        inv[..., 0, 1] = -self.a12
        inv[..., 1, 0] = -self.a21
        inv[..., 1, 1] = self.a11
        return OperatorField(self.spec, inv / d[..., None, None])

    def is_symmetric(self, tol: float = 1e-14) -> bool:
        return bool(np.max(np.abs(self.a12 - self.a21)) <= tol)

    def __matmul__(self, other: "OperatorField") -> "OperatorField":
        if other.spec != self.spec:
            raise ValueError("operator grids differ")
        return OperatorField(self.spec, self.mat @ other.mat)

    def __add__(self, other: "OperatorField") -> "OperatorField":
        return OperatorField(self.spec, self.mat + other.mat)

    def __sub__(self, other: "OperatorField") -> "OperatorField":
        return OperatorField(self.spec, self.mat - other.mat)

    def __mul__(self, other) -> "OperatorField":
        # scalar, (nx, ny) array, or ScalarField; broadcast over matrix slots
        if isinstance(other, ScalarField):
            other = other.values
        other = np.asarray(other, dtype=float)
        if other.ndim == 2:
            other = other[..., None, None]
        return OperatorField(self.spec, self.mat * other)

    __rmul__ = __mul__

    def __neg__(self) -> "OperatorField":
        return OperatorField(self.spec, -self.mat)

    def sup(self, interior_only: bool = False) -> float:
        """Max over nodes of the entrywise max-abs."""
        a = np.max(np.abs(self.mat), axis=(-1, -2))
        if interior_only:
            a = a[self.spec.interior_mask()]
        return float(np.max(a))

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            self.spec,
            {"a11": self.a11, "a12": self.a12, "a21": self.a21, "a22": self.a22},
        )

    @classmethod
    def from_csv(cls, path) -> "OperatorField":
        spec, cols = _read_csv(path, ["a11", "a12", "a21", "a22"])
        return cls.from_components(spec, cols["a11"], cols["a12"], cols["a21"], cols["a22"])


# ---------------------------------------------------------------------------
# finite differences


def diff1(values: np.ndarray, h: float, axis: int, periodic: bool = False) -> np.ndarray:
    """First derivative, O(h^2): central interior, one-sided non-periodic edges."""
    if periodic:
        return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2.0 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


def diff2(values: np.ndarray, h: float, axis: int, periodic: bool = False) -> np.ndarray:
    """Second derivative, O(h^2): 3-point interior, 4-point one-sided edges."""
    h2 = h * h
    if periodic:
        return (np.roll(values, -1, axis) - 2.0 * values + np.roll(values, 1, axis)) / h2
    out = np.empty_like(values)
    v = np.moveaxis(values, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h2
    if v.shape[0] >= 4:
        o[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
        o[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h2
    else:
        # nx = 3: fall back to the centered stencil evaluated off-center
        o[0] = (v[0] - 2.0 * v[1] + v[2]) / h2
        o[-1] = (v[-1] - 2.0 * v[-2] + v[-3]) / h2
    return out


def laplacian(f: ScalarField) -> ScalarField:
    s = f.spec
    lap = diff2(f.values, s.hx, axis=0) + diff2(f.values, s.hy, axis=1, periodic=s.periodic_y)
    return ScalarField(s, lap)


def sup_interior(f: ScalarField) -> float:
    return f.sup(interior_only=True)


# ---------------------------------------------------------------------------
# CSV: "# {grid json}" header line, then named columns at 17 significant digits


def _write_csv(path, spec: GridSpec, columns: dict[str, np.ndarray]) -> None:
    X, Y = spec.nodes()
    names = list(columns)
    cols = [X.ravel(), Y.ravel()] + [np.asarray(columns[n]).ravel() for n in names]
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(spec.to_json_dict(), sort_keys=True) + "\n")
        fh.write(",".join(["x", "y"] + names) + "\n")
        for row in zip(*cols):
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def _read_csv(path, expected: list[str]) -> tuple[GridSpec, dict[str, np.ndarray]]:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise ValueError(f"{path}: missing grid header line")
        spec = GridSpec.from_json_dict(json.loads(header[2:]))
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if names[:2] != ["x", "y"] or names[2:] != expected:
        raise ValueError(f"{path}: unexpected columns {names}")
    if data.shape[0] != spec.nx * spec.ny:
        raise ValueError(f"{path}: row count {data.shape[0]} != nx*ny")
    out = {}
    for k, name in enumerate(expected):
        out[name] = data[:, 2 + k].reshape(spec.shape)
    return spec, out
