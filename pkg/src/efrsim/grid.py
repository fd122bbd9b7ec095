"""Staggered-grid fields and the discrete operators acting on them.

All operators are matrix-free stencils with periodic wraparound (``np.roll``).
The structure they are built to preserve, under the plain unweighted dot
product on flattened fields:

* ``gradient`` is exactly minus the transpose of ``divergence``,
* ``diffusion`` is symmetric and negative semi-definite,
* ``convection`` is energy-neutral, ``u . C(u) u = 0``, for every field,
* ``curl`` of a ``gradient`` vanishes identically.

Fields are plain dataclasses around (N, N) float64 arrays and are treated as
immutable values: every operator returns a new field, so distinct fields can
be processed concurrently without locking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, ShapeMismatch

Array = np.ndarray


@dataclass(frozen=True)
class StaggeredGrid:
    """Uniform N x N staggered (MAC) layout on a periodic square.

    Field arrays are indexed ``[i, j]`` with ``i`` along x and ``j`` along y,
    grid spacing ``h = domain_length / n``:

    * ``u[i, j]`` x-velocity on the vertical face at ``((i+1)h, (j+1/2)h)``
    * ``v[i, j]`` y-velocity on the horizontal face at ``((i+1/2)h, (j+1)h)``
    * ``p[i, j]`` pressure at the cell center ``((i+1/2)h, (j+1/2)h)``
    * ``w[i, j]`` vorticity at the cell corner ``((i+1)h, (j+1)h)``
    """

    n: int
    domain_length: float = 1.0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"need at least 4 cells per side, got {self.n}")
        if not self.domain_length > 0:
            raise ValueError("domain length must be positive")

    @property
    def h(self) -> float:
        return self.domain_length / self.n

    @property
    def n_velocity(self) -> int:
        """Number of velocity unknowns, 2 N^2."""
        return 2 * self.n * self.n

    @property
    def area(self) -> float:
        return self.domain_length ** 2


def _as_square(a, n, name):
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (n, n):
        raise ShapeMismatch(f"{name} must have shape {(n, n)}, got {a.shape}")
    return a


def check_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatch(f"fields on different grids: {a.grid} vs {b.grid}")


@dataclass
class VelocityField:
    """Face-located discrete velocity; ``u`` on vertical, ``v`` on horizontal faces."""

    u: Array
    v: Array
    grid: StaggeredGrid

    def __post_init__(self):
        self.u = _as_square(self.u, self.grid.n, "u")
        self.v = _as_square(self.v, self.grid.n, "v")

    @classmethod
    def zeros(cls, grid: StaggeredGrid) -> "VelocityField":
        n = grid.n
        return cls(np.zeros((n, n)), np.zeros((n, n)), grid)

    def copy(self) -> "VelocityField":
        return VelocityField(self.u.copy(), self.v.copy(), self.grid)

    def __add__(self, other: "VelocityField") -> "VelocityField":
        check_same_grid(self, other)
        return VelocityField(self.u + other.u, self.v + other.v, self.grid)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        check_same_grid(self, other)
        return VelocityField(self.u - other.u, self.v - other.v, self.grid)

    def __mul__(self, scalar: float) -> "VelocityField":
        return VelocityField(self.u * scalar, self.v * scalar, self.grid)

    __rmul__ = __mul__

    def dot(self, other: "VelocityField") -> float:
        """Plain unweighted dot product over both components."""
        check_same_grid(self, other)
        return float(np.sum(self.u * other.u) + np.sum(self.v * other.v))

    def norm_sq(self) -> float:
        return float(np.sum(self.u * self.u) + np.sum(self.v * self.v))

    def inf_norm(self) -> float:
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.v))))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))

    def flatten(self) -> Array:
        """Concatenate components in C order: all of u, then all of v."""
        return np.concatenate([self.u.ravel(), self.v.ravel()])

    @classmethod
    def from_flat(cls, vec: Array, grid: StaggeredGrid) -> "VelocityField":
        n = grid.n
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != 2 * n * n:
            raise ShapeMismatch(f"flat velocity must have {2 * n * n} entries")
        return cls(vec[: n * n].reshape(n, n).copy(),
                   vec[n * n:].reshape(n, n).copy(), grid)


@dataclass
class PressureField:
    """Cell-centered scalar field (pressure, or any center-located quantity)."""

    values: Array
    grid: StaggeredGrid

    def __post_init__(self):
        self.values = _as_square(self.values, self.grid.n, "values")

    @classmethod
    def zeros(cls, grid: StaggeredGrid) -> "PressureField":
        return cls(np.zeros((grid.n, grid.n)), grid)

    def copy(self) -> "PressureField":
        return PressureField(self.values.copy(), self.grid)

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass
class VorticityField:
    """Corner-located scalar vorticity."""

    values: Array
    grid: StaggeredGrid

    def __post_init__(self):
        self.values = _as_square(self.values, self.grid.n, "values")

    def norm_sq(self) -> float:
        return float(np.sum(self.values * self.values))

    def mean(self) -> float:
        return float(self.values.mean())


# ---------------------------------------------------------------------------
# discrete operators
# ---------------------------------------------------------------------------

def divergence(field: VelocityField) -> PressureField:
    """Cell-centered divergence, ``(u[i,j]-u[i-1,j])/h + (v[i,j]-v[i,j-1])/h``."""
    h = field.grid.h
    u, v = field.u, field.v
    div = (u - np.roll(u, 1, axis=0)) / h + (v - np.roll(v, 1, axis=1)) / h
    return PressureField(div, field.grid)


def gradient(p: PressureField) -> VelocityField:
    """Face-located pressure gradient, the exact negative transpose of
    :func:`divergence` under the plain dot product."""
    h = p.grid.h
    q = p.values
    gu = (np.roll(q, -1, axis=0) - q) / h
    gv = (np.roll(q, -1, axis=1) - q) / h
    return VelocityField(gu, gv, p.grid)


def diffusion(field: VelocityField) -> VelocityField:
    """Symmetric 5-point Laplacian applied to each velocity component."""
    h2 = field.grid.h ** 2

    def lap(a):
        return (np.roll(a, 1, axis=0) + np.roll(a, -1, axis=0)
                + np.roll(a, 1, axis=1) + np.roll(a, -1, axis=1) - 4.0 * a) / h2

    return VelocityField(lap(field.u), lap(field.v), field.grid)


def convection(field: VelocityField) -> VelocityField:
    """Flux-form convection ``C(u) u`` with two-point face interpolation.

    Fluxes live on the faces of each velocity control volume: squared
    center-interpolated components for the normal fluxes and corner products
    for the cross fluxes.  The trailing term subtracts half of the advecting
    field's control-volume divergence times the advected value, which makes
    the operator exactly energy-neutral (``u . C(u) u = 0``) for every field;
    it vanishes identically on discretely divergence-free fields, where the
    scheme reduces to the plain flux form.
    """
    g = field.grid
    h = g.h
    u, v = field.u, field.v

    u_c = 0.5 * (u + np.roll(u, 1, axis=0))    # u at cell centers
    v_c = 0.5 * (v + np.roll(v, 1, axis=1))    # v at cell centers
    u_k = 0.5 * (u + np.roll(u, -1, axis=1))   # u at corners
    v_k = 0.5 * (v + np.roll(v, -1, axis=0))   # v at corners
    uv_k = u_k * v_k

    uu = u_c * u_c
    vv = v_c * v_c
    conv_u = (np.roll(uu, -1, axis=0) - uu) / h + (uv_k - np.roll(uv_k, 1, axis=1)) / h
    conv_v = (uv_k - np.roll(uv_k, 1, axis=0)) / h + (np.roll(vv, -1, axis=1) - vv) / h

    div = divergence(field).values
    conv_u -= 0.25 * u * (div + np.roll(div, -1, axis=0))
    conv_v -= 0.25 * v * (div + np.roll(div, -1, axis=1))
    return VelocityField(conv_u, conv_v, g)


def curl(field: VelocityField) -> VorticityField:
    """Corner-located vorticity ``dv/dx - du/dy`` from compact differences."""
    h = field.grid.h
    u, v = field.u, field.v
    w = (np.roll(v, -1, axis=0) - v) / h - (np.roll(u, -1, axis=1) - u) / h
    return VorticityField(w, field.grid)


# ---------------------------------------------------------------------------
# explicit matrices (test support only; intended for small N)
# ---------------------------------------------------------------------------

def _shift_matrix(n: int, offset: int) -> Array:
    """Dense S with (S f)[i] = f[(i + offset) mod n]."""
    return np.roll(np.eye(n), offset, axis=1)


def operator_matrices(grid: StaggeredGrid):
    """Explicit sparse matrices of the linear operators, for oracle checks.

    Returns a dict with keys ``divergence`` (N^2 x 2N^2), ``gradient``
    (2N^2 x N^2), ``diffusion`` (2N^2 x 2N^2) and ``curl`` (N^2 x 2N^2),
    acting on fields flattened as in :meth:`VelocityField.flatten`.  Builds
    dense Kronecker blocks first, so keep N small.
    """
    import scipy.sparse as sp

    n, h = grid.n, grid.h
    eye = np.eye(n)
    d_minus = (np.eye(n) - _shift_matrix(n, -1)) / h          # f[i] - f[i-1]
    d_plus = (_shift_matrix(n, 1) - np.eye(n)) / h            # f[i+1] - f[i]
    d2 = (_shift_matrix(n, 1) - 2.0 * np.eye(n) + _shift_matrix(n, -1)) / h ** 2

    kron = np.kron
    m = np.hstack([kron(d_minus, eye), kron(eye, d_minus)])
    g = np.vstack([kron(d_plus, eye), kron(eye, d_plus)])
    lap = kron(d2, eye) + kron(eye, d2)
    dif = np.block([[lap, np.zeros_like(lap)], [np.zeros_like(lap), lap]])
    b = np.hstack([-kron(eye, d_plus), kron(d_plus, eye)])

    return {
        "divergence": sp.csr_matrix(m),
        "gradient": sp.csr_matrix(g),
        "diffusion": sp.csr_matrix(dif),
        "curl": sp.csr_matrix(b),
    }
