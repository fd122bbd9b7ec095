"""Filter and relax machinery: diagonal spectral filters, the convex relax
update, dissipation-constrained selection of the relax weight, and the
combined evolve-filter-relax step.

Filters are immutable once built and safe to share; :func:`efr_step` keeps
all state in locals, so one trajectory per call site parallelizes freely.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np

from .errors import ChiOutOfRange, IOFailure, NonHermitianInput
from .grid import StaggeredGrid, VelocityField, check_same_grid, curl, divergence
from .spectral import apply_diagonal, hermitian_defect, laplacian_symbol
from .stepper import SolverParams, project, rk4_step

Array = np.ndarray

#: on-disk provenance tags
_PROVENANCE_TAGS = {"differential": 0, "learned": 1, "custom": 2}
_TAG_NAMES = {v: k for k, v in _PROVENANCE_TAGS.items()}


@dataclass(frozen=True)
class FilterProvenance:
    """Where a filter came from: kind plus optional parameters."""

    kind: str                      # differential | learned | custom
    delta: float | None = None     # differential radius, when applicable
    info: tuple = ()               # free-form key/value pairs

    def __post_init__(self):
        if self.kind not in _PROVENANCE_TAGS:
            raise ValueError(f"unknown provenance kind {self.kind!r}")


@dataclass
class SpectralFilter:
    """Per-component diagonal complex gains over the FFT lattice.

    Gains must be conjugate-symmetric so that filtering keeps real fields
    real; constructors and the file reader enforce this.
    """

    gain_u: Array
    gain_v: Array
    grid: StaggeredGrid
    provenance: FilterProvenance = dataclass_field(
        default_factory=lambda: FilterProvenance("custom"))

    def __post_init__(self):
        n = self.grid.n
        self.gain_u = np.asarray(self.gain_u, dtype=np.complex128)
        self.gain_v = np.asarray(self.gain_v, dtype=np.complex128)
        for name, g in (("gain_u", self.gain_u), ("gain_v", self.gain_v)):
            if g.shape != (n, n):
                raise ValueError(f"{name} must have shape {(n, n)}")
            scale = float(np.max(np.abs(g))) or 1.0
            defect = hermitian_defect(g)
            if defect > 1e-9 * scale:
                raise NonHermitianInput(
                    f"{name} breaks conjugate symmetry: defect {defect:.3e}")

    @classmethod
    def identity(cls, grid: StaggeredGrid) -> "SpectralFilter":
        ones = np.ones((grid.n, grid.n), dtype=np.complex128)
        return cls(ones, ones.copy(), grid, FilterProvenance("custom"))


def differential_filter(grid: StaggeredGrid, delta: float) -> SpectralFilter:
    """Spectral form of the elliptic smoother ``(I - 2 delta^2 D) wbar = w``.

    Gains are ``1 / (1 - 2 delta^2 lambda_k)`` with ``lambda_k`` the exact
    5-point-Laplacian eigenvalues; since those are real and nonpositive every
    gain lies in (0, 1], which is what makes the filter dissipative.
    """
    if delta < 0:
        raise ValueError("filter radius must be nonnegative")
    lam = laplacian_symbol(grid)
    gains = 1.0 / (1.0 - 2.0 * delta ** 2 * lam)
    return SpectralFilter(gains.astype(np.complex128),
                          gains.astype(np.complex128), grid,
                          FilterProvenance("differential", delta=delta))


def relax(w: VelocityField, w_bar: VelocityField, chi: float) -> VelocityField:
    """Convex combination ``(1 - chi) w + chi w_bar``."""
    if not 0.0 <= chi <= 1.0:
        raise ChiOutOfRange(f"relax weight must be in [0, 1], got {chi}")
    check_same_grid(w, w_bar)
    if chi == 0.0:
        return w.copy()
    if chi == 1.0:
        return w_bar.copy()
    return VelocityField((1.0 - chi) * w.u + chi * w_bar.u,
                         (1.0 - chi) * w.v + chi * w_bar.v, w.grid)


def max_admissible_relax_weight(a: float, b: float, sq_w: float,
                                sq_w_bar: float) -> float:
    """Largest chi in [0, 1] with ``chi^2 a + 2 chi b <= 0``.

    ``a = ||w - wbar||^2`` and ``b = w . wbar - ||w||^2`` are the quadratic
    coefficients of the constraint ``||(1-chi) w + chi wbar||^2 <= ||w||^2``.
    Returns 1 when the constraint already holds fully filtered (equivalently
    ``||wbar|| <= ||w||``), the root ``-2b/a`` when only a partial weight is
    admissible, and 0 when no positive weight is (b > 0).
    """
    if a == 0.0:
        # wbar == w: constraint holds with equality for every chi
        return 1.0
    if sq_w_bar <= sq_w:
        return 1.0
    if b <= 0.0:
        return min(1.0, -2.0 * b / a)
    return 0.0


def _energy_terms(w: VelocityField, w_bar: VelocityField):
    diff = w_bar - w
    a = diff.norm_sq()
    sq_w = w.norm_sq()
    sq_w_bar = w_bar.norm_sq()
    b = w.dot(w_bar) - sq_w
    return a, b, sq_w, sq_w_bar


def chi_energy(w: VelocityField, w_bar: VelocityField) -> float:
    """Least dissipative relax weight keeping the global kinetic energy of
    the relaxed state at or below the evolved state's."""
    check_same_grid(w, w_bar)
    return max_admissible_relax_weight(*_energy_terms(w, w_bar))


def chi_enstrophy(w: VelocityField, w_bar: VelocityField,
                  curl_op: Callable = curl) -> float:
    """Same selection rule applied to the curled fields, so the constraint
    bounds global enstrophy instead of energy."""
    check_same_grid(w, w_bar)
    bw = curl_op(w).values
    bwb = curl_op(w_bar).values
    a = float(np.sum((bwb - bw) ** 2))
    sq_w = float(np.sum(bw * bw))
    sq_wb = float(np.sum(bwb * bwb))
    b = float(np.sum(bw * bwb)) - sq_w
    return max_admissible_relax_weight(a, b, sq_w, sq_wb)


@dataclass(frozen=True)
class RelaxPolicy:
    """How to pick the relax weight each step."""

    kind: str                 # fixed | energy | energy_enstrophy
    chi: float = 0.0          # used by the fixed policy only

    def __post_init__(self):
        if self.kind not in ("fixed", "energy", "energy_enstrophy"):
            raise ValueError(f"unknown relax policy {self.kind!r}")
        if self.kind == "fixed" and not 0.0 <= self.chi <= 1.0:
            raise ChiOutOfRange(f"fixed relax weight must be in [0, 1], got {self.chi}")

    @classmethod
    def fixed(cls, chi: float) -> "RelaxPolicy":
        return cls("fixed", chi)

    @classmethod
    def energy(cls) -> "RelaxPolicy":
        return cls("energy")

    @classmethod
    def energy_enstrophy(cls) -> "RelaxPolicy":
        return cls("energy_enstrophy")


@dataclass
class StepDiagnostics:
    """Per-step record of the relax decision and the dissipation bookkeeping.

    Norm-squared quantities are plain (unweighted) sums; the evolve entries
    describe the state coming out of the RK4 step, the relaxed entries the
    emitted state after relax and any re-projection.
    """

    chi: float
    a_energy: float | None = None
    b_energy: float | None = None
    a_enstrophy: float | None = None
    b_enstrophy: float | None = None
    energy_evolved: float = 0.0
    energy_relaxed: float = 0.0
    enstrophy_evolved: float = 0.0
    enstrophy_relaxed: float = 0.0
    reprojected: bool = False


def chi_select(policy: RelaxPolicy, w: VelocityField,
               w_bar: VelocityField) -> tuple[float, StepDiagnostics]:
    """Pick the relax weight for one step under the given policy.

    The combined policy takes the minimum of the energy- and
    enstrophy-admissible weights, satisfying both constraints at once.
    """
    if policy.kind == "fixed":
        return policy.chi, StepDiagnostics(chi=policy.chi)

    a, b, sq_w, sq_wb = _energy_terms(w, w_bar)
    chi_e = max_admissible_relax_weight(a, b, sq_w, sq_wb)
    diag = StepDiagnostics(chi=chi_e, a_energy=a, b_energy=b)
    if policy.kind == "energy":
        return chi_e, diag

    bw = curl(w).values
    bwb = curl(w_bar).values
    a_z = float(np.sum((bwb - bw) ** 2))
    sq_zw = float(np.sum(bw * bw))
    sq_zwb = float(np.sum(bwb * bwb))
    b_z = float(np.sum(bw * bwb)) - sq_zw
    chi_z = max_admissible_relax_weight(a_z, b_z, sq_zw, sq_zwb)
    diag.a_enstrophy = a_z
    diag.b_enstrophy = b_z
    diag.chi = min(chi_e, chi_z)
    return diag.chi, diag


def efr_step(u_n: VelocityField, solver: SolverParams,
             filt: SpectralFilter | None,
             policy: RelaxPolicy) -> tuple[VelocityField, StepDiagnostics]:
    """One evolve-filter-relax step.

    Evolve with RK4, smooth with the diagonal spectral filter (skipped when
    ``filt`` is None), then blend evolved and filtered states with the
    policy's relax weight.  Filters with unequal per-component gains can
    leave a small divergence in the blend; the state is re-projected when
    that drift exceeds 1e-10 of the velocity scale, which changes neither
    the energy bound (orthogonal projection) nor the vorticity (the curl of
    a discrete gradient vanishes).  The flag is recorded in the diagnostics.
    """
    w = rk4_step(u_n, solver)
    e_w = w.norm_sq()
    z_w = curl(w).norm_sq()

    if filt is None:
        diag = StepDiagnostics(chi=0.0, energy_evolved=e_w, energy_relaxed=e_w,
                               enstrophy_evolved=z_w, enstrophy_relaxed=z_w)
        return w, diag

    w_bar = apply_diagonal(filt, w)
    chi, diag = chi_select(policy, w, w_bar)
    u_next = relax(w, w_bar, chi)

    drift = float(np.max(np.abs(divergence(u_next).values)))
    scale = u_next.inf_norm() or 1.0
    if drift > 1e-10 * scale:
        u_next = project(u_next)
        diag.reprojected = True

    diag.energy_evolved = e_w
    diag.enstrophy_evolved = z_w
    diag.energy_relaxed = u_next.norm_sq()
    diag.enstrophy_relaxed = curl(u_next).norm_sq()
    return u_next, diag


# ---------------------------------------------------------------------------
# filter file format
# ---------------------------------------------------------------------------

FILTER_MAGIC = b"EFRF"
FILTER_VERSION = 1
_HEADER = struct.Struct("<4sIIIB")


def write_filter(path, filt: SpectralFilter) -> None:
    """Write a filter file: magic, version, N, component count, provenance
    tag, then per component row-major (re, im) float64 pairs, little-endian,
    FFT ordering."""
    n = filt.grid.n
    tag = _PROVENANCE_TAGS[filt.provenance.kind]
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(FILTER_MAGIC, FILTER_VERSION, n, 2, tag))
            for gain in (filt.gain_u, filt.gain_v):
                pairs = np.empty((n, n, 2), dtype="<f8")
                pairs[..., 0] = gain.real
                pairs[..., 1] = gain.imag
                fh.write(pairs.tobytes())
    except OSError as exc:
        raise IOFailure(f"cannot write filter file {path}: {exc}") from exc


def read_filter(path, grid: StaggeredGrid | None = None) -> SpectralFilter:
    """Read a filter file, validating magic, version and grid size."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IOFailure(f"cannot read filter file {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise IOFailure(f"filter file {path} truncated")
    magic, version, n, ncomp, tag = _HEADER.unpack_from(raw)
    if magic != FILTER_MAGIC:
        raise IOFailure(f"{path} is not a filter file (magic {magic!r})")
    if version != FILTER_VERSION:
        raise IOFailure(f"unsupported filter file version {version}")
    if ncomp != 2:
        raise IOFailure(f"expected 2 components, file has {ncomp}")
    expected = _HEADER.size + ncomp * n * n * 2 * 8
    if len(raw) != expected:
        raise IOFailure(f"filter file {path} has {len(raw)} bytes, expected {expected}")
    if grid is None:
        grid = StaggeredGrid(n)
    elif grid.n != n:
        raise IOFailure(f"filter is for N={n}, requested grid has N={grid.n}")
    gains = []
    offset = _HEADER.size
    for _ in range(ncomp):
        pairs = np.frombuffer(raw, dtype="<f8", count=2 * n * n,
                              offset=offset).reshape(n, n, 2)
        gains.append(pairs[..., 0] + 1j * pairs[..., 1])
        offset += n * n * 2 * 8
    kind = _TAG_NAMES.get(tag, "custom")
    return SpectralFilter(gains[0], gains[1], grid, FilterProvenance(kind))
