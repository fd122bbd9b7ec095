"""Fourier-space utilities: transforms, diagonal operators, the periodic
Poisson solve, and shell-binned spectra.

Convention: forward transforms are unnormalized (plain ``fft2``), inverse
transforms carry the 1/N^2 factor.  Wavenumbers are integer lattice indices
in standard FFT ordering (mode (0,0) first, negative half in the upper part
of each axis); on the unit square these coincide with physical wavenumbers.

Transform plans are stateless numpy calls and all functions here are pure,
so everything is re-entrant and shareable across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
import scipy.fft as _fft

from .errors import GridMismatch, NonHermitianInput, NonZeroMeanRHS
from .grid import PressureField, StaggeredGrid, VelocityField

if TYPE_CHECKING:  # pragma: no cover
    from .filters import SpectralFilter

Array = np.ndarray


@dataclass
class SpectralField:
    """Per-component complex Fourier coefficients of a velocity field."""

    u_hat: Array
    v_hat: Array
    grid: StaggeredGrid


@lru_cache(maxsize=None)
def integer_wavenumbers(n: int):
    """Signed integer wavenumber meshes (kx, ky) in FFT ordering."""
    k = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    kx.setflags(write=False)
    ky.setflags(write=False)
    return kx, ky


@lru_cache(maxsize=None)
def laplacian_symbol(grid: StaggeredGrid) -> Array:
    """Exact eigenvalues of the 5-point Laplacian, per FFT mode (all <= 0)."""
    n, h = grid.n, grid.h
    kx, ky = integer_wavenumbers(n)
    lam = (2.0 * np.cos(2.0 * np.pi * kx / n) - 2.0) / h ** 2 \
        + (2.0 * np.cos(2.0 * np.pi * ky / n) - 2.0) / h ** 2
    lam.setflags(write=False)
    return lam


def forward(field: VelocityField) -> SpectralField:
    """Unnormalized forward FFT of both components."""
    return SpectralField(_fft.fft2(field.u), _fft.fft2(field.v), field.grid)


def hermitian_defect(coeffs: Array) -> float:
    """Max deviation from the conjugate symmetry c(-k) = conj(c(k))."""
    n = coeffs.shape[0]
    mi = (-np.arange(n)) % n
    mirrored = coeffs[np.ix_(mi, mi)]
    return float(np.max(np.abs(coeffs - np.conj(mirrored))))


def inverse(spec: SpectralField) -> VelocityField:
    """Normalized inverse FFT back to a real velocity field.

    Raises :class:`NonHermitianInput` when the conjugate symmetry of a real
    field is violated beyond 1e-9 relative; the remaining imaginary residue
    (at most 1e-12 relative by construction) is discarded.
    """
    for name, coeffs in (("u", spec.u_hat), ("v", spec.v_hat)):
        scale = float(np.max(np.abs(coeffs))) or 1.0
        defect = hermitian_defect(coeffs)
        if defect > 1e-9 * scale:
            raise NonHermitianInput(
                f"{name}-coefficients break conjugate symmetry: "
                f"defect {defect:.3e} vs scale {scale:.3e}")
    u = _fft.ifft2(spec.u_hat)
    v = _fft.ifft2(spec.v_hat)
    return VelocityField(u.real, v.real, spec.grid)


@lru_cache(maxsize=None)
def _half_symbol_inverse(grid: StaggeredGrid) -> Array:
    # 1/lambda on the real-transform half lattice; zero mode pinned to 0
    lam = laplacian_symbol(grid)[:, : grid.n // 2 + 1].copy()
    lam[0, 0] = np.inf
    inv = 1.0 / lam
    inv.setflags(write=False)
    return inv


def poisson_solve_array(rhs: Array, grid: StaggeredGrid) -> Array:
    """Solve the 5-point-Laplacian Poisson problem for a zero-mean rhs array.

    Uses the exact discrete symbol on the real-transform half lattice, so
    the residual is at roundoff level.  The zero mode of the solution is
    set to zero.
    """
    rhat = _fft.rfft2(rhs)
    rhat *= _half_symbol_inverse(grid)
    return _fft.irfft2(rhat, s=rhs.shape)


def poisson_solve(rhs: PressureField) -> PressureField:
    """FFT Poisson solve; rejects right-hand sides with non-negligible mean."""
    scale = float(np.max(np.abs(rhs.values)))
    mean = rhs.mean()
    if scale > 0.0 and abs(mean) > 1e-10 * scale:
        raise NonZeroMeanRHS(
            f"rhs mean {mean:.3e} exceeds 1e-10 of max magnitude {scale:.3e}")
    return PressureField(poisson_solve_array(rhs.values - mean, rhs.grid), rhs.grid)


def apply_diagonal(filt: "SpectralFilter", field: VelocityField) -> VelocityField:
    """Apply a per-component diagonal spectral operator in frequency space.

    Filter gains are required (and enforced at construction/load time) to be
    conjugate-symmetric, so the half-lattice real transform carries the full
    operator and the result is real by construction.
    """
    if filt.grid != field.grid:
        raise GridMismatch(
            f"filter grid {filt.grid} does not match field grid {field.grid}")
    half = field.grid.n // 2 + 1
    shape = field.u.shape
    u = _fft.irfft2(filt.gain_u[:, :half] * _fft.rfft2(field.u), s=shape)
    v = _fft.irfft2(filt.gain_v[:, :half] * _fft.rfft2(field.v), s=shape)
    return VelocityField(u, v, field.grid)


# ---------------------------------------------------------------------------
# wavenumber shells and spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WavenumberShells:
    """Partition of the FFT lattice into unit-width annuli.

    Mode k belongs to shell ``kappa`` when ``kappa - 0.5 < |k| < kappa + 0.5``;
    since |k|^2 is an integer the boundaries are never hit and the shells
    partition all N^2 modes.
    """

    shell_index: Array   # (N, N) int, read-only
    counts: Array        # (K+1,) population per shell

    @property
    def n_shells(self) -> int:
        return len(self.counts)

    def mask(self, kappa: int) -> Array:
        return self.shell_index == kappa


@lru_cache(maxsize=None)
def shells(grid: StaggeredGrid) -> WavenumberShells:
    kx, ky = integer_wavenumbers(grid.n)
    idx = np.rint(np.sqrt(kx.astype(np.float64) ** 2 + ky ** 2)).astype(np.int64)
    counts = np.bincount(idx.ravel())
    idx.setflags(write=False)
    counts.setflags(write=False)
    return WavenumberShells(idx, counts)


def energy_spectrum(field: VelocityField) -> Array:
    """Shell-binned kinetic energy, normalized so the shell sum equals the
    global energy ``h^2/(2 |domain|) ||u||^2`` (Parseval consistency)."""
    g = field.grid
    sh = shells(g)
    uh = _fft.fft2(field.u)
    vh = _fft.fft2(field.v)
    weights = (np.abs(uh) ** 2 + np.abs(vh) ** 2).ravel()
    spec = np.bincount(sh.shell_index.ravel(), weights=weights,
                       minlength=sh.n_shells)
    norm = g.h ** 2 / (2.0 * g.area) / g.n ** 2
    return spec * norm


def shell_averaged_gain(filt: "SpectralFilter") -> Array:
    """Mean gain magnitude per shell and component, shape (2, K+1)."""
    sh = shells(filt.grid)
    out = np.empty((2, sh.n_shells))
    for c, gain in enumerate((filt.gain_u, filt.gain_v)):
        sums = np.bincount(sh.shell_index.ravel(),
                           weights=np.abs(gain).ravel(),
                           minlength=sh.n_shells)
        out[c] = sums / sh.counts
    return out
