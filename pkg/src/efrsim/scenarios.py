"""Experiment setups: random solenoidal initial fields with a prescribed
shell spectrum, face-average coarse graining, and the two benchmark cases
(decaying turbulence and Kolmogorov flow).

Randomness comes from numpy's counter-based Philox generator, so a seed
reproduces the same field bit for bit across platforms and ensemble members
can be generated in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import MethodSpec, RunConfig
from .errors import RatioMismatch
from .grid import StaggeredGrid, VelocityField
from .spectral import integer_wavenumbers, shells
from .stepper import project

Array = np.ndarray


def default_spectrum_profile(kappa: Array, peak: float) -> Array:
    """Decaying-turbulence shell spectrum shape, kappa^4 exp(-(kappa/peak)^2).

    This shape is a configurable choice, normalized downstream; only its
    qualitative form (energy concentrated around ``peak``) matters.
    """
    kappa = np.asarray(kappa, dtype=np.float64)
    return kappa ** 4 * np.exp(-((kappa / peak) ** 2))


@dataclass(frozen=True)
class InitSpec:
    """Random initial condition: seed plus target shell spectrum.

    ``profile`` maps shell index to a nonnegative weight; it is normalized
    so the populated shells sum to ``energy``.  Defaults to
    :func:`default_spectrum_profile` with peak ``peak_wavenumber``.
    """

    seed: int
    peak_wavenumber: float = 10.0
    energy: float = 0.5
    profile: Callable[[Array], Array] | None = None

    def shell_targets(self, grid: StaggeredGrid) -> Array:
        """Per-shell energy targets on this grid, summing to ``energy``."""
        sh = shells(grid)
        kappa = np.arange(sh.n_shells, dtype=np.float64)
        if self.profile is not None:
            raw = np.asarray(self.profile(kappa), dtype=np.float64)
        else:
            raw = default_spectrum_profile(kappa, self.peak_wavenumber)
        if raw.shape != kappa.shape or np.any(raw < 0) or not np.all(np.isfinite(raw)):
            raise ValueError("spectrum profile must be finite and nonnegative per shell")
        raw = raw.copy()
        raw[0] = 0.0                      # no mean flow
        raw[sh.counts == 0] = 0.0
        total = raw.sum()
        if total <= 0:
            raise ValueError("spectrum profile carries no energy on this grid")
        return raw * (self.energy / total)


def random_initial_condition(grid: StaggeredGrid, spec: InitSpec) -> VelocityField:
    """Sample a random velocity field with the prescribed shell spectrum.

    Per mode: draw a phase and a random in-plane direction, remove the
    component parallel to the wavenumber (spectral solenoidality), and scale
    the two-component coefficient magnitude so each populated shell carries
    exactly its target energy.  Conjugate symmetry is enforced by mirroring
    one representative per mode pair, then the physical field is projected
    so the staggered-grid divergence drops to roundoff.
    """
    n = grid.n
    rng = np.random.Generator(np.random.Philox(spec.seed))
    sh = shells(grid)
    targets = spec.shell_targets(grid)

    counts = sh.counts[sh.shell_index].astype(np.float64)
    mode_energy = targets[sh.shell_index] / counts
    amp = np.sqrt(2.0 * mode_energy) * n ** 2        # 2-vector coefficient magnitude

    tau = rng.uniform(0.0, 1.0, size=(n, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(n, n))
    phase = np.exp(2j * np.pi * tau)

    kx, ky = integer_wavenumbers(n)
    ex, ey = np.cos(theta), np.sin(theta)
    ksq = (kx ** 2 + ky ** 2).astype(np.float64)
    ksq_safe = np.where(ksq == 0.0, 1.0, ksq)
    ke = (kx * ex + ky * ey) / ksq_safe
    px = ex - kx * ke
    py = ey - ky * ke
    pn = np.hypot(px, py)
    # random direction parallel to k (probability zero): fall back to the
    # perpendicular, which spans the projector's range in 2D
    knorm = np.sqrt(ksq_safe)
    bad = pn < 1e-12
    px = np.where(bad, -ky / knorm, px)
    py = np.where(bad, kx / knorm, py)
    pn = np.where(bad, 1.0, pn)
    dir_x = px / pn
    dir_y = py / pn

    u_hat = amp * phase * dir_x
    v_hat = amp * phase * dir_y

    # conjugate symmetry: keep one representative of each (k, -k) pair,
    # mirror its conjugate, and force self-conjugate modes real
    mi = (-np.arange(n)) % n
    flat = np.arange(n * n).reshape(n, n)
    mirror_flat = flat[np.ix_(mi, mi)]
    canonical = flat < mirror_flat
    self_conj = flat == mirror_flat

    sign = np.where(np.cos(2.0 * np.pi * tau) >= 0.0, 1.0, -1.0)
    u_c = np.where(canonical, u_hat, 0.0) + np.where(self_conj, sign * amp * dir_x, 0.0)
    v_c = np.where(canonical, v_hat, 0.0) + np.where(self_conj, sign * amp * dir_y, 0.0)
    mirror_only = ~canonical & ~self_conj
    u_full = u_c + np.where(mirror_only, np.conj(u_c[np.ix_(mi, mi)]), 0.0)
    v_full = v_c + np.where(mirror_only, np.conj(v_c[np.ix_(mi, mi)]), 0.0)

    field = VelocityField(np.fft.ifft2(u_full).real, np.fft.ifft2(v_full).real, grid)
    return project(field)


@dataclass(frozen=True)
class CoarseGrainSpec:
    """Integer refinement ratio between fine and coarse grids."""

    ratio: int

    def __post_init__(self):
        if self.ratio < 1:
            raise ValueError("ratio must be a positive integer")


def face_average(fine: VelocityField, spec: CoarseGrainSpec | int) -> VelocityField:
    """Coarse-grain by averaging the fine face values lying on each coarse face.

    A coarse u face coincides with one fine column of r consecutive u faces
    (and similarly one row for v), so fine fluxes telescope across coarse
    cell boundaries: solenoidal fine fields stay solenoidal and component
    means are preserved exactly.
    """
    r = spec.ratio if isinstance(spec, CoarseGrainSpec) else int(spec)
    if r < 1:
        raise RatioMismatch(f"ratio must be positive, got {r}")
    n_fine = fine.grid.n
    if n_fine % r != 0:
        raise RatioMismatch(f"fine N={n_fine} not divisible by ratio {r}")
    if r == 1:
        return fine.copy()
    n = n_fine // r
    coarse = StaggeredGrid(n, fine.grid.domain_length)
    # coarse u face (I, J): fine u faces at i = (I+1) r - 1, j = J r .. J r + r - 1
    u = fine.u[r - 1 :: r, :].reshape(n, n, r).mean(axis=2)
    # coarse v face (I, J): fine v faces at i = I r .. I r + r - 1, j = (J+1) r - 1
    v = fine.v[:, r - 1 :: r].reshape(n, r, n).mean(axis=1)
    return VelocityField(u, v, coarse)


def decaying_setup(seed: int) -> RunConfig:
    """Freely decaying turbulence benchmark at Re 4e4 on 512/128 grids."""
    cfg = RunConfig(method=MethodSpec("noefr"), seeds=(seed,), forcing="none")
    cfg.validate()
    return cfg


def kolmogorov_setup(seed: int) -> RunConfig:
    """Kolmogorov flow benchmark: same grids and viscosity, forced at
    wavenumber 4 with amplitude 0.65."""
    cfg = RunConfig(method=MethodSpec("noefr"), seeds=(seed,),
                    forcing="kolmogorov")
    cfg.validate()
    return cfg
