"""Offline construction of the data-driven diagonal spectral filter.

The fit is a closed-form per-mode complex least squares: stack reference
states and their one-step coarse evolutions as matrix columns, transform to
frequency space, and per FFT mode take the quotient of cross- and
auto-correlations over the columns.  Each mode is independent, so the fit
is trivially parallel and needs a single batch FFT pass over the snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySnapshots, InsufficientSnapshots, RatioMismatch, ShapeMismatch
from .grid import StaggeredGrid, VelocityField
from .filters import FilterProvenance, SpectralFilter
from .scenarios import CoarseGrainSpec, face_average
from .stepper import SolverParams, rk4_step
from .spectral import shell_averaged_gain, shells

Array = np.ndarray


@dataclass(frozen=True)
class TrainingConfig:
    """Training window and sampling for the filter fit.

    ``subsample_stride`` thins the provided snapshot sequences: every
    stride-th entry starts a training pair.  With the default
    ``evolve_span="dt"`` the pair partner is the state one entry later and
    the evolved column advances one solver step, so sequences must be saved
    at the solver cadence and a pair spans exactly one dt (applying the
    filter once per step online is then consistent with the training data).
    ``evolve_span="stride"`` instead pairs each start with the state one
    full stride later and advances the evolved column by a stride of steps,
    for data only available at the thinned cadence.
    """

    t_train: float = 1.0
    i_train: int = 10
    subsample_stride: int = 10
    seeds: tuple = ()
    evolve_span: str = "dt"

    def __post_init__(self):
        if not self.t_train > 0:
            raise ValueError("training window must be positive")
        if self.i_train < 1:
            raise ValueError("need at least one training initialization")
        if self.subsample_stride < 1:
            raise ValueError("stride must be at least 1")
        if self.evolve_span not in ("dt", "stride"):
            raise ValueError(f"unknown evolve span {self.evolve_span!r}")


@dataclass
class SnapshotMatrices:
    """Paired training columns in frequency space.

    ``u_hat[m, c]`` holds the FFT of component ``c`` of the m-th reference
    (coarse-grained) state, ``w_hat[m, c]`` the FFT of the corresponding
    one-step coarse evolution of the previous reference state.
    """

    u_hat: Array    # (M, 2, N, N) complex
    w_hat: Array    # (M, 2, N, N) complex
    grid: StaggeredGrid

    def __post_init__(self):
        if self.u_hat.shape != self.w_hat.shape:
            raise ShapeMismatch("paired snapshot stacks must have equal shapes")
        n = self.grid.n
        if self.u_hat.ndim != 4 or self.u_hat.shape[1:] != (2, n, n):
            raise ShapeMismatch(f"snapshot stack must be (M, 2, {n}, {n})")

    @property
    def n_columns(self) -> int:
        return self.u_hat.shape[0]

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[VelocityField, VelocityField]],
                   grid: StaggeredGrid) -> "SnapshotMatrices":
        """Build from (evolved, reference) field pairs with one batch FFT."""
        m = len(pairs)
        n = grid.n
        u_hat = np.empty((m, 2, n, n), dtype=np.complex128)
        w_hat = np.empty((m, 2, n, n), dtype=np.complex128)
        for k, (w, u) in enumerate(pairs):
            w_hat[k, 0] = np.fft.fft2(w.u)
            w_hat[k, 1] = np.fft.fft2(w.v)
            u_hat[k, 0] = np.fft.fft2(u.u)
            u_hat[k, 1] = np.fft.fft2(u.v)
        return cls(u_hat, w_hat, grid)


def assemble_snapshots(dns_trajectories: Sequence[Sequence[VelocityField]],
                       coarse_grid: StaggeredGrid,
                       coarse_solver: SolverParams,
                       cfg: TrainingConfig) -> SnapshotMatrices:
    """Turn fine-grid trajectories into paired training matrices.

    Every ``cfg.subsample_stride``-th entry of a trajectory starts a pair:
    the evolved column is that state coarse-grained by face averaging and
    advanced with the coarse solver, the reference column is the
    coarse-grained partner state (one entry later for ``evolve_span="dt"``,
    one stride later for ``"stride"``).  Pairs never straddle trajectories;
    a trajectory with S retained starts yields S-1 columns (the last start
    has no partner).  The evolve span and the pair spacing always agree, so
    the fitted gains describe exactly one application of the coarse solver.
    """
    pairs = []
    step = 1 if cfg.evolve_span == "dt" else cfg.subsample_stride
    for traj in dns_trajectories:
        traj = list(traj)
        starts = [i for i in range(0, len(traj), cfg.subsample_stride)
                  if i + step <= len(traj) - 1]
        if len(traj) < 2 or not starts:
            raise InsufficientSnapshots(
                f"trajectory of {len(traj)} snapshots yields no pairs at "
                f"stride {cfg.subsample_stride}")
        fine_n = traj[0].grid.n
        if fine_n % coarse_grid.n != 0:
            raise RatioMismatch(
                f"fine N={fine_n} is not a multiple of coarse N={coarse_grid.n}")
        spec = CoarseGrainSpec(fine_n // coarse_grid.n)
        for i in starts:
            w = face_average(traj[i], spec)
            for _ in range(step):
                w = rk4_step(w, coarse_solver)
            pairs.append((w, face_average(traj[i + step], spec)))
    if not pairs:
        raise EmptySnapshots("no training pairs were assembled")
    return SnapshotMatrices.from_pairs(pairs, coarse_grid)


def fit_filter(snaps: SnapshotMatrices) -> SpectralFilter:
    """Per-mode least-squares gains minimizing the squared Frobenius mismatch
    between filtered evolved columns and reference columns.

    For each component and FFT mode the optimum is the quotient of the
    conjugated cross-correlation and the auto-correlation over columns.
    Rows with no usable data (auto-correlation at or below 1e-24 of the
    largest, which catches exact zeros and arithmetic noise alike) get the
    neutral gain 1.  On divergence-free data the u rows on the kx axis and
    the v rows on the ky axis vanish structurally, leaving at most
    projection roundoff whose quotient would be meaningless noise; the
    neutral gain leaves those never-excited modes untouched, keeps
    shell-gain diagnostics clean, and cannot amplify anything.

    The fitted gains are symmetrized across conjugate mode pairs, which is
    the least-squares optimum restricted to filters that keep real fields
    real.
    """
    if snaps.n_columns == 0:
        raise EmptySnapshots("cannot fit a filter from zero columns")
    num = np.sum(np.conj(snaps.w_hat) * snaps.u_hat, axis=0)   # (2, N, N)
    den = np.sum(np.abs(snaps.w_hat) ** 2, axis=0)
    gains = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)

    floor = np.max(den) * 1e-24
    n = snaps.grid.n
    mi = (-np.arange(n)) % n
    no_data = (den <= floor) | (den[:, mi][:, :, mi] <= floor)
    gains = np.where(no_data, 1.0, gains)
    # conjugate-pair symmetrization (exact for data rows of real fields,
    # decisive only near the noise floor)
    gains = 0.5 * (gains + np.conj(gains[:, mi][:, :, mi]))
    return SpectralFilter(gains[0], gains[1], snaps.grid,
                          FilterProvenance("learned",
                                           info=(("columns", snaps.n_columns),)))


def training_residual(filt: SpectralFilter, snaps: SnapshotMatrices) -> float:
    """Frequency-domain squared Frobenius loss of a filter on the snapshots.

    Equals the physical-space loss times N^2 under the unnormalized-forward
    transform convention.
    """
    if filt.grid != snaps.grid:
        raise ShapeMismatch("filter and snapshots live on different grids")
    gains = np.stack([filt.gain_u, filt.gain_v])   # (2, N, N)
    resid = gains[None, :, :, :] * snaps.w_hat - snaps.u_hat
    return float(np.sum(np.abs(resid) ** 2))


def amplifying_shells(filt: SpectralFilter, tol: float = 1e-12):
    """Shells whose mean gain magnitude exceeds one, per component.

    Learned filters built from scarce data can amplify some bands, which may
    pump energy into the run until it blows up; callers use this to warn.
    Returns a list of (component_index, shell, mean_gain) triples.
    """
    mean_gain = shell_averaged_gain(filt)
    sh = shells(filt.grid)
    flagged = []
    for c in range(2):
        for kappa in range(sh.n_shells):
            if kappa == 0:
                continue
            if mean_gain[c, kappa] > 1.0 + tol:
                flagged.append((c, kappa, float(mean_gain[c, kappa])))
    return flagged
