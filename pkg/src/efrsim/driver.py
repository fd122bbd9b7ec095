"""Trajectory drivers tying the pieces together: method dispatch, the main
simulation loop with blowup detection, and reference (coarse-grained DNS)
production."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .config import MethodSpec, RunConfig
from .errors import FilterMissing, NumericalBlowup
from .filters import (RelaxPolicy, SpectralFilter, differential_filter,
                      efr_step, read_filter)
from .grid import StaggeredGrid, VelocityField
from .metrics import TimeSeries, energy, enstrophy
from .scenarios import CoarseGrainSpec, InitSpec, face_average, random_initial_condition
from .snapshots import write_snapshot
from .spectral import energy_spectrum
from .stepper import KolmogorovForcing, SmagorinskyClosure, SolverParams

Array = np.ndarray


def solver_params(cfg: RunConfig, closure: SmagorinskyClosure | None = None) -> SolverParams:
    forcing = None
    if cfg.forcing == "kolmogorov":
        forcing = KolmogorovForcing(cfg.forcing_amplitude, cfg.forcing_wavenumber)
    return SolverParams(viscosity=cfg.viscosity, dt=cfg.dt, forcing=forcing,
                        closure=closure)


def resolve_method(method: MethodSpec, grid: StaggeredGrid,
                   params: SolverParams,
                   filt: SpectralFilter | None = None):
    """Translate a method name into (params, filter, relax policy).

    ``filt`` short-circuits the filter file lookup for the dd_* methods,
    letting in-memory filters drive runs directly.
    """
    method.validate()
    name = method.name
    if name == "noefr":
        return params, None, RelaxPolicy.fixed(0.0)
    if name == "ef":
        return params, differential_filter(grid, method.delta), RelaxPolicy.fixed(1.0)
    if name == "efr":
        return params, differential_filter(grid, method.delta), RelaxPolicy.fixed(method.chi)
    if name == "smagorinsky":
        closed = SolverParams(params.viscosity, params.dt, params.forcing,
                              SmagorinskyClosure(method.theta))
        return closed, None, RelaxPolicy.fixed(0.0)
    # data-driven family
    if filt is None:
        if not method.filter_path or not os.path.exists(method.filter_path):
            raise FilterMissing(f"method {name!r} needs a filter file, "
                                f"missing: {method.filter_path!r}")
        filt = read_filter(method.filter_path, grid)
    policy = {"dd_ef": RelaxPolicy.fixed(1.0),
              "e_dd_efr": RelaxPolicy.energy(),
              "ez_dd_efr": RelaxPolicy.energy_enstrophy()}[name]
    return params, filt, policy


@dataclass
class SimulationResult:
    series: TimeSeries
    final_state: VelocityField
    spectra_times: list = field(default_factory=list)
    spectra: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


def run_trajectory(initial: VelocityField, params: SolverParams, n_steps: int,
                   filt: SpectralFilter | None = None,
                   policy: RelaxPolicy | None = None,
                   spectra_times=(), keep_diagnostics: bool = False,
                   snapshot_dir=None, snapshot_cadence: int = 0,
                   seed: int = 0) -> SimulationResult:
    """Advance ``n_steps`` EFR steps, recording per-step scalars.

    Raises :class:`NumericalBlowup` with the last finite time when the state
    stops being finite.  Spectra are dumped at the requested times (matched
    to the nearest step).
    """
    policy = policy or RelaxPolicy.fixed(0.0)
    dt = params.dt
    spectra_steps = {int(round(t / dt)) for t in spectra_times}

    u = initial.copy()
    times = [0.0]
    e = [energy(u)]
    z = [enstrophy(u)]
    chis = [0.0]
    e_evolved = [e[0]]
    z_evolved = [z[0]]
    result = SimulationResult(series=None, final_state=u)
    norm = u.grid.h ** 2 / (2.0 * u.grid.area)

    def maybe_dump(step, state):
        if step in spectra_steps:
            result.spectra_times.append(step * dt)
            result.spectra.append(energy_spectrum(state))
        if snapshot_dir is not None and snapshot_cadence and step % snapshot_cadence == 0:
            write_snapshot(os.path.join(snapshot_dir, f"state_{step:07d}.efrs"),
                           state, step * dt, seed)

    maybe_dump(0, u)
    for step in range(1, n_steps + 1):
        u, diag = efr_step(u, params, filt, policy)
        if not u.is_finite():
            raise NumericalBlowup(
                f"state non-finite at t={step * dt:.6g}",
                last_valid_time=(step - 1) * dt)
        times.append(step * dt)
        e.append(norm * diag.energy_relaxed)
        z.append(norm * diag.enstrophy_relaxed)
        chis.append(diag.chi)
        e_evolved.append(norm * diag.energy_evolved)
        z_evolved.append(norm * diag.enstrophy_evolved)
        if keep_diagnostics:
            result.diagnostics.append(diag)
        maybe_dump(step, u)

    result.series = TimeSeries(times=np.array(times), energy=np.array(e),
                               enstrophy=np.array(z), chi=np.array(chis),
                               energy_evolved=np.array(e_evolved),
                               enstrophy_evolved=np.array(z_evolved))
    result.final_state = u
    return result


@dataclass
class DnsProducts:
    """Everything a fine-grid reference run produces for the pipeline.

    ``filtered_followers[k]`` is the face-averaged state one solver step
    after ``filtered_states[k]`` (None when that step falls past the run),
    so consecutive-step training pairs can be formed at the save cadence.
    """

    filtered_states: list            # face-averaged states at the save cadence
    filtered_followers: list         # states one dt after each saved state
    filtered_times: list
    reference: TimeSeries            # per-step energy/enstrophy of the filtered run
    spectra_times: list
    spectra: list                    # filtered-state spectra at dump times
    initial_coarse: VelocityField

    def pair_trajectories(self):
        """Two-state (state, follower) sequences for snapshot assembly."""
        return [[s, f] for s, f in zip(self.filtered_states,
                                       self.filtered_followers)
                if f is not None]


def run_dns(fine_grid: StaggeredGrid, coarse_grid: StaggeredGrid,
            params: SolverParams, seed: int, n_steps: int,
            init: InitSpec | None = None, save_every: int = 10,
            spectra_times=(), fine_snapshot_dir=None,
            initial: VelocityField | None = None) -> DnsProducts:
    """Plain fine-grid run that also emits its coarse-grained products.

    The face-averaged state is tracked every step so the reference energy
    and enstrophy series align with coarse-method runs at the same dt.
    Saved states come with their one-step followers (both in memory and as
    snapshot files), which filter training pairs are built from.
    """
    ratio = CoarseGrainSpec(fine_grid.n // coarse_grid.n)
    if initial is None:
        initial = random_initial_condition(fine_grid, init or InitSpec(seed))
    dt = params.dt
    spectra_steps = {int(round(t / dt)) for t in spectra_times}

    u = initial.copy()
    coarse0 = face_average(u, ratio)
    filtered_states = [coarse0]
    filtered_followers = [None]
    filtered_times = [0.0]
    times = [0.0]
    e = [energy(coarse0)]
    z = [enstrophy(coarse0)]
    sp_times, spectra = [], []
    if 0 in spectra_steps:
        sp_times.append(0.0)
        spectra.append(energy_spectrum(coarse0))
    if fine_snapshot_dir is not None:
        write_snapshot(os.path.join(fine_snapshot_dir, "state_0000000.efrs"),
                       u, 0.0, seed)

    from .stepper import rk4_step   # local import keeps module load light
    for step in range(1, n_steps + 1):
        u = rk4_step(u, params)
        if not u.is_finite():
            raise NumericalBlowup(f"DNS state non-finite at t={step * dt:.6g}",
                                  last_valid_time=(step - 1) * dt)
        coarse = face_average(u, ratio)
        times.append(step * dt)
        e.append(energy(coarse))
        z.append(enstrophy(coarse))
        on_cadence = step % save_every == 0
        follows_saved = (step - 1) % save_every == 0
        if follows_saved:
            filtered_followers[-1] = coarse
        if on_cadence:
            filtered_states.append(coarse)
            filtered_followers.append(None)
            filtered_times.append(step * dt)
        if fine_snapshot_dir is not None and (on_cadence or follows_saved):
            write_snapshot(
                os.path.join(fine_snapshot_dir, f"state_{step:07d}.efrs"),
                u, step * dt, seed)
        if step in spectra_steps:
            sp_times.append(step * dt)
            spectra.append(energy_spectrum(coarse))

    reference = TimeSeries(times=np.array(times), energy=np.array(e),
                           enstrophy=np.array(z), chi=np.zeros(len(times)))
    return DnsProducts(filtered_states=filtered_states,
                       filtered_followers=filtered_followers,
                       filtered_times=filtered_times, reference=reference,
                       spectra_times=sp_times, spectra=spectra,
                       initial_coarse=coarse0)
