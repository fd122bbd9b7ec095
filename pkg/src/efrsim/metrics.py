"""Global diagnostics (energy, enstrophy), time series containers with CSV
persistence, spectra persistence, and the error functionals used to compare
runs against a filtered reference."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (GridMisaligned, IOFailure, TooFewSamples,
                     ZeroReferenceShell)
from .grid import VelocityField, curl

Array = np.ndarray

TIMESERIES_SCHEMA = "efrsim-timeseries v1"
SPECTRA_VERSION = 1


def energy(field: VelocityField) -> float:
    """Global kinetic energy, ``h^2 / (2 |domain|) ||u||^2``."""
    g = field.grid
    return g.h ** 2 / (2.0 * g.area) * field.norm_sq()


def enstrophy(field: VelocityField) -> float:
    """Global enstrophy, ``h^2 / (2 |domain|) ||curl u||^2``."""
    g = field.grid
    return g.h ** 2 / (2.0 * g.area) * curl(field).norm_sq()


@dataclass
class TimeSeries:
    """Per-step scalar history of a run.

    ``energy_evolved``/``enstrophy_evolved`` record the evolve-step output
    before relaxation (equal to the emitted values when no filter runs).
    """

    times: Array
    energy: Array
    enstrophy: Array
    chi: Array
    energy_evolved: Array = None
    enstrophy_evolved: Array = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        for name in ("energy", "enstrophy", "chi"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != self.times.shape:
                raise GridMisaligned(f"{name} length differs from times")
            setattr(self, name, arr)
        if self.energy_evolved is None:
            self.energy_evolved = self.energy.copy()
        if self.enstrophy_evolved is None:
            self.enstrophy_evolved = self.enstrophy.copy()
        self.energy_evolved = np.asarray(self.energy_evolved, dtype=np.float64)
        self.enstrophy_evolved = np.asarray(self.enstrophy_evolved, dtype=np.float64)
        if np.any(np.diff(self.times) <= 0):
            raise GridMisaligned("times must be strictly increasing")

    def __len__(self):
        return len(self.times)


def write_timeseries(path, ts: TimeSeries) -> None:
    header = f"# {TIMESERIES_SCHEMA}\nt,energy,enstrophy,chi,energy_evolved,enstrophy_evolved\n"
    rows = np.column_stack([ts.times, ts.energy, ts.enstrophy, ts.chi,
                            ts.energy_evolved, ts.enstrophy_evolved])
    try:
        with open(path, "w") as fh:
            fh.write(header)
            np.savetxt(fh, rows, delimiter=",", fmt="%.17g")
    except OSError as exc:
        raise IOFailure(f"cannot write series {path}: {exc}") from exc


def read_timeseries(path) -> TimeSeries:
    try:
        with open(path) as fh:
            first = fh.readline().strip()
            if first != f"# {TIMESERIES_SCHEMA}":
                raise IOFailure(f"{path}: unknown series schema {first!r}")
            fh.readline()  # column header
            rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IOFailure(f"cannot read series {path}: {exc}") from exc
    return TimeSeries(times=rows[:, 0], energy=rows[:, 1], enstrophy=rows[:, 2],
                      chi=rows[:, 3], energy_evolved=rows[:, 4],
                      enstrophy_evolved=rows[:, 5])


def write_spectra(path, times, spectra) -> None:
    """Persist shell spectra sampled at dump times (JSON)."""
    times = [float(t) for t in times]
    spectra = [np.asarray(s, dtype=np.float64).tolist() for s in spectra]
    payload = {"version": SPECTRA_VERSION, "times": times, "spectra": spectra}
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    except OSError as exc:
        raise IOFailure(f"cannot write spectra {path}: {exc}") from exc


def read_spectra(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IOFailure(f"cannot read spectra {path}: {exc}") from exc
    if payload.get("version") != SPECTRA_VERSION:
        raise IOFailure(f"{path}: unsupported spectra version {payload.get('version')}")
    times = np.asarray(payload["times"], dtype=np.float64)
    spectra = np.asarray(payload["spectra"], dtype=np.float64)
    return times, spectra


# ---------------------------------------------------------------------------
# error functionals
# ---------------------------------------------------------------------------

def _aligned_mask(run: TimeSeries, ref: TimeSeries, horizon: float) -> Array:
    if len(run) != len(ref) or np.max(np.abs(run.times - ref.times)) > 1e-9:
        raise GridMisaligned("run and reference time grids differ")
    return run.times <= horizon + 1e-12


def error_series(run: TimeSeries, ref: TimeSeries, horizon: float):
    """Time-averaged relative discrepancies in energy and enstrophy over
    [0, horizon]; per step, ``|X - X_ref| / |X_ref|``."""
    mask = _aligned_mask(run, ref, horizon)
    if not np.any(mask):
        raise GridMisaligned("horizon excludes every sample")
    err_e = float(np.mean(np.abs(run.energy[mask] - ref.energy[mask])
                          / np.abs(ref.energy[mask])))
    err_z = float(np.mean(np.abs(run.enstrophy[mask] - ref.enstrophy[mask])
                          / np.abs(ref.enstrophy[mask])))
    return err_e, err_z


def spectrum_error_details(run_times, run_spectra, ref_times, ref_spectra,
                           horizon: float, n_shells: int, signed: bool = False):
    """Logarithmic spectrum discrepancy averaged over dump times <= horizon
    and shells 1..n_shells.

    Per term, ``log10(E(kappa) / E_ref(kappa))`` with an absolute value
    unless ``signed`` (a signed mean lets over- and under-prediction cancel,
    hiding errors, so the absolute version is the default).  Shells with a
    nonpositive reference are skipped and counted; returns (value, skipped).
    """
    run_times = np.asarray(run_times, dtype=np.float64)
    ref_times = np.asarray(ref_times, dtype=np.float64)
    if run_times.shape != ref_times.shape or np.max(np.abs(run_times - ref_times)) > 1e-9:
        raise GridMisaligned("spectra dump times differ")
    run_spectra = np.asarray(run_spectra, dtype=np.float64)
    ref_spectra = np.asarray(ref_spectra, dtype=np.float64)
    if run_spectra.shape != ref_spectra.shape:
        raise GridMisaligned("spectra shell grids differ")
    if n_shells + 1 > run_spectra.shape[1]:
        raise GridMisaligned(f"requested {n_shells} shells, data has {run_spectra.shape[1] - 1}")

    terms = []
    skipped = 0
    for it, t in enumerate(run_times):
        if t > horizon + 1e-12:
            continue
        for kappa in range(1, n_shells + 1):
            ref_val = ref_spectra[it, kappa]
            if ref_val <= 0.0 or run_spectra[it, kappa] <= 0.0:
                skipped += 1
                continue
            term = np.log10(run_spectra[it, kappa] / ref_val)
            terms.append(term if signed else abs(term))
    if not terms:
        raise ZeroReferenceShell("no usable shells within the horizon")
    return float(np.mean(terms)), skipped


def spectrum_error(run_times, run_spectra, ref_times, ref_spectra,
                   horizon: float, n_shells: int, signed: bool = False) -> float:
    value, _ = spectrum_error_details(run_times, run_spectra, ref_times,
                                      ref_spectra, horizon, n_shells, signed)
    return value


def ensemble_stats(values) -> tuple[float, float]:
    """Mean and normal-approximation 95% half-width, ``1.96 sd / sqrt(n)``
    (population standard deviation)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise TooFewSamples(f"need at least 2 samples, got {values.size}")
    mean = float(values.mean())
    half = float(1.96 * values.std(ddof=0) / np.sqrt(values.size))
    return mean, half


@dataclass
class ErrorReport:
    """Per-method comparison against a reference: per-seed errors plus
    ensemble mean and 95% half-widths."""

    per_seed: dict = field(default_factory=dict)   # seed -> (err_E, err_Z, err_spec)
    summary: dict = field(default_factory=dict)    # metric -> (mean, ci95)
    skipped_shells: int = 0

    def finalize(self):
        if len(self.per_seed) >= 2:
            trips = list(self.per_seed.values())
            for idx, name in enumerate(("err_energy", "err_enstrophy", "err_spectrum")):
                vals = [t[idx] for t in trips if t[idx] is not None]
                if len(vals) >= 2:
                    self.summary[name] = ensemble_stats(vals)
        return self

    def to_dict(self) -> dict:
        return {
            "per_seed": {str(k): list(v) for k, v in self.per_seed.items()},
            "summary": {k: list(v) for k, v in self.summary.items()},
            "skipped_shells": self.skipped_shells,
        }
