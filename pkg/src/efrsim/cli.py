"""Command-line surface: generate reference data, learn filters, run
methods, compare runs, and tune baseline parameters.

Exit codes: 0 success, 2 configuration error, 3 numerical blowup,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import time as _time

import numpy as np

from .config import ConfigError, MethodSpec, RunConfig, load_config, save_config
from .driver import DnsProducts, resolve_method, run_dns, run_trajectory, solver_params
from .errors import (EfrsimError, FilterMissing, IOFailure, NumericalBlowup)
from .filters import read_filter, write_filter
from .grid import StaggeredGrid
from .learning import TrainingConfig, amplifying_shells, assemble_snapshots, fit_filter
from .metrics import (ErrorReport, TimeSeries, read_spectra, read_timeseries,
                      spectrum_error_details, error_series, write_spectra,
                      write_timeseries)
from .scenarios import InitSpec, random_initial_condition
from .snapshots import read_snapshot, write_snapshot
from .spectral import energy_spectrum, shell_averaged_gain
from .tuning import TuneConfig, enstrophy_loss, finite_diff_gd, write_trace

OUTPUT_ROOT_ENV = "EFRSIM_OUTPUT_ROOT"


def _outpath(path: str) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _seed_dir(outdir: str, seed: int) -> str:
    return os.path.join(outdir, f"seed_{seed}")


def _write_sidecar(outdir: str) -> None:
    # wall-clock metadata lives apart so the main outputs stay reproducible
    with open(os.path.join(outdir, "sidecar.json"), "w") as fh:
        json.dump({"written_at_unix": _time.time()}, fh)
        fh.write("\n")


def _write_run_outputs(seed_dir, result, cfg_echo=None):
    os.makedirs(seed_dir, exist_ok=True)
    write_timeseries(os.path.join(seed_dir, "series.csv"), result.series)
    write_spectra(os.path.join(seed_dir, "spectra.json"),
                  result.spectra_times, result.spectra)
    if cfg_echo is not None:
        with open(os.path.join(seed_dir, "config.json"), "w") as fh:
            json.dump(cfg_echo, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run_dns(args) -> int:
    cfg = _config_from_args(args)
    outdir = _outpath(args.outdir)
    fine = StaggeredGrid(cfg.n_fine)
    coarse = StaggeredGrid(cfg.n_coarse)
    params = solver_params(cfg)
    for seed in cfg.seeds:
        seed_dir = _seed_dir(outdir, seed)
        snap_dir = os.path.join(seed_dir, "snapshots")
        coarse_dir = os.path.join(seed_dir, "coarse")
        os.makedirs(snap_dir, exist_ok=True)
        os.makedirs(coarse_dir, exist_ok=True)
        products = run_dns(
            fine, coarse, params, seed, cfg.n_steps,
            init=InitSpec(seed, cfg.init_peak_wavenumber, cfg.init_energy),
            save_every=cfg.snapshot_cadence or 10,
            spectra_times=cfg.spectra_times, fine_snapshot_dir=snap_dir)
        write_timeseries(os.path.join(seed_dir, "series.csv"), products.reference)
        write_spectra(os.path.join(seed_dir, "spectra.json"),
                      products.spectra_times, products.spectra)
        for t, state in zip(products.filtered_times, products.filtered_states):
            step = int(round(t / cfg.dt))
            write_snapshot(os.path.join(coarse_dir, f"state_{step:07d}.efrs"),
                           state, t, seed)
        print(f"seed {seed}: {cfg.n_steps} steps, reference series and "
              f"{len(products.filtered_states)} coarse states written")
    save_config(os.path.join(outdir, "config.json"), cfg)
    _write_sidecar(outdir)
    return 0


def _load_steps(snapshot_dir, t_max=None):
    paths = sorted(glob.glob(os.path.join(snapshot_dir, "state_*.efrs")))
    if not paths:
        raise IOFailure(f"no snapshots under {snapshot_dir}")
    out = {}
    for p in paths:
        step = int(os.path.basename(p)[6:-5])
        snap = read_snapshot(p)
        if t_max is not None and snap.time > t_max + 1e-12:
            continue
        out[step] = snap.field
    if not out:
        raise IOFailure(f"no snapshots within the training window in {snapshot_dir}")
    return out


def _pair_trajectories(states: dict, stride: int):
    """Group saved states into (state, one-step follower) sequences.

    Returns None when the files carry no consecutive-step pairs, in which
    case the caller falls back to strided single-trajectory assembly.
    """
    starts = sorted(s for s in states if s + 1 in states)
    if not starts:
        return None
    return [[states[s], states[s + 1]] for s in starts[::stride]]


def cmd_learn_filter(args) -> int:
    coarse = StaggeredGrid(args.coarse)
    params = solver_params(_config_from_args(args))
    seed_dirs = sorted(glob.glob(os.path.join(args.dns_dir, "seed_*")))
    if not seed_dirs:
        raise IOFailure(f"no seed directories under {args.dns_dir}")
    all_states = [_load_steps(os.path.join(sd, "snapshots"), t_max=args.t_train)
                  for sd in seed_dirs]
    all_pairs = [_pair_trajectories(states, args.stride) for states in all_states]
    pair_mode = all(p is not None for p in all_pairs)
    trajectories = []
    if pair_mode:
        for pairs in all_pairs:
            if args.max_snapshots:
                pairs = pairs[: args.max_snapshots]
            trajectories.extend(pairs)
        tcfg = TrainingConfig(t_train=args.t_train, i_train=len(seed_dirs),
                              subsample_stride=1, evolve_span="dt")
    else:
        # thinned data without one-step followers: pairs span a full save
        # interval, so the evolved column advances a matching stride
        for states in all_states:
            traj = [states[s] for s in sorted(states)]
            if args.max_snapshots:
                traj = traj[: args.max_snapshots]
            trajectories.append(traj)
        tcfg = TrainingConfig(t_train=args.t_train, i_train=len(seed_dirs),
                              subsample_stride=args.stride,
                              evolve_span=args.evolve_span)
    snaps = assemble_snapshots(trajectories, coarse, params, tcfg)
    filt = fit_filter(snaps)
    write_filter(_outpath(args.out), filt)

    gains = shell_averaged_gain(filt)
    print(f"fitted filter from {snaps.n_columns} column pairs on N={coarse.n}")
    print("shell  mean|gain| (u)  mean|gain| (v)")
    for kappa in range(gains.shape[1]):
        print(f"{kappa:5d}  {gains[0, kappa]:14.6f}  {gains[1, kappa]:14.6f}")
    flagged = amplifying_shells(filt)
    if flagged:
        shells_txt = ", ".join(f"component {c} shell {k} gain {g:.3f}"
                               for c, k, g in flagged[:8])
        print(f"WARNING: filter amplifies some shells ({shells_txt}); "
              "runs with this filter may be unstable without energy or "
              "enstrophy constraints")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    outdir = _outpath(args.outdir)
    grid = StaggeredGrid(cfg.n_coarse)
    params = solver_params(cfg)
    params, filt, policy = resolve_method(cfg.method, grid, params)
    os.makedirs(outdir, exist_ok=True)
    for seed in cfg.seeds:
        if args.initial:
            initial = read_snapshot(args.initial.format(seed=seed), grid).field
        else:
            initial = random_initial_condition(
                grid, InitSpec(seed, cfg.init_peak_wavenumber, cfg.init_energy))
        seed_dir = _seed_dir(outdir, seed)
        snap_dir = None
        if cfg.snapshot_cadence:
            snap_dir = os.path.join(seed_dir, "snapshots")
            os.makedirs(snap_dir, exist_ok=True)
        result = run_trajectory(initial, params, cfg.n_steps, filt, policy,
                                spectra_times=cfg.spectra_times,
                                snapshot_dir=snap_dir,
                                snapshot_cadence=cfg.snapshot_cadence,
                                seed=seed)
        _write_run_outputs(seed_dir, result, cfg_echo=cfg.to_dict())
        print(f"seed {seed}: method {cfg.method.name} finished "
              f"{cfg.n_steps} steps, final energy {result.series.energy[-1]:.6g}")
    save_config(os.path.join(outdir, "config.json"), cfg)
    _write_sidecar(outdir)
    return 0


def cmd_compare(args) -> int:
    ref_dir = args.ref
    reports = {}
    for pair in args.run:
        if "=" not in pair:
            raise ConfigError(f"--run expects NAME=DIR, got {pair!r}")
        name, run_dir = pair.split("=", 1)
        report = ErrorReport()
        seed_dirs = sorted(glob.glob(os.path.join(run_dir, "seed_*")))
        if not seed_dirs:
            raise IOFailure(f"no seed directories under {run_dir}")
        for sd in seed_dirs:
            seed = int(os.path.basename(sd).split("_", 1)[1])
            ref_seed_dir = _seed_dir(ref_dir, seed)
            run_series = read_timeseries(os.path.join(sd, "series.csv"))
            ref_series = read_timeseries(os.path.join(ref_seed_dir, "series.csv"))
            err_e, err_z = error_series(run_series, ref_series, args.horizon)
            err_s = None
            run_spec_path = os.path.join(sd, "spectra.json")
            ref_spec_path = os.path.join(ref_seed_dir, "spectra.json")
            if os.path.exists(run_spec_path) and os.path.exists(ref_spec_path):
                rt, rs = read_spectra(run_spec_path)
                ft, fs = read_spectra(ref_spec_path)
                if len(rt) and len(ft):
                    n_shells = args.shells or (rs.shape[1] - 1) // 2
                    err_s, skipped = spectrum_error_details(
                        rt, rs, ft, fs, args.horizon, n_shells)
                    report.skipped_shells += skipped
            report.per_seed[seed] = (err_e, err_z, err_s)
        reports[name] = report.finalize()

    print(f"{'method':>14} {'err_E':>12} {'err_Z':>12} {'err_spectrum':>13}")
    for name, report in reports.items():
        if report.summary:
            e_m, _ = report.summary.get("err_energy", (float("nan"), 0))
            z_m, _ = report.summary.get("err_enstrophy", (float("nan"), 0))
            s_m, _ = report.summary.get("err_spectrum", (float("nan"), 0))
        else:
            (e_m, z_m, s_m), = report.per_seed.values()
            s_m = float("nan") if s_m is None else s_m
        print(f"{name:>14} {e_m:12.5g} {z_m:12.5g} {s_m:13.5g}")
        if report.skipped_shells:
            print(f"{'':>14} ({report.skipped_shells} empty reference shells skipped)")
    if args.out:
        with open(_outpath(args.out), "w") as fh:
            json.dump({k: v.to_dict() for k, v in reports.items()}, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_tune(args) -> int:
    # --method here names the family being tuned, not a full run method
    cfg = _config_from_args(args, take_method=False)
    grid = StaggeredGrid(cfg.n_coarse)
    base_params = solver_params(cfg)
    n_steps = args.n_train_steps

    references = {}
    initials = {}
    for seed in cfg.seeds:
        ref_seed_dir = _seed_dir(args.ref, seed)
        series = read_timeseries(os.path.join(ref_seed_dir, "series.csv"))
        if len(series) < n_steps + 1:
            raise ConfigError(f"reference series for seed {seed} shorter than "
                              f"{n_steps + 1} samples")
        references[seed] = series.enstrophy[: n_steps + 1]
        init_path = os.path.join(ref_seed_dir, "coarse", "state_0000000.efrs")
        initials[seed] = read_snapshot(init_path, grid).field

    def build_method(alpha: float) -> MethodSpec:
        if args.method == "smagorinsky":
            return MethodSpec("smagorinsky", theta=alpha)
        if args.method == "efr":
            return MethodSpec("efr", delta=grid.h, chi=alpha)
        if args.method == "ef":
            return MethodSpec("ef", delta=alpha)
        raise ConfigError(f"cannot tune method {args.method!r}")

    def run_method(alpha: float, seed: int):
        params, filt, policy = resolve_method(build_method(alpha), grid, base_params)
        result = run_trajectory(initials[seed], params, n_steps, filt, policy)
        return result.series.enstrophy

    tune_cfg = TuneConfig(alpha0=args.alpha0, step_size=args.beta,
                          perturbation=args.eps, n_max=args.n_max,
                          tolerance=args.tol, bounds=tuple(args.bounds),
                          seeds=tuple(cfg.seeds), n_train_steps=n_steps)
    best, trace = finite_diff_gd(
        tune_cfg, lambda a: enstrophy_loss(a, run_method, references))
    if args.out:
        write_trace(_outpath(args.out), trace)
    status = "converged" if trace.converged else "max iterations reached"
    print(f"tuned {args.method}: alpha={best:.8g} after {len(trace.rows)} "
          f"iterations ({status}), final loss {trace.losses[-1]:.6g}")
    return 0


def cmd_spectrum(args) -> int:
    snap = read_snapshot(args.snapshot)
    spec = energy_spectrum(snap.field)
    print("shell,energy")
    for kappa, value in enumerate(spec):
        print(f"{kappa},{value:.12g}")
    if args.out:
        write_spectra(_outpath(args.out), [snap.time], [spec])
    return 0


def cmd_gain(args) -> int:
    filt = read_filter(args.filter)
    gains = shell_averaged_gain(filt)
    print("shell,mean_gain_u,mean_gain_v")
    for kappa in range(gains.shape[1]):
        print(f"{kappa},{gains[0, kappa]:.12g},{gains[1, kappa]:.12g}")
    flagged = amplifying_shells(filt)
    if flagged:
        print(f"WARNING: filter amplifies {len(flagged)} shell/component pairs; "
              "runs with this filter may be unstable without energy or "
              "enstrophy constraints")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _config_from_args(args, take_method: bool = True) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    overrides = {
        "n_fine": "n_fine", "n_coarse": "n_coarse", "viscosity": "viscosity",
        "dt": "dt", "t_end": "t_end", "forcing": "forcing",
        "seeds": "seeds", "cadence": "snapshot_cadence", "outdir": "output_dir",
    }
    for arg_name, cfg_name in overrides.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            if arg_name == "seeds":
                value = tuple(value)
            setattr(cfg, cfg_name, value)
    method_name = getattr(args, "method", None) if take_method else None
    if method_name and not isinstance(method_name, MethodSpec):
        cfg.method = MethodSpec(
            name=method_name,
            delta=getattr(args, "delta", None),
            chi=getattr(args, "chi", None),
            theta=getattr(args, "theta", None),
            filter_path=getattr(args, "filter", None),
        )
    if getattr(args, "spectra_at", None):
        cfg.spectra_times = tuple(args.spectra_at)
    cfg.validate()
    return cfg


def _add_common(p, with_method=False):
    p.add_argument("--config", help="JSON config file (see README schema)")
    p.add_argument("--n-fine", dest="n_fine", type=int)
    p.add_argument("--n-coarse", dest="n_coarse", type=int)
    p.add_argument("--viscosity", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--forcing", choices=["none", "kolmogorov"])
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--cadence", type=int, help="steps between saved snapshots")
    p.add_argument("--spectra-at", dest="spectra_at", type=float, nargs="+")
    if with_method:
        p.add_argument("--method", choices=["noefr", "ef", "efr", "smagorinsky",
                                            "dd_ef", "e_dd_efr", "ez_dd_efr"])
        p.add_argument("--delta", type=float)
        p.add_argument("--chi", type=float)
        p.add_argument("--theta", type=float)
        p.add_argument("--filter", help="learned filter file for dd_* methods")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efrsim",
        description="evolve-filter-relax toolkit for 2D periodic turbulence")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-dns", help="fine-grid reference run plus "
                                       "coarse-grained reference products")
    _add_common(p)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_run_dns)

    p = sub.add_parser("learn-filter", help="fit a diagonal spectral filter "
                                            "from saved DNS snapshots")
    p.add_argument("--dns-dir", required=True, help="directory with seed_*/snapshots")
    p.add_argument("--coarse", type=int, required=True)
    p.add_argument("--stride", type=int, default=1,
                   help="retain every stride-th saved snapshot")
    p.add_argument("--t-train", dest="t_train", type=float, default=1.0)
    p.add_argument("--max-snapshots", type=int, default=0,
                   help="cap snapshots per trajectory (0: all)")
    p.add_argument("--evolve-span", choices=["dt", "stride"], default="dt")
    p.add_argument("--viscosity", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--forcing", choices=["none", "kolmogorov"])
    p.add_argument("--out", required=True, help="output filter file")
    p.set_defaults(func=cmd_learn_filter)

    p = sub.add_parser("simulate", help="run a method on the coarse grid")
    _add_common(p, with_method=True)
    p.add_argument("--initial", help="snapshot file template, e.g. "
                                     "ref/seed_{seed}/coarse/state_0000000.efrs")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="error report of runs against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--run", action="append", required=True, metavar="NAME=DIR")
    p.add_argument("--horizon", type=float, default=3.0)
    p.add_argument("--shells", type=int, default=0,
                   help="shells counted in the spectrum error (default N/2)")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("tune", help="finite-difference descent for one "
                                    "baseline parameter")
    _add_common(p)
    p.add_argument("--method", choices=["smagorinsky", "efr", "ef"], required=True)
    p.add_argument("--ref", required=True, help="run-dns output directory")
    p.add_argument("--alpha0", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--bounds", type=float, nargs=2, required=True)
    p.add_argument("--n-max", dest="n_max", type=int, default=50)
    p.add_argument("--n-train-steps", dest="n_train_steps", type=int, required=True)
    p.add_argument("--out", help="trace CSV path")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("spectrum", help="shell energy spectrum of a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", help="also write spectra JSON")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gain", help="shell-averaged gain table of a filter file")
    p.add_argument("--filter", required=True)
    p.set_defaults(func=cmd_gain)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FilterMissing) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalBlowup as exc:
        print(f"numerical blowup: {exc} (last valid time "
              f"{exc.last_valid_time})", file=sys.stderr)
        return 3
    except (IOFailure, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except EfrsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
