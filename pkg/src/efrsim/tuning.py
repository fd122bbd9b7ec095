"""Finite-difference gradient descent for one scalar parameter of a
baseline method, with an ensemble enstrophy-RMSE loss.

The descent estimates the gradient with a one-sided quotient at a clamped
perturbation, updates with a clamped step, and stops when the update falls
below the tolerance.  Loss evaluations are cached per parameter value; with
seeded, deterministic simulations this is observationally identical to
re-evaluating.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import IOFailure, MissingReference

Array = np.ndarray


@dataclass(frozen=True)
class TuneConfig:
    alpha0: float
    step_size: float                 # descent step (beta)
    perturbation: float              # finite-difference offset (epsilon)
    n_max: int = 50
    tolerance: float = 1e-5          # stop when |alpha_new - alpha| falls below
    bounds: tuple = (0.0, 1.0)
    seeds: tuple = ()
    n_train_steps: int = 0           # steps per training simulation

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError("bounds must satisfy lo < hi")
        if not lo <= self.alpha0 <= hi:
            raise ValueError("alpha0 must lie within bounds")
        if not self.perturbation > 0:
            raise ValueError("perturbation must be positive")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")


def enstrophy_loss(alpha: float, run_method, references) -> float:
    """Ensemble enstrophy RMSE of a method at parameter value ``alpha``.

    ``run_method(alpha, seed)`` must return the enstrophy series of one
    simulation; ``references`` maps each seed to the aligned reference
    series.  Per seed the loss is the mean of squared relative mismatches
    over steps, then averaged over seeds.
    """
    if not references:
        raise MissingReference("no reference enstrophy series supplied")
    losses = []
    for seed in sorted(references):
        z_ref = np.asarray(references[seed], dtype=np.float64)
        if z_ref.size == 0:
            raise MissingReference(f"empty reference series for seed {seed}")
        z = np.asarray(run_method(alpha, seed), dtype=np.float64)
        if z.shape != z_ref.shape:
            raise MissingReference(
                f"series for seed {seed} has {z.shape}, reference {z_ref.shape}")
        losses.append(float(np.mean((z - z_ref) ** 2 / z_ref ** 2)))
    return float(np.mean(losses))


@dataclass
class TuneTrace:
    """Descent history: one (iteration, alpha, loss) row per iteration."""

    rows: list = field(default_factory=list)
    converged: bool = False

    def append(self, iteration: int, alpha: float, loss: float):
        self.rows.append((iteration, alpha, loss))

    @property
    def alphas(self):
        return [r[1] for r in self.rows]

    @property
    def losses(self):
        return [r[2] for r in self.rows]


def finite_diff_gd(cfg: TuneConfig, loss) -> tuple[float, TuneTrace]:
    """Minimize ``loss(alpha)`` over the bounded interval.

    Non-convergence within ``n_max`` iterations is reported through the
    trace, never raised.
    """
    lo, hi = cfg.bounds
    clamp = lambda x: min(max(x, lo), hi)
    cache: dict[float, float] = {}

    def eval_loss(alpha: float) -> float:
        if alpha not in cache:
            cache[alpha] = float(loss(alpha))
        return cache[alpha]

    alpha = float(cfg.alpha0)
    trace = TuneTrace()
    for k in range(1, cfg.n_max + 1):
        l_base = eval_loss(alpha)
        trace.append(k, alpha, l_base)
        # perturbation is clamped too; at the upper bound the quotient is
        # zero and the parameter stays put, which counts as converged
        alpha_pert = clamp(alpha + cfg.perturbation)
        grad = (eval_loss(alpha_pert) - l_base) / cfg.perturbation
        alpha_new = clamp(alpha - cfg.step_size * grad)
        if abs(alpha_new - alpha) < cfg.tolerance:
            trace.converged = True
            break
        alpha = alpha_new
    return alpha, trace


def write_trace(path, trace: TuneTrace) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "alpha", "loss"])
            for row in trace.rows:
                writer.writerow([row[0], f"{row[1]:.17g}", f"{row[2]:.17g}"])
    except OSError as exc:
        raise IOFailure(f"cannot write tuning trace {path}: {exc}") from exc
