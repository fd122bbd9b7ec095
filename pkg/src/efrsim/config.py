"""Run configuration: a JSON-backed description of a full experiment.

Defaults reproduce the reference setup: unit square, Re 4e4 (viscosity
2.5e-5), dt 5e-4 s, horizon 10 s, fine/coarse grids 512/128, Kolmogorov
forcing amplitude 0.65 at wavenumber 4 when enabled.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

METHOD_NAMES = ("noefr", "ef", "efr", "smagorinsky", "dd_ef", "e_dd_efr", "ez_dd_efr")
_FILTER_METHODS = ("dd_ef", "e_dd_efr", "ez_dd_efr")


@dataclass
class MethodSpec:
    """Which regularization runs, and its parameters."""

    name: str = "noefr"
    delta: float | None = None        # differential filter radius (ef, efr)
    chi: float | None = None          # fixed relax weight (efr)
    theta: float | None = None        # Smagorinsky coefficient
    filter_path: str | None = None    # learned filter file (dd_* methods)

    def validate(self):
        if self.name not in METHOD_NAMES:
            raise ConfigError(f"unknown method {self.name!r}; choose from {METHOD_NAMES}")
        if self.name in ("ef", "efr") and (self.delta is None or self.delta < 0):
            raise ConfigError(f"method {self.name!r} needs a nonnegative delta")
        if self.name == "efr":
            if self.chi is None or not 0.0 <= self.chi <= 1.0:
                raise ConfigError("method 'efr' needs chi in [0, 1]")
        if self.name == "smagorinsky":
            if self.theta is None or not 0.0 <= self.theta <= 1.0:
                raise ConfigError("method 'smagorinsky' needs theta in [0, 1]")
        if self.name in _FILTER_METHODS and not self.filter_path:
            raise ConfigError(f"method {self.name!r} needs a filter_path")

    @property
    def needs_filter_file(self) -> bool:
        return self.name in _FILTER_METHODS


@dataclass
class RunConfig:
    """Full experiment description; see README for the file schema."""

    n_fine: int = 512
    n_coarse: int = 128
    viscosity: float = 2.5e-5
    dt: float = 5e-4
    t_end: float = 10.0
    forcing: str = "none"             # none | kolmogorov
    forcing_amplitude: float = 0.65
    forcing_wavenumber: int = 4
    method: MethodSpec = field(default_factory=MethodSpec)
    seeds: tuple = (0,)
    snapshot_cadence: int = 0         # steps between saved states; 0 disables
    spectra_times: tuple = (1.0,)
    init_peak_wavenumber: int = 10
    init_energy: float = 0.5
    t_train: float = 1.0
    i_train: int = 10
    subsample_stride: int = 10
    output_dir: str = "runs"

    def validate(self):
        if self.n_fine < 4 or self.n_coarse < 4:
            raise ConfigError("grid sizes must be at least 4")
        if self.n_fine % self.n_coarse != 0:
            raise ConfigError(
                f"fine grid {self.n_fine} must be an integer multiple of coarse {self.n_coarse}")
        if self.viscosity < 0:
            raise ConfigError("viscosity must be nonnegative")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.forcing not in ("none", "kolmogorov"):
            raise ConfigError(f"unknown forcing {self.forcing!r}")
        if self.forcing == "kolmogorov" and self.forcing_wavenumber < 1:
            raise ConfigError("forcing wavenumber must be at least 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.snapshot_cadence < 0:
            raise ConfigError("snapshot cadence must be nonnegative")
        self.method.validate()

    @property
    def ratio(self) -> int:
        return self.n_fine // self.n_coarse

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["spectra_times"] = list(self.spectra_times)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        method = data.pop("method", {})
        if isinstance(method, dict):
            unknown = set(method) - set(MethodSpec.__dataclass_fields__)
            if unknown:
                raise ConfigError(f"unknown method keys: {sorted(unknown)}")
            method = MethodSpec(**method)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("seeds", "spectra_times"):
            if key in data:
                data[key] = tuple(data[key])
        cfg = cls(method=method, **data)
        cfg.validate()
        return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return RunConfig.from_dict(data)


def save_config(path, cfg: RunConfig) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
