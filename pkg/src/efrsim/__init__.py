"""2D incompressible Navier-Stokes toolkit with evolve-filter-relax
regularization, a data-driven spectral filter learned from reference data,
and dissipation-constrained relaxation."""

from .config import MethodSpec, RunConfig, load_config, save_config
from .filters import (FilterProvenance, RelaxPolicy, SpectralFilter,
                      StepDiagnostics, chi_energy, chi_enstrophy, chi_select,
                      differential_filter, efr_step, max_admissible_relax_weight,
                      read_filter, relax, write_filter)
from .grid import (PressureField, StaggeredGrid, VelocityField, VorticityField,
                   convection, curl, diffusion, divergence, gradient,
                   operator_matrices)
from .learning import (SnapshotMatrices, TrainingConfig, amplifying_shells,
                       assemble_snapshots, fit_filter, training_residual)
from .metrics import (TimeSeries, energy, enstrophy, ensemble_stats,
                      error_series, spectrum_error)
from .scenarios import (CoarseGrainSpec, InitSpec, decaying_setup, face_average,
                        kolmogorov_setup, random_initial_condition)
from .snapshots import read_snapshot, write_snapshot
from .spectral import (SpectralField, apply_diagonal, energy_spectrum, forward,
                       inverse, laplacian_symbol, poisson_solve,
                       shell_averaged_gain, shells)
from .stepper import (KolmogorovForcing, SmagorinskyClosure, SolverParams,
                      project, rhs, rk4_step, smagorinsky_viscosity)
from .tuning import TuneConfig, enstrophy_loss, finite_diff_gd

__version__ = "0.1.0"
