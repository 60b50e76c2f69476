from .coefficients import COEFFICIENT_RANGES, sample_coefficients
from .dataset import (
    SPLITS,
    DatasetManifest,
    PdeDataset,
    dataset_path,
    default_data_root,
    generate_dataset,
    generate_trajectory,
    is_complete,
    load_split,
)
from .initial_conditions import sample_grf_ic, sample_sine_ic, sine_field
from .solvers import (
    discrete_residual,
    solve_advection,
    solve_burgers,
    solve_heat,
    solve_navier_stokes,
)
from .types import PDE, GridSpec, PdeCoefficients, SineIcParams, Trajectory

__all__ = [
    "COEFFICIENT_RANGES", "SPLITS", "DatasetManifest", "GridSpec", "PDE", "PdeCoefficients",
    "PdeDataset", "SineIcParams", "Trajectory", "dataset_path", "default_data_root",
    "discrete_residual", "generate_dataset", "is_complete",
    "generate_trajectory", "load_split", "sample_coefficients", "sample_grf_ic",
    "sample_sine_ic", "sine_field", "solve_advection", "solve_burgers", "solve_heat",
    "solve_navier_stokes",
]
