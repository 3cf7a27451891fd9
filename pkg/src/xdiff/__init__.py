"""Cross-diffusion reaction-diffusion solver and tensor reduced-order models."""

from .discretize import Grid, SpectralFactors, eig_decompose, laplacian_1d
from .errors import ConfigError, NumericalError, StorageError
from .fom import SimulationConfig, SnapshotPair, run_fom
from .hosvd import TuckerModel, compression_factor, saved_memory, st_hosvd, t_hosvd
from .metrics import BenchmarkReport, time_avg_relative_error, timing_comparison
from .models import Kinetics, ReactionModel
from .rom import RomModel, build_rom, predict

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "ConfigError",
    "Grid",
    "Kinetics",
    "NumericalError",
    "ReactionModel",
    "RomModel",
    "SimulationConfig",
    "SnapshotPair",
    "SpectralFactors",
    "StorageError",
    "TuckerModel",
    "build_rom",
    "compression_factor",
    "eig_decompose",
    "laplacian_1d",
    "predict",
    "run_fom",
    "saved_memory",
    "st_hosvd",
    "t_hosvd",
    "time_avg_relative_error",
    "timing_comparison",
]
