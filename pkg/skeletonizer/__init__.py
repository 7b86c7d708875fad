"""Tensor network skeletonization for 2D/3D Ising models."""

from ._version import __version__
from .coarsegrain2d import LevelState2D, RunResult, run_disordered, run_free_energy, run_observables
from .coarsegrain3d import LevelState3D, run_disordered_3d, run_free_energy_3d, run_observables_3d
from .config import log, validate_config
from .engine import TnsConfig
from .models import ImpurityKind, IsingSpec, ModelArgumentError
from .network import CollapsedNetworkError, LogScalar, ResourceLimitError
from .skeleton import AlsConfig
from .tensor_core import DenseTensor, NonFiniteError

__all__ = [
    "IsingSpec",
    "ImpurityKind",
    "TnsConfig",
    "AlsConfig",
    "DenseTensor",
    "LogScalar",
    "LevelState2D",
    "LevelState3D",
    "RunResult",
    "run_free_energy",
    "run_observables",
    "run_disordered",
    "run_free_energy_3d",
    "run_observables_3d",
    "run_disordered_3d",
    "ModelArgumentError",
    "ResourceLimitError",
    "CollapsedNetworkError",
    "NonFiniteError",
    "log",
    "validate_config",
    "__version__",
]
