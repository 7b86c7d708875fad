"""3D coarse-graining front end.

Same engine as 2D with cubes in place of plaquettes. The merge of a
2×2×2 block runs axis by axis, and after each axis the two grouped bond
directions are projected down to the mid bond. Corners of each odd cube
are UR-projected to ``chi**3`` before the cube skeletonization.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .coarsegrain2d import (
    OBSERVABLES,
    RunResult,
    _advance,
    _cfg,
    _check_dim,
    _initial,
    disordered_run,
    free_energy_run,
    observables_run,
)
from .config import FIELD_M
from .engine import ImpurityBlock, Lattice, TnsConfig, bootstrap_lattice, final_value
from .metrics import RunMetrics
from .models import ImpurityKind, IsingSpec, ModelArgumentError
from .network import LogScalar
from .skeleton import CellDiagnostics

MAX_DISORDER_SIDE = 4


@dataclass
class LevelState3D:
    """One level of a 3D run.

    Attributes:
        lattice: Bulk tensors (6 legs each), periods and accumulated scale.
        variant: ``"standard"`` or ``"modified"``.
        impurity: Special tensors near the center, if any.
        diagnostics: Cube reports of the step that produced this state.
    """

    lattice: Lattice
    variant: str = "modified"
    impurity: ImpurityBlock | None = None
    diagnostics: list[CellDiagnostics] = field(default_factory=list)

    @property
    def level(self) -> int:
        return self.lattice.level

    @property
    def side(self) -> int:
        return self.lattice.shape[0]

    @property
    def blocks(self) -> list[ImpurityBlock]:
        return [self.impurity] if self.impurity is not None else []

    @classmethod
    def from_spec(cls, spec: IsingSpec, variant: str = "modified", impurity: ImpurityKind | None = None) -> LevelState3D:
        _check_dim(spec, 3)
        return cls(*_initial(spec, variant, impurity))

    def value(self, max_intermediate: int | None = None) -> LogScalar:
        return self.lattice.log_factor * final_value(self.lattice, max_intermediate=max_intermediate)


def bootstrap3d(state: LevelState3D, chi: int, cfg: TnsConfig | None = None) -> LevelState3D:
    cfg = _cfg(cfg, chi, state.variant)
    lattice, blocks = bootstrap_lattice(state.lattice, state.blocks, cfg)
    return dataclasses.replace(state, lattice=lattice, impurity=blocks[0] if blocks else None, diagnostics=[])


def iterate3d(state: LevelState3D, chi: int, cfg: TnsConfig | None = None) -> LevelState3D:
    """One level: cube merge with interleaved projections, then the odd
    cubes (and, for the standard variant, the even cubes) skeletonized."""
    if state.impurity is not None and state.variant != "modified":
        raise ValueError("impurity blocks need the modified variant")
    return _advance(state, _cfg(cfg, chi, state.variant))


def run_free_energy_3d(
    spec: IsingSpec, chi: int, cfg: TnsConfig | None = None, metrics: RunMetrics | None = None
) -> RunResult:
    """Coarse-grain and contract the final 2×2×2 torus exactly."""
    _check_dim(spec, 3)
    return free_energy_run(spec, chi, cfg, metrics)


def run_observables_3d(
    spec: IsingSpec,
    chi: int,
    cfg: TnsConfig | None = None,
    which: tuple[str, ...] = OBSERVABLES,
    field_m: float = FIELD_M,
) -> RunResult:
    """``u = -3·⟨σ_iσ_j⟩`` and ``m = ⟨σ_i⟩`` from the center block."""
    _check_dim(spec, 3)
    return observables_run(spec, chi, cfg, which, field_m)


def run_disordered_3d(
    spec: IsingSpec, chi: int, cfg: TnsConfig | None = None, magnetizations: bool = True
) -> RunResult:
    _check_dim(spec, 3)
    if spec.n > MAX_DISORDER_SIDE:
        raise ModelArgumentError(f"3D disordered runs are limited to n <= {MAX_DISORDER_SIDE}, got n={spec.n}")
    return disordered_run(spec, chi, cfg, magnetizations)
