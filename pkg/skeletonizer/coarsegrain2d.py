"""2D coarse-graining front end.

``LevelState2D`` wraps an engine lattice with its variant and optional
impurity block; ``bootstrap`` and the ``iterate_*`` functions advance it
one step at a time. The ``run_*`` functions drive a whole instance to a
``RunResult``:

- ``run_free_energy``   log Z and f per site of a homogeneous instance
- ``run_observables``   internal energy u and magnetization m by impurities
- ``run_disordered``    per-edge couplings, per-site ⟨σ_i⟩ and q

The run helpers take the dimension from the spec and are shared with
:mod:`skeletonizer.coarsegrain3d`.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .config import FIELD_M, log
from .engine import (
    EngineResult,
    ImpurityBlock,
    Lattice,
    LevelRecord,
    TnsConfig,
    bootstrap_lattice,
    coarse_grain,
    final_value,
    lattice_from_spec,
    normalize,
    run_spec,
    tns_level,
)
from .metrics import RunMetrics
from .models import ImpurityKind, IsingSpec, ModelArgumentError, central_bond
from .network import CollapsedNetworkError, LogScalar
from .skeleton import CellDiagnostics

OBSERVABLES = ("u", "m")


# ── Level state ──────────────────────────────────────────────────────────────


@dataclass
class LevelState2D:
    """One level of a 2D run.

    Attributes:
        lattice: Bulk tensors, their periods and the accumulated scale.
        variant: ``"standard"`` or ``"modified"``.
        impurity: The center tensors that differ from the bulk, if any.
        diagnostics: Cell reports of the step that produced this state.
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
    def log_factor(self) -> LogScalar:
        return self.lattice.log_factor

    @property
    def blocks(self) -> list[ImpurityBlock]:
        return [self.impurity] if self.impurity is not None else []

    @classmethod
    def from_spec(cls, spec: IsingSpec, variant: str = "modified", impurity: ImpurityKind | None = None) -> LevelState2D:
        _check_dim(spec, 2)
        return cls(*_initial(spec, variant, impurity))

    def value(self, max_intermediate: int | None = None) -> LogScalar:
        """Bulk network value; the lattice must be at most 2×2."""
        return self.lattice.log_factor * final_value(self.lattice, max_intermediate=max_intermediate)

    def impurity_value(self, max_intermediate: int | None = None) -> LogScalar:
        """Impurity network value; zero once the block has vanished."""
        if self.impurity is None:
            raise ValueError("state has no impurity block")
        if self.impurity.zero:
            return LogScalar.zero()
        core = final_value(self.lattice, self.impurity.specials, max_intermediate)
        return self.lattice.log_factor * self.impurity.log_factor * core


def _check_dim(spec: IsingSpec, dim: int) -> None:
    if spec.dim != dim:
        raise ModelArgumentError(f"this driver needs a {dim}D spec, got dim={spec.dim}")


def _initial(spec: IsingSpec, variant: str, impurity: ImpurityKind | None) -> tuple:
    kinds = []
    if impurity is not None and impurity.tag != "none":
        if variant != "modified":
            raise ValueError("impurity blocks need the modified variant")
        impurity.validate(spec)
        kinds.append(impurity)
    lattice, blocks = normalize(*lattice_from_spec(spec, kinds))
    return lattice, variant, blocks[0] if blocks else None


def _cfg(cfg: TnsConfig | None, chi: int, variant: str | None = None) -> TnsConfig:
    changes: dict = {"chi": chi}
    if variant is not None:
        changes["variant"] = variant
    return dataclasses.replace(cfg or TnsConfig(), **changes)


def _advance(state, cfg: TnsConfig):
    lattice, blocks, diags = tns_level(state.lattice, state.blocks, cfg)
    return dataclasses.replace(state, lattice=lattice, impurity=blocks[0] if blocks else None, diagnostics=diags)


# ── Steps ────────────────────────────────────────────────────────────────────


def bootstrap(state: LevelState2D, chi: int, cfg: TnsConfig | None = None) -> LevelState2D:
    """Merge 2×2 neighbourhoods until the bond reaches ``chi``.

    χ = 2 takes no round; χ = 4 takes one. A bond that overshoots is
    projected down to ``chi``.
    """
    cfg = _cfg(cfg, chi, state.variant)
    lattice, blocks = bootstrap_lattice(state.lattice, state.blocks, cfg)
    return dataclasses.replace(state, lattice=lattice, impurity=blocks[0] if blocks else None, diagnostics=[])


def iterate_standard(state: LevelState2D, chi: int, cfg: TnsConfig | None = None) -> LevelState2D:
    """Merge, project, then skeletonize the odd and the even plaquettes."""
    if state.impurity is not None:
        raise ValueError("impurity blocks need the modified variant")
    return _advance(dataclasses.replace(state, variant="standard"), _cfg(cfg, chi, "standard"))


def iterate_modified(state: LevelState2D, chi: int, cfg: TnsConfig | None = None) -> LevelState2D:
    """Merge, project, then skeletonize the odd plaquettes only."""
    return _advance(dataclasses.replace(state, variant="modified"), _cfg(cfg, chi, "modified"))


def iterate_impurity(state: LevelState2D, chi: int, cfg: TnsConfig | None = None) -> LevelState2D:
    """Modified step that also carries the impurity block.

    Bulk projectors and cells are shared; only edges between two special
    sites get their own projector and only cells touching the block are
    skeletonized again.
    """
    if state.impurity is None:
        raise ValueError("state has no impurity block")
    return iterate_modified(state, chi, cfg)


# ── Results ──────────────────────────────────────────────────────────────────


@dataclass
class RunResult:
    """Outcome of a full run.

    Attributes:
        dim: Lattice dimension.
        n_sites: Number of spins N.
        beta: Inverse temperature.
        log_z: ``log Z`` with sign.
        free_energy_per_site: ``-log Z / (β N)``; None at β = 0.
        levels: Per-step diagnostics.
        observables: ``u`` and/or ``m`` when requested.
        magnetizations: Per-site ⟨σ_i⟩ in ``spec.sites()`` order.
        q: Mean of ⟨σ_i⟩² over the sites.
        seconds: Wall time of the whole run.
    """

    dim: int
    n_sites: int
    beta: float
    log_z: LogScalar
    free_energy_per_site: float | None
    levels: list[LevelRecord] = field(default_factory=list)
    observables: dict[str, float] = field(default_factory=dict)
    magnetizations: np.ndarray | None = None
    q: float | None = None
    seconds: float = 0.0

    @property
    def log_z_per_site(self) -> float:
        return self.log_z.log_abs / self.n_sites

    @property
    def seconds_per_iteration(self) -> float:
        """Mean wall time of the coarse-graining levels (bootstrap excluded)."""
        tns = [rec.seconds for rec in self.levels if rec.kind == "tns"]
        return float(np.mean(tns)) if tns else 0.0

    def diagnostics(self) -> list[dict]:
        return [rec.as_dict() for rec in self.levels]


def free_energy_per_site(log_z: LogScalar, beta: float, n_sites: int) -> float | None:
    if log_z.sign <= 0:
        raise CollapsedNetworkError(f"partition function is not positive: {log_z}")
    if beta == 0.0:
        return None
    return -log_z.log_abs / (beta * n_sites)


def _result(spec: IsingSpec, res: EngineResult, started: float) -> RunResult:
    return RunResult(
        dim=spec.dim,
        n_sites=spec.n_sites,
        beta=spec.beta,
        log_z=res.log_z,
        free_energy_per_site=free_energy_per_site(res.log_z, spec.beta, spec.n_sites),
        levels=res.levels,
        seconds=time.perf_counter() - started,
    )


# ── Runs (dimension taken from the spec) ─────────────────────────────────────


def free_energy_run(spec: IsingSpec, chi: int, cfg: TnsConfig | None = None, metrics: RunMetrics | None = None) -> RunResult:
    if not spec.homogeneous:
        raise ModelArgumentError("free-energy runs need a homogeneous spec; use the disordered runner")
    started = time.perf_counter()
    res = run_spec(spec, _cfg(cfg, chi), metrics=metrics)
    out = _result(spec, res, started)
    log.info(
        "free energy: dim=%d n=%d beta=%.6g chi=%d log Z/N=%.12g (%.2fs)",
        spec.dim,
        spec.n,
        spec.beta,
        chi,
        out.log_z_per_site,
        out.seconds,
    )
    return out


def observables_run(
    spec: IsingSpec,
    chi: int,
    cfg: TnsConfig | None = None,
    which: tuple[str, ...] = OBSERVABLES,
    field_m: float = FIELD_M,
    metrics: RunMetrics | None = None,
) -> RunResult:
    """``u = -d·⟨σ_iσ_j⟩`` at the spec's field and ``m = ⟨σ_i⟩``.

    ``m`` is taken at the spec's field when it is positive, otherwise at
    ``field_m``. Both impurities ride on one run when the fields agree.
    """
    unknown = set(which) - set(OBSERVABLES)
    if unknown:
        raise ValueError(f"unknown observables {sorted(unknown)}; choose from {OBSERVABLES}")
    if not spec.homogeneous:
        raise ModelArgumentError("observable runs need a homogeneous spec")
    cfg = _cfg(cfg, chi, "modified")
    i, j = central_bond(spec.dim, spec.n)
    bond = ImpurityKind.bond_product(i, j)
    spin = ImpurityKind.single_spin(i)
    bond.validate(spec)
    m_spec = spec if spec.field > 0 else dataclasses.replace(spec, field=field_m)

    started = time.perf_counter()
    observables: dict[str, float] = {}
    if "m" in which and m_spec is spec:
        kinds = [spin] + ([bond] if "u" in which else [])
        res = run_spec(spec, cfg, kinds, metrics)
        observables["m"] = res.ratios[0]
        if "u" in which:
            observables["u"] = -spec.dim * res.ratios[1]
    else:
        res = run_spec(spec, cfg, [bond] if "u" in which else [], metrics)
        if "u" in which:
            observables["u"] = -spec.dim * res.ratios[0]
        if "m" in which:
            observables["m"] = run_spec(m_spec, cfg, [spin]).ratios[0]
    out = _result(spec, res, started)
    out.observables = observables
    log.info("observables: dim=%d n=%d beta=%.6g chi=%d %s", spec.dim, spec.n, spec.beta, chi, observables)
    return out


def disordered_run(
    spec: IsingSpec,
    chi: int,
    cfg: TnsConfig | None = None,
    magnetizations: bool = True,
    metrics: RunMetrics | None = None,
) -> RunResult:
    """One cell per site; optional per-site ⟨σ_i⟩ from one impurity per site.

    The impurity blocks share every bulk step of the run, so the extra
    cost is the cells and edges touching each block.
    """
    cfg = _cfg(cfg, chi, "modified" if magnetizations else None)
    kinds = [ImpurityKind.single_spin(s) for s in spec.sites()] if magnetizations else []
    started = time.perf_counter()
    lattice, blocks = lattice_from_spec(spec, kinds)
    if lattice.period != lattice.shape:
        lattice = _expand(lattice)
    res = coarse_grain(lattice, blocks, cfg, metrics)
    out = _result(spec, res, started)
    if magnetizations:
        out.magnetizations = np.array(res.ratios)
        out.q = float(np.mean(out.magnetizations**2))
    log.info("disorder: dim=%d n=%d beta=%.6g chi=%d log Z=%.12g q=%s", spec.dim, spec.n, spec.beta, chi, res.log_z.log_abs, out.q)
    return out


def _expand(lattice: Lattice) -> Lattice:
    cells = {s: lattice.tensor_at(s) for s in lattice.sites()}
    return Lattice(lattice.shape, lattice.shape, cells, lattice.log_factor, lattice.level)


# ── 2D entry points ──────────────────────────────────────────────────────────


def run_free_energy(spec: IsingSpec, chi: int, cfg: TnsConfig | None = None, metrics: RunMetrics | None = None) -> RunResult:
    """Bootstrap, coarse-grain, and contract the final 2×2 torus exactly."""
    _check_dim(spec, 2)
    return free_energy_run(spec, chi, cfg, metrics)


def run_observables(
    spec: IsingSpec,
    chi: int,
    cfg: TnsConfig | None = None,
    which: tuple[str, ...] = OBSERVABLES,
    field_m: float = FIELD_M,
) -> RunResult:
    _check_dim(spec, 2)
    return observables_run(spec, chi, cfg, which, field_m)


def run_disordered(
    spec: IsingSpec, chi: int, cfg: TnsConfig | None = None, magnetizations: bool = True
) -> RunResult:
    _check_dim(spec, 2)
    return disordered_run(spec, chi, cfg, magnetizations)
