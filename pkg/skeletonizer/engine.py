"""Periodic lattice of site tensors and the coarse-graining steps.

A ``Lattice`` stores one tensor per *cell*: site ``s`` carries the tensor
of cell ``s mod period``. A homogeneous run starts with period 1 on every
axis and a disordered one with ``period == shape``, so one code path
serves both. An ``ImpurityBlock`` holds the few site tensors that differ
from the bulk (σ insertions) and follows every step in lockstep.

One coarse-graining level (:func:`tns_level`):

1. merge site pairs along each axis; the grouped transverse bonds are
   UU'T-projected to the mid bond (after every axis in 3D, after the last
   one in 2D);
2. unless the lattice is down to 2 sites per axis, skeletonize every odd
   cell, then (standard variant) every even cell.

Everything is normalized after each step and the scale kept in
``log_factor``. Runs stop once every axis has at most 2 sites; that
remainder is contracted exactly.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from math import prod
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import BOOTSTRAP, BOUNDARY_BOND, DEFAULT_CHI, DEFAULT_VARIANT, MAX_INTERMEDIATE, MID_BOND, REL_CUTOFF, THREADS, UR_BOND, log
from .metrics import RunMetrics
from .models import AXES, ImpurityKind, IsingSpec, bond_matrix, bond_root, edge_factors, leg_names, shift, site_tensor
from .network import CollapsedNetworkError, Edge, LogScalar, ResourceLimitError, TensorNetwork, contract_exact, normalize_tensor
from .settings import VARIANTS, TnsSettings
from .skeleton import EXT, AlsConfig, CellDiagnostics, cell_leg, skeletonize_cell
from .tensor_core import DenseTensor, NonFiniteError, contract, regroup, ur_project, uut_project

__all__ = [
    "EngineResult",
    "ImpurityBlock",
    "Lattice",
    "LevelRecord",
    "NonFiniteError",
    "TnsConfig",
    "block_ratio",
    "bootstrap_lattice",
    "coarse_grain",
    "final_value",
    "lattice_from_spec",
    "merge_all",
    "merge_axis",
    "normalize",
    "project_axis",
    "run_spec",
    "sweep_cells",
    "tns_level",
    "truncate_bonds",
]

Site = tuple
Cell = tuple


def _minus(axis: int) -> str:
    return f"{AXES[axis]}-"


def _plus(axis: int) -> str:
    return f"{AXES[axis]}+"


def _with(t: tuple, axis: int, value: int) -> tuple:
    return t[:axis] + (value,) + t[axis + 1 :]


# ── Configuration ────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TnsConfig:
    """Coarse-graining controls.

    Attributes:
        chi: Bond dimension kept by the skeletonization.
        variant: ``"standard"`` skeletonizes both cell parities per level,
            ``"modified"`` only the odd one.
        rel_cutoff: Relative singular-value cutoff of every SVD.
        mid_bond: Bond kept by the merge projections; 0 picks ``chi**2``
            in 2D and ``min(chi**2, chi + 2)`` in 3D.
        ur_bond: Cap of the UR projections at cell corners; 0 means
            uncapped in 2D and ``chi**3`` in 3D.
        boundary_bond: Half-cell boundary cut inside the skeletonization;
            0 fits against the exact environment.
        bootstrap: Merge without truncation while the bond is below chi.
        als: ALS controls for the skeleton solves.
        max_intermediate: Entry cap for any single tensor built.
        threads: Worker threads for per-cell work.
    """

    chi: int = DEFAULT_CHI
    variant: str = DEFAULT_VARIANT
    rel_cutoff: float = REL_CUTOFF
    mid_bond: int = MID_BOND
    ur_bond: int = UR_BOND
    boundary_bond: int = BOUNDARY_BOND
    bootstrap: bool = BOOTSTRAP
    als: AlsConfig = field(default_factory=AlsConfig)
    max_intermediate: int = MAX_INTERMEDIATE
    threads: int = THREADS

    def __post_init__(self) -> None:
        if self.chi < 1:
            raise ValueError(f"chi must be >= 1, got {self.chi}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if min(self.mid_bond, self.ur_bond, self.boundary_bond) < 0:
            raise ValueError("mid_bond, ur_bond and boundary_bond must be >= 0")

    def mid_for(self, dim: int) -> int:
        if self.mid_bond:
            return max(self.mid_bond, self.chi)
        return self.chi**2 if dim == 2 else min(self.chi**2, self.chi + 2)

    def ur_for(self, dim: int) -> int | None:
        if self.ur_bond:
            return self.ur_bond
        return None if dim == 2 else self.chi**3

    @classmethod
    def from_settings(cls, settings: TnsSettings, **overrides) -> TnsConfig:
        als = AlsConfig(
            alpha_rel=settings.als_alpha_rel,
            max_iters=settings.als_max_iters,
            rel_obj_tol=settings.als_rel_obj_tol,
            restarts=settings.als_restarts,
            rng_seed=settings.als_seed,
        )
        values = {
            "chi": settings.chi,
            "variant": settings.variant,
            "rel_cutoff": settings.rel_cutoff,
            "mid_bond": settings.mid_bond,
            "ur_bond": settings.ur_bond,
            "boundary_bond": settings.boundary_bond,
            "bootstrap": settings.bootstrap,
            "als": als,
            "max_intermediate": settings.max_intermediate,
            "threads": settings.threads,
        }
        values.update(overrides)
        return cls(**values)


# ── State ────────────────────────────────────────────────────────────────────


@dataclass
class Lattice:
    """Periodic lattice whose site ``s`` carries ``cells[s mod period]``.

    Attributes:
        shape: Sites per axis.
        period: Cell repeat per axis; divides ``shape``.
        cells: Cell coordinates -> tensor with legs ``(x-, x+, y-, y+, ...)``.
        log_factor: Scalar pulled out of the tensors so far.
        level: Coarse-graining steps applied, bootstrap rounds included.
    """

    shape: tuple[int, ...]
    period: tuple[int, ...]
    cells: dict[Cell, DenseTensor]
    log_factor: LogScalar = field(default_factory=LogScalar.one)
    level: int = 0

    def __post_init__(self) -> None:
        self.shape = tuple(self.shape)
        self.period = tuple(self.period)
        if len(self.shape) != len(self.period) or len(self.shape) not in (2, 3):
            raise ValueError(f"shape {self.shape} and period {self.period} must both have 2 or 3 axes")
        for n, p in zip(self.shape, self.period):
            if p < 1 or n % p:
                raise ValueError(f"period {self.period} does not divide shape {self.shape}")
        expected = set(itertools.product(*(range(p) for p in self.period)))
        if set(self.cells) != expected:
            raise ValueError(f"cells must be keyed by every coordinate of period {self.period}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def multiplicity(self) -> int:
        """Sites sharing each cell tensor."""
        return prod(n // p for n, p in zip(self.shape, self.period))

    @property
    def n_sites(self) -> int:
        return prod(self.shape)

    @property
    def is_final(self) -> bool:
        return max(self.shape) <= 2

    def cell_of(self, site: Site) -> Cell:
        return tuple(s % p for s, p in zip(site, self.period))

    def tensor_at(self, site: Site) -> DenseTensor:
        return self.cells[self.cell_of(site)]

    def sites(self) -> Iterable[Site]:
        return itertools.product(*(range(n) for n in self.shape))

    def max_bond(self) -> int:
        return max(max(t.shape) for t in self.cells.values())

    def bond_dims(self) -> set[int]:
        return {d for t in self.cells.values() for d in t.shape}


@dataclass
class ImpurityBlock:
    """Sites whose tensors differ from the bulk lattice.

    Attributes:
        specials: Absolute site -> tensor replacing the bulk one there.
        log_factor: Scale pulled out of the specials beyond the bulk scale.
        zero: Set once the specials vanish; the ratio is then 0.
        label: Tag used in log lines.
    """

    specials: dict[Site, DenseTensor]
    log_factor: LogScalar = field(default_factory=LogScalar.one)
    zero: bool = False
    label: str = ""


@dataclass
class LevelRecord:
    """Diagnostics of one coarse-graining step.

    Attributes:
        level: Lattice level after the step.
        kind: ``"bootstrap"`` or ``"tns"``.
        shape: Sites per axis after the step.
        max_bond: Largest bond after the step.
        cells: Number of distinct bulk cells skeletonized.
        max_residual: Worst relative ALS residual of the step.
        als_iters: ALS sweeps summed over the step.
        seconds: Wall time of the step.
    """

    level: int
    kind: str
    shape: tuple[int, ...]
    max_bond: int
    cells: int = 0
    max_residual: float = 0.0
    als_iters: int = 0
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "kind": self.kind,
            "shape": list(self.shape),
            "max_bond": self.max_bond,
            "cells": self.cells,
            "max_residual": self.max_residual,
            "als_iters": self.als_iters,
            "seconds": round(self.seconds, 6),
        }


@dataclass
class EngineResult:
    """Outcome of :func:`coarse_grain`.

    Attributes:
        log_z: Value of the bulk network.
        levels: One record per step.
        ratios: Impurity value over bulk value, one per block.
        lattice: Final lattice (at most 2 sites per axis).
    """

    log_z: LogScalar
    levels: list[LevelRecord]
    ratios: list[float]
    lattice: Lattice


# ── Construction ─────────────────────────────────────────────────────────────


def _edges_around(spec: IsingSpec, sites: Iterable[Site]) -> set:
    edges = set()
    for s in sites:
        for axis in range(spec.dim):
            edges.add((s, axis))
            edges.add((shift(s, axis, -1, spec.n), axis))
    return edges


def lattice_from_spec(
    spec: IsingSpec, impurities: Sequence[ImpurityKind] = ()
) -> tuple[Lattice, list[ImpurityBlock]]:
    """Level-0 lattice for *spec* plus one block per impurity.

    Homogeneous specs get a single cell, with every edge split the same
    way (first factor at the origin); anything else gets one cell per site.
    """
    shape = (spec.n,) * spec.dim
    if spec.homogeneous:
        origin = (0,) * spec.dim
        bulk_sites = [origin]
        period = (1,) * spec.dim
        touched = {origin}
        for kind in impurities:
            touched.update(kind.sites)
        a, b = bond_root(bond_matrix(spec.beta, spec.coupling((origin, 0))))
        factors = {e: (a.array, b.array) for e in _edges_around(spec, touched)}
    else:
        bulk_sites = list(spec.sites())
        period = shape
        factors = edge_factors(spec)
    cells = {s: site_tensor(spec, s, 0, factors) for s in bulk_sites}
    blocks = []
    for kind in impurities:
        specials = {s: site_tensor(spec, s, p, factors) for s, p in kind.powers().items()}
        blocks.append(ImpurityBlock(specials, label=f"{kind.tag}{list(kind.sites)}"))
    return Lattice(shape, period, cells), blocks


# ── Helpers ──────────────────────────────────────────────────────────────────


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    """``[fn(x) for x in items]``, on a thread pool when *threads* > 1."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def _keys(period: tuple[int, ...]) -> list[Cell]:
    return list(itertools.product(*(range(p) for p in period)))


def _tensor(lattice: Lattice, block: ImpurityBlock, site: Site) -> DenseTensor:
    t = block.specials.get(site)
    return t if t is not None else lattice.tensor_at(site)


# ── Merge ────────────────────────────────────────────────────────────────────


def _merge_pair(lo: DenseTensor, hi: DenseTensor, axis: int, dim: int, cap: int) -> DenseTensor:
    m, p = _minus(axis), _plus(axis)
    size = (lo.size // lo.dim(p)) * (hi.size // hi.dim(m))
    if size > cap:
        raise ResourceLimitError(f"merging along {AXES[axis]} builds {size} entries (cap {cap})")
    legs = leg_names(dim)
    a = lo.relabel({leg: (0, leg) for leg in legs})
    b = hi.relabel({leg: (1, leg) for leg in legs})
    out = contract(a, b, [((0, p), (1, m))])
    groups: list[list] = []
    for other in range(dim):
        om, op = _minus(other), _plus(other)
        if other == axis:
            groups += [[(0, om)], [(1, op)]]
        else:
            groups += [[(0, om), (1, om)], [(0, op), (1, op)]]
    return regroup(out, groups, labels=legs)


def merge_axis(
    lattice: Lattice, blocks: Sequence[ImpurityBlock], axis: int, cfg: TnsConfig
) -> tuple[Lattice, list[ImpurityBlock]]:
    """Contract site pairs ``(2k, 2k+1)`` along *axis*.

    The lower site keeps its minus leg and the upper its plus leg on the
    axis; each transverse leg becomes the (lower, upper) pair.
    """
    n = lattice.shape[axis]
    if n < 2 or n % 2:
        raise ValueError(f"axis {AXES[axis]} has {n} sites; merging needs an even count")
    dim = lattice.dim
    shape = _with(lattice.shape, axis, n // 2)
    period = _with(lattice.period, axis, max(1, lattice.period[axis] // 2))

    def pair(site: Site) -> tuple[Site, Site]:
        return _with(site, axis, 2 * site[axis]), _with(site, axis, 2 * site[axis] + 1)

    def build(cell: Cell) -> DenseTensor:
        lo, hi = pair(cell)
        return _merge_pair(lattice.tensor_at(lo), lattice.tensor_at(hi), axis, dim, cfg.max_intermediate)

    keys = _keys(period)
    cells = dict(zip(keys, _map(build, keys, cfg.threads)))
    out = []
    for block in blocks:
        if block.zero:
            out.append(block)
            continue
        specials = {}
        for target in sorted({_with(s, axis, s[axis] // 2) for s in block.specials}):
            lo, hi = pair(target)
            specials[target] = _merge_pair(
                _tensor(lattice, block, lo), _tensor(lattice, block, hi), axis, dim, cfg.max_intermediate
            )
        out.append(replace(block, specials=specials))
    return Lattice(shape, period, cells, lattice.log_factor, lattice.level), out


# ── Projections ──────────────────────────────────────────────────────────────


def _projector(t: DenseTensor, axis: int, keep: int, rel_cutoff: float) -> np.ndarray:
    u, _ = uut_project(t, [_minus(axis)], keep, rel_cutoff, bond="k")
    return u.array


def _apply(t: DenseTensor, leg: str, u: np.ndarray) -> DenseTensor:
    mat = DenseTensor(u, ("e", "k"))
    return contract(t, mat, [(leg, "e")]).relabel({"k": leg}).transpose(t.legs)


def project_axis(
    lattice: Lattice, blocks: Sequence[ImpurityBlock], axis: int, keep: int, cfg: TnsConfig
) -> tuple[Lattice, list[ImpurityBlock]]:
    """Replace every bond along *axis* by ``U U^T`` and absorb the halves.

    ``U`` comes from the site on the plus side (its minus leg against the
    rest); that site takes ``U^T``, its neighbour takes ``U``.
    """
    m, p = _minus(axis), _plus(axis)
    keys = _keys(lattice.period)
    us = dict(zip(keys, _map(lambda c: _projector(lattice.cells[c], axis, keep, cfg.rel_cutoff), keys, cfg.threads)))

    def build(cell: Cell) -> DenseTensor:
        t = _apply(lattice.cells[cell], m, us[cell])
        return _apply(t, p, us[lattice.cell_of(shift(cell, axis, 1, lattice.shape))])

    cells = dict(zip(keys, _map(build, keys, cfg.threads)))
    out = []
    for block in blocks:
        if block.zero:
            out.append(block)
            continue
        own: dict[Site, np.ndarray] = {}

        def edge_u(owner: Site) -> np.ndarray:
            below = shift(owner, axis, -1, lattice.shape)
            if owner in block.specials and below in block.specials:
                if owner not in own:
                    own[owner] = _projector(block.specials[owner], axis, keep, cfg.rel_cutoff)
                return own[owner]
            return us[lattice.cell_of(owner)]

        specials = {}
        for s, t in block.specials.items():
            t = _apply(t, m, edge_u(s))
            specials[s] = _apply(t, p, edge_u(shift(s, axis, 1, lattice.shape)))
        out.append(replace(block, specials=specials))
    return Lattice(lattice.shape, lattice.period, cells, lattice.log_factor, lattice.level), out


def truncate_bonds(
    lattice: Lattice, blocks: Sequence[ImpurityBlock], keep: int, cfg: TnsConfig
) -> tuple[Lattice, list[ImpurityBlock]]:
    blocks = list(blocks)
    for axis in range(lattice.dim):
        lattice, blocks = project_axis(lattice, blocks, axis, keep, cfg)
    return lattice, blocks


# ── Cell sweeps ──────────────────────────────────────────────────────────────


def _outer_legs(delta: tuple, dim: int) -> list[str]:
    return [_minus(a) if delta[a] == 0 else _plus(a) for a in range(dim)]


def _inner_legs(delta: tuple, dim: int) -> list[str]:
    return [_plus(a) if delta[a] == 0 else _minus(a) for a in range(dim)]


def _process_cell(corners: dict, cfg: TnsConfig) -> tuple[dict, CellDiagnostics]:
    dim = len(next(iter(corners)))
    ur_keep = cfg.ur_for(dim)
    us, rs = {}, {}
    for delta, t in corners.items():
        outer = _outer_legs(delta, dim)
        inner = _inner_legs(delta, dim)
        keep = ur_keep or prod(t.dim(leg) for leg in outer)
        u, r = ur_project(t, outer, keep, cfg.rel_cutoff, bond=EXT)
        us[delta] = u
        rs[delta] = r.relabel({inner[a]: cell_leg(a) for a in range(dim)})
    reduced, diag = skeletonize_cell(rs, cfg.chi, cfg.als, cfg.rel_cutoff, cfg.boundary_bond)
    legs = leg_names(dim)
    out = {}
    for delta, r in reduced.items():
        inner = _inner_legs(delta, dim)
        t = contract(us[delta], r, [(EXT, EXT)])
        out[delta] = t.relabel({cell_leg(a): inner[a] for a in range(dim)}).transpose(legs)
    return out, diag


def _lower_corner(site: Site, parity: int, shape: tuple[int, ...]) -> Site:
    return tuple(s if (s - parity) % 2 == 0 else (s - 1) % n for s, n in zip(site, shape))


def sweep_cells(
    lattice: Lattice, blocks: Sequence[ImpurityBlock], parity: int, cfg: TnsConfig
) -> tuple[Lattice, list[ImpurityBlock], list[CellDiagnostics]]:
    """Skeletonize every cell whose lower corner has all coordinates ≡ *parity* (mod 2).

    Corners are UR-projected (exterior legs into ``U``, cell legs into
    ``R``), the ``R`` cell is skeletonized to ``cfg.chi`` and ``U`` is
    contracted back. Cells containing an impurity site are redone with
    the special tensors, and all their corners become special.
    """
    if parity not in (0, 1):
        raise ValueError(f"parity must be 0 or 1, got {parity}")
    if min(lattice.shape) < 2:
        raise ValueError(f"cells need at least 2 sites per axis, shape is {lattice.shape}")
    dim = lattice.dim
    shape = lattice.shape
    period = tuple(max(p, 2) for p in lattice.period)
    deltas = list(itertools.product((0, 1), repeat=dim))

    def at(lower: Site, delta: tuple) -> Site:
        return tuple((l + d) % n for l, d, n in zip(lower, delta, shape))

    jobs: list[tuple[int | None, Site, dict]] = []
    for lower in itertools.product(*(range(parity, q, 2) for q in period)):
        jobs.append((None, lower, {d: lattice.tensor_at(at(lower, d)) for d in deltas}))
    for i, block in enumerate(blocks):
        if block.zero:
            continue
        for lower in sorted({_lower_corner(s, parity, shape) for s in block.specials}):
            jobs.append((i, lower, {d: _tensor(lattice, block, at(lower, d)) for d in deltas}))

    results = _map(lambda job: _process_cell(job[2], cfg), jobs, cfg.threads)

    cells: dict[Cell, DenseTensor] = {}
    specials = [dict(b.specials) for b in blocks]
    diags = []
    for (owner, lower, _), (out, diag) in zip(jobs, results):
        for delta, t in out.items():
            site = at(lower, delta)
            if owner is None:
                cells[tuple(s % q for s, q in zip(site, period))] = t
            else:
                specials[owner][site] = t
        if owner is None:
            diags.append(diag)
    new_blocks = [b if b.zero else replace(b, specials=specials[i]) for i, b in enumerate(blocks)]
    return Lattice(shape, period, cells, lattice.log_factor, lattice.level), new_blocks, diags


# ── Normalization ────────────────────────────────────────────────────────────


def normalize(lattice: Lattice, blocks: Sequence[ImpurityBlock]) -> tuple[Lattice, list[ImpurityBlock]]:
    """Scale every cell tensor to max-abs 1, keeping the scale in ``log_factor``.

    Special tensors are divided by the scale of the cell they replace;
    what is left over is pulled out per block into the block's log.
    """
    scales: dict[Cell, float] = {}
    cells = {}
    log_factor = lattice.log_factor
    mult = lattice.multiplicity
    for cell, t in lattice.cells.items():
        scaled, factor = normalize_tensor(t)
        cells[cell] = scaled
        scales[cell] = t.max_abs()
        log_factor = log_factor * factor**mult
    out = []
    for block in blocks:
        if block.zero:
            out.append(block)
            continue
        specials = {s: DenseTensor(t.array / scales[lattice.cell_of(s)], t.legs) for s, t in block.specials.items()}
        peak = max(t.max_abs() for t in specials.values())
        if peak == 0.0:
            log.warning("impurity block %s vanished at level %d; its ratio is zero", block.label, lattice.level)
            out.append(replace(block, specials=specials, zero=True))
            continue
        block_log = block.log_factor
        if peak != 1.0:
            specials = {s: DenseTensor(t.array / peak, t.legs) for s, t in specials.items()}
            block_log = block_log * LogScalar(1, len(specials) * math.log(peak))
        out.append(replace(block, specials=specials, log_factor=block_log))
    return replace(lattice, cells=cells, log_factor=log_factor), out


# ── Levels ───────────────────────────────────────────────────────────────────


def merge_all(
    lattice: Lattice, blocks: Sequence[ImpurityBlock], cfg: TnsConfig, keep: int | None
) -> tuple[Lattice, list[ImpurityBlock]]:
    """Merge along every axis; with *keep*, project the grouped bonds to it."""
    blocks = list(blocks)
    dim = lattice.dim
    for axis in range(dim):
        lattice, blocks = merge_axis(lattice, blocks, axis, cfg)
        lattice, blocks = normalize(lattice, blocks)
        if keep is not None and dim > 2:
            for other in range(dim):
                if other != axis:
                    lattice, blocks = project_axis(lattice, blocks, other, keep, cfg)
    if keep is not None and dim == 2:
        lattice, blocks = truncate_bonds(lattice, blocks, keep, cfg)
    return lattice, blocks


def tns_level(
    lattice: Lattice, blocks: Sequence[ImpurityBlock], cfg: TnsConfig
) -> tuple[Lattice, list[ImpurityBlock], list[CellDiagnostics]]:
    """One coarse-graining level: merge, project, skeletonize."""
    lattice, blocks = merge_all(lattice, blocks, cfg, keep=cfg.mid_for(lattice.dim))
    diags: list[CellDiagnostics] = []
    if not lattice.is_final:
        for parity in (1, 0) if cfg.variant == "standard" else (1,):
            lattice, blocks, cell_diags = sweep_cells(lattice, blocks, parity, cfg)
            lattice, blocks = normalize(lattice, blocks)
            diags += cell_diags
    return replace(lattice, level=lattice.level + 1), blocks, diags


def bootstrap_lattice(
    lattice: Lattice,
    blocks: Sequence[ImpurityBlock],
    cfg: TnsConfig,
    on_round: Callable[[Lattice, float], None] | None = None,
) -> tuple[Lattice, list[ImpurityBlock]]:
    """Merge without truncation while every bond is below ``cfg.chi``.

    A round that would leave the lattice at the exact-finish size is not
    taken. Bonds that overshoot chi are then projected down to it.
    """
    blocks = list(blocks)
    while max(lattice.shape) > 4 and lattice.max_bond() < cfg.chi:
        t0 = time.perf_counter()
        lattice, blocks = merge_all(lattice, blocks, cfg, keep=None)
        lattice = replace(lattice, level=lattice.level + 1)
        if on_round is not None:
            on_round(lattice, time.perf_counter() - t0)
    if not lattice.is_final and lattice.max_bond() > cfg.chi:
        lattice, blocks = truncate_bonds(lattice, blocks, cfg.chi, cfg)
        lattice, blocks = normalize(lattice, blocks)
    return lattice, blocks


# ── Final contraction ────────────────────────────────────────────────────────


def final_value(
    lattice: Lattice, specials: dict[Site, DenseTensor] | None = None, max_intermediate: int | None = None
) -> LogScalar:
    """Exact value of a lattice with at most 2 sites per axis."""
    if not lattice.is_final:
        raise ValueError(f"exact finish needs at most 2 sites per axis, shape is {lattice.shape}")
    specials = specials or {}
    vertices = {s: specials.get(s, lattice.tensor_at(s)) for s in lattice.sites()}
    edges = []
    for s in lattice.sites():
        for axis in range(lattice.dim):
            target = shift(s, axis, 1, lattice.shape)
            edges.append(Edge((s, axis), (s, _plus(axis)), (target, _minus(axis)), vertices[s].dim(_plus(axis))))
    value = contract_exact(TensorNetwork(vertices, edges), max_intermediate=max_intermediate)
    assert isinstance(value, LogScalar)
    return value


def block_ratio(lattice: Lattice, block: ImpurityBlock, bulk: LogScalar, max_intermediate: int | None = None) -> float:
    """Impurity network value divided by the bulk value."""
    if block.zero:
        return 0.0
    if bulk.is_zero:
        raise CollapsedNetworkError("bulk network contracted to zero")
    value = final_value(lattice, block.specials, max_intermediate)
    return (block.log_factor * value / bulk).to_float()


# ── Driver ───────────────────────────────────────────────────────────────────


def coarse_grain(
    lattice: Lattice,
    blocks: Sequence[ImpurityBlock] = (),
    cfg: TnsConfig | None = None,
    metrics: RunMetrics | None = None,
) -> EngineResult:
    """Coarse-grain to at most 2 sites per axis and contract the rest exactly."""
    cfg = cfg or TnsConfig()
    blocks = list(blocks)
    if blocks and cfg.variant != "modified":
        raise ValueError("impurity blocks need the modified variant")
    levels: list[LevelRecord] = []

    def record(kind: str, lat: Lattice, diags: list[CellDiagnostics], seconds: float) -> None:
        rec = LevelRecord(
            level=lat.level,
            kind=kind,
            shape=lat.shape,
            max_bond=lat.max_bond(),
            cells=len(diags),
            max_residual=max((d.max_residual for d in diags), default=0.0),
            als_iters=sum(d.total_iters for d in diags),
            seconds=seconds,
        )
        levels.append(rec)
        log.debug(
            "level %d (%s): shape=%s bond=%d cells=%d residual=%.3g %.3fs",
            rec.level,
            kind,
            rec.shape,
            rec.max_bond,
            rec.cells,
            rec.max_residual,
            seconds,
        )
        if metrics is not None:
            metrics.step(f"level_{rec.level}", extra=rec.as_dict())

    lattice, blocks = normalize(lattice, blocks)
    if cfg.bootstrap:
        lattice, blocks = bootstrap_lattice(
            lattice, blocks, cfg, on_round=lambda lat, sec: record("bootstrap", lat, [], sec)
        )
    while not lattice.is_final:
        t0 = time.perf_counter()
        lattice, blocks, diags = tns_level(lattice, blocks, cfg)
        record("tns", lattice, diags, time.perf_counter() - t0)

    bulk = final_value(lattice, max_intermediate=cfg.max_intermediate)
    log_z = lattice.log_factor * bulk
    ratios = [block_ratio(lattice, b, bulk, cfg.max_intermediate) for b in blocks]
    return EngineResult(log_z, levels, ratios, lattice)


def run_spec(
    spec: IsingSpec,
    cfg: TnsConfig | None = None,
    impurities: Sequence[ImpurityKind] = (),
    metrics: RunMetrics | None = None,
) -> EngineResult:
    lattice, blocks = lattice_from_spec(spec, impurities)
    return coarse_grain(lattice, blocks, cfg, metrics)
