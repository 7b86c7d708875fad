"""Structure-preserving skeletonization of plaquettes and cubes.

The core problem: for a 3-tensor ``T[a, b, f]`` find ``X, Y`` (χ_e × χ_c)
so that inserting ``X·Y^T`` on the loop edge keeps ``Σ_e T[e, e, f]``:

    min ‖tr_e T − Σ_ab (X Y^T)_ab T_ab·‖² + α(‖X‖² + ‖Y‖²)

Each ALS half-step is an exact ridge least-squares solve (Cholesky on the
normal equations). ``skeletonize_cell`` applies it edge by edge around a
2^d cell of corner tensors; ``skeletonize_plaquette`` / ``skeletonize_cube``
are the 2D / 3D entry points.

Corner tensors carry legs ``("ext", "c0", ..., "c{d-1}")``: one grouped
exterior leg plus one leg per axis; corner ``δ``'s leg ``c{a}`` is bonded
to corner ``δ ⊕ e_a``'s leg ``c{a}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from .config import ALS_ALPHA_REL, ALS_MAX_ITERS, ALS_REL_OBJ_TOL, ALS_RESTARTS, ALS_SEED, REL_CUTOFF, log
from .tensor_core import DenseTensor, TensorArgumentError, contract

EXT = "ext"
_GRAM_FLOOR = 1e-14

Corner = tuple  # δ ∈ {0, 1}^d


def cell_leg(axis: int) -> str:
    return f"c{axis}"


@dataclass(frozen=True)
class AlsConfig:
    """ALS controls.

    Attributes:
        alpha_rel: Ridge weight relative to ``‖tr_e T‖²``.
        max_iters: Full (X then Y) sweeps per start.
        rel_obj_tol: Stop when a sweep lowers the objective by less than
            this fraction.
        restarts: Number of starts; the first is the SVD start, the others
            random orthonormal.
        rng_seed: Seed for the random starts.
    """

    alpha_rel: float = ALS_ALPHA_REL
    max_iters: int = ALS_MAX_ITERS
    rel_obj_tol: float = ALS_REL_OBJ_TOL
    restarts: int = ALS_RESTARTS
    rng_seed: int = ALS_SEED

    def __post_init__(self) -> None:
        if not self.alpha_rel > 0:
            raise ValueError(f"alpha_rel must be > 0, got {self.alpha_rel}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.rel_obj_tol < 0:
            raise ValueError(f"rel_obj_tol must be >= 0, got {self.rel_obj_tol}")


@dataclass(frozen=True, eq=False)
class SkeletonPair:
    """Result of one ALS solve.

    Attributes:
        x: χ_e × χ_c tensor, legs ``("e", "c")``; goes on the ``a`` side.
        y: χ_e × χ_c tensor, legs ``("e", "c")``; goes on the ``b`` side.
        residual_rel: ``‖tr_e T − fit‖ / ‖tr_e T‖``.
        iters_used: Sweeps run by the returned start.
        objective_history: Objective after every half-step of that start,
            starting with the initial value.
    """

    x: DenseTensor
    y: DenseTensor
    residual_rel: float
    iters_used: int
    objective_history: tuple = ()


# ── ALS ──────────────────────────────────────────────────────────────────────


def _ridge_solve(m: np.ndarray, rhs: np.ndarray, alpha: float) -> np.ndarray:
    gram = m.T @ m
    gram[np.diag_indices_from(gram)] += alpha
    target = m.T @ rhs
    try:
        c = scipy.linalg.cho_factor(gram, overwrite_a=False)
        return scipy.linalg.cho_solve(c, target, overwrite_b=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.lstsq(gram, target)[0]


def als_skeletonize(t: DenseTensor, chi_c: int, cfg: AlsConfig | None = None) -> SkeletonPair:
    """Regularized ALS for the loop-edge insertion ``X·Y^T``.

    *t* is read positionally as ``(a, b, f)``; ``a`` and ``b`` must have
    equal dimension χ_e and ``1 <= chi_c <= χ_e``.
    """
    cfg = cfg or AlsConfig()
    if t.ndim != 3:
        raise TensorArgumentError(f"ALS needs a 3-tensor (a, b, f), got {t!r}")
    T = t.array
    n = T.shape[0]
    if T.shape[1] != n:
        raise TensorArgumentError(f"legs a and b must match, got {T.shape[:2]}")
    if not 1 <= chi_c <= n:
        raise TensorArgumentError(f"chi_c must be in [1, {n}], got {chi_c}")
    F = T.shape[2]

    t0 = np.einsum("eef->f", T)
    norm0 = float(np.linalg.norm(t0))
    scale2 = norm0**2 or float(np.sum(T * T)) or 1.0
    alpha = cfg.alpha_rel * scale2

    def residual(X: np.ndarray, Y: np.ndarray) -> tuple[float, float]:
        fit = np.einsum("ac,abf,bc->f", X, T, Y, optimize=True)
        r = float(np.sum((t0 - fit) ** 2))
        return r + alpha * float(np.sum(X * X) + np.sum(Y * Y)), r**0.5

    def solve_x(Y: np.ndarray) -> np.ndarray:
        m = np.einsum("abf,bc->fac", T, Y).reshape(F, n * chi_c)
        return _ridge_solve(m, t0, alpha).reshape(n, chi_c)

    def solve_y(X: np.ndarray) -> np.ndarray:
        m = np.einsum("abf,ac->fbc", T, X).reshape(F, n * chi_c)
        return _ridge_solve(m, t0, alpha).reshape(n, chi_c)

    u, _, _ = scipy.linalg.svd(T.reshape(n, n * F), full_matrices=False)
    starts = [u[:, :chi_c]]
    rng = np.random.default_rng(cfg.rng_seed)
    for _ in range(cfg.restarts - 1):
        q, _ = np.linalg.qr(rng.standard_normal((n, chi_c)))
        starts.append(q)

    best = None
    for start in starts:
        X, Y = start.copy(), start.copy()
        obj, res = residual(X, Y)
        history = [obj]
        iters = 0
        for iters in range(1, cfg.max_iters + 1):
            X = solve_x(Y)
            history.append(residual(X, Y)[0])
            Y = solve_y(X)
            new_obj, res = residual(X, Y)
            history.append(new_obj)
            done = obj - new_obj <= cfg.rel_obj_tol * obj
            obj = new_obj
            if done:
                break
        if best is None or obj < best[0]:
            best = (obj, X, Y, res, iters, tuple(history))

    _, X, Y, res, iters, history = best
    rel = res / norm0 if norm0 > 0 else res
    return SkeletonPair(DenseTensor(X, ("e", "c")), DenseTensor(Y, ("e", "c")), rel, iters, history)


# ── Cell skeletonization ─────────────────────────────────────────────────────


@dataclass
class EdgeReport:
    axis: int
    corner: Corner
    bond_in: int
    bond_out: int
    residual_rel: float = 0.0
    iters: int = 0


@dataclass
class CellDiagnostics:
    """Per-cell record of the edge-by-edge insertions.

    Attributes:
        edges: One report per processed edge, in processing order.
        skipped: Edges already at or below the target bond.
    """

    edges: list[EdgeReport] = field(default_factory=list)
    skipped: int = 0

    @property
    def max_residual(self) -> float:
        return max((e.residual_rel for e in self.edges), default=0.0)

    @property
    def total_iters(self) -> int:
        return sum(e.iters for e in self.edges)


def edge_order(dim: int) -> list[tuple[int, Corner]]:
    """Cell edges as ``(axis, lower corner)``: by axis, other coordinates
    in row-major order. In 2D this is bottom, top, left, right."""
    order = []
    for axis in range(dim):
        for rest in itertools.product((0, 1), repeat=dim - 1):
            delta = rest[:axis] + (0,) + rest[axis:]
            order.append((axis, delta))
    return order


def _flip(delta: Corner, axis: int) -> Corner:
    out = list(delta)
    out[axis] ^= 1
    return tuple(out)


def _face_gram(corners: Mapping[Corner, DenseTensor], face: list[Corner], axis: int, dim: int) -> np.ndarray:
    """Gram matrix of a half-cell over its ``axis`` legs.

    Built from per-corner Grams over the exterior leg, so the half-cell
    tensor itself (with all exterior legs open) is never formed.
    """
    labels = itertools.count()
    edge_u: dict = {}
    edge_v: dict = {}
    open_u = {d: next(labels) for d in face}
    open_v = {d: next(labels) for d in face}
    operands: list = []
    for delta in face:
        sub_u, sub_v = [], []
        for b in range(dim):
            if b == axis:
                sub_u.append(open_u[delta])
                sub_v.append(open_v[delta])
                continue
            key = (b, frozenset((delta, _flip(delta, b))))
            if key not in edge_u:
                edge_u[key] = next(labels)
                edge_v[key] = next(labels)
            sub_u.append(edge_u[key])
            sub_v.append(edge_v[key])
        arr = corners[delta].array
        gram = np.tensordot(arr, arr, axes=([0], [0]))
        operands += [gram, sub_u + sub_v]
    out = [open_u[d] for d in face] + [open_v[d] for d in face]
    g = np.einsum(*operands, out, optimize=True)
    side = int(np.prod(g.shape[: len(face)]))
    return g.reshape(side, side)


def _cut_gram(gram: np.ndarray, keep: int) -> np.ndarray:
    """Rank-*keep* part of a half-cell Gram: the boundary cut ``P ≈ U·U^T·P``."""
    lam, vec = scipy.linalg.eigh(gram)
    lam, vec = lam[::-1][:keep], vec[:, ::-1][:, :keep]
    return (vec * np.clip(lam, 0.0, None)) @ vec.T


def _loop_tensor(g0: np.ndarray, g1: np.ndarray, dims: tuple[int, ...], position: int, rel_cutoff: float) -> np.ndarray:
    """``T[a, b, f]`` whose Gram over ``f`` is the loop environment.

    The two half-cell Grams are joined on every sibling edge, which gives
    ``Σ_f T[a,b,f] T[a',b',f]`` directly; ``f`` then spans at most
    ``χ_e²`` directions.
    """
    m = len(dims)
    a, b, a2, b2 = 0, 1, 2, 3
    rest = [4 + i for i in range(m)]
    rest2 = [4 + m + i for i in range(m)]
    sub0_u, sub0_v, sub1_u, sub1_v = list(rest), list(rest2), list(rest), list(rest2)
    sub0_u[position], sub0_v[position] = a, a2
    sub1_u[position], sub1_v[position] = b, b2
    shaped = dims + dims
    env = np.einsum(g0.reshape(shaped), sub0_u + sub0_v, g1.reshape(shaped), sub1_u + sub1_v, [a, b, a2, b2], optimize=True)
    n = dims[position]
    env = env.reshape(n * n, n * n)
    env = 0.5 * (env + env.T)
    lam, vec = scipy.linalg.eigh(env)
    lam, vec = lam[::-1], vec[:, ::-1]
    if lam[0] <= 0.0:
        return np.zeros((n, n, 1))
    threshold = max(rel_cutoff**2, _GRAM_FLOOR) * lam[0]
    k = max(1, int(np.count_nonzero(lam > threshold)))
    return (vec[:, :k] * np.sqrt(lam[:k])).reshape(n, n, k)


def _insert(t: DenseTensor, leg: str, mat: DenseTensor) -> DenseTensor:
    out = contract(t, mat, [(leg, "e")]).relabel({"c": leg})
    return out.transpose(t.legs)


def skeletonize_cell(
    corners: Mapping[Corner, DenseTensor],
    chi: int,
    cfg: AlsConfig | None = None,
    rel_cutoff: float = REL_CUTOFF,
    boundary_bond: int = 0,
) -> tuple[dict[Corner, DenseTensor], CellDiagnostics]:
    """Reduce every interior bond of a 2^d cell to at most ``chi``.

    Edges are processed in :func:`edge_order`; each insertion is applied
    before the next edge is examined. Exterior legs and topology are
    unchanged.

    Each loop edge is fitted against the exact half-cell environment. A
    positive *boundary_bond* first cuts each half-cell boundary to that
    many directions (``chi**(2**(d-1))`` is the classic choice).
    """
    cfg = cfg or AlsConfig()
    dim = len(next(iter(corners)))
    expected = set(itertools.product((0, 1), repeat=dim))
    if set(corners) != expected:
        raise TensorArgumentError(f"a {dim}-cell needs corners {sorted(expected)}, got {sorted(corners)}")
    legs = (EXT,) + tuple(cell_leg(a) for a in range(dim))
    work = {d: t.transpose(legs) for d, t in corners.items()}
    for axis in range(dim):
        for delta in expected:
            if work[delta].dim(cell_leg(axis)) != work[_flip(delta, axis)].dim(cell_leg(axis)):
                raise TensorArgumentError(f"corners {delta} and {_flip(delta, axis)} disagree on leg c{axis}")

    diag = CellDiagnostics()
    for axis, delta in edge_order(dim):
        leg = cell_leg(axis)
        chi_e = work[delta].dim(leg)
        if chi_e <= chi:
            diag.skipped += 1
            continue
        face0 = sorted(d for d in expected if d[axis] == 0)
        face1 = [_flip(d, axis) for d in face0]
        dims = tuple(work[d].dim(leg) for d in face0)
        g0 = _face_gram(work, face0, axis, dim)
        g1 = _face_gram(work, face1, axis, dim)
        if boundary_bond:
            g0, g1 = _cut_gram(g0, boundary_bond), _cut_gram(g1, boundary_bond)
        loop = DenseTensor(_loop_tensor(g0, g1, dims, face0.index(delta), rel_cutoff), ("a", "b", "f"))
        pair = als_skeletonize(loop, chi, cfg)
        work[delta] = _insert(work[delta], leg, pair.x)
        partner = _flip(delta, axis)
        work[partner] = _insert(work[partner], leg, pair.y)
        diag.edges.append(EdgeReport(axis, delta, chi_e, chi, pair.residual_rel, pair.iters_used))
        if pair.residual_rel > 1e-2:
            log.debug("skeleton edge axis=%d corner=%s: residual %.3g after %d sweeps", axis, delta, pair.residual_rel, pair.iters_used)
    return work, diag


def skeletonize_plaquette(
    corners: Mapping[Corner, DenseTensor],
    chi: int,
    cfg: AlsConfig | None = None,
    rel_cutoff: float = REL_CUTOFF,
    boundary_bond: int = 0,
) -> tuple[dict[Corner, DenseTensor], CellDiagnostics]:
    """2D cell: four 3-tensors keyed ``(0,0), (1,0), (0,1), (1,1)``."""
    if any(len(d) != 2 or t.ndim != 3 for d, t in corners.items()):
        raise TensorArgumentError("a plaquette needs four 3-tensors keyed by 2D corners")
    return skeletonize_cell(corners, chi, cfg, rel_cutoff, boundary_bond)


def skeletonize_cube(
    corners: Mapping[Corner, DenseTensor],
    chi: int,
    cfg: AlsConfig | None = None,
    rel_cutoff: float = REL_CUTOFF,
    boundary_bond: int = 0,
) -> tuple[dict[Corner, DenseTensor], CellDiagnostics]:
    """3D cell: eight 4-tensors keyed by ``{0,1}^3`` corners."""
    if any(len(d) != 3 or t.ndim != 4 for d, t in corners.items()):
        raise TensorArgumentError("a cube needs eight 4-tensors keyed by 3D corners")
    return skeletonize_cell(corners, chi, cfg, rel_cutoff, boundary_bond)


def cell_exterior(corners: Mapping[Corner, DenseTensor]) -> np.ndarray:
    """Contract a cell over its interior bonds; one axis per corner's
    exterior leg, corners in sorted order."""
    dim = len(next(iter(corners)))
    order = sorted(corners)
    labels = itertools.count()
    ext = {d: next(labels) for d in order}
    edge: dict = {}
    operands: list = []
    for delta in order:
        t = corners[delta].transpose((EXT,) + tuple(cell_leg(a) for a in range(dim)))
        sub = [ext[delta]]
        for b in range(dim):
            key = (b, frozenset((delta, _flip(delta, b))))
            if key not in edge:
                edge[key] = next(labels)
            sub.append(edge[key])
        operands += [t.array, sub]
    return np.einsum(*operands, [ext[d] for d in order], optimize=True)
