"""Dense tensors with labelled legs and the local-replacement primitives.

Every tensor in the package is a :class:`DenseTensor`: an immutable
float64 array plus one label per axis. Flattening is row-major (last leg
fastest) everywhere, so a grouped leg built by :func:`regroup` always
enumerates its members in the order they were listed.

Primitives:
- ``contract``      pairwise contraction over labelled leg pairs
- ``self_trace``    partial trace over leg pairs of one tensor
- ``regroup``       permute + fuse legs; ``ungroup`` splits one back
- ``svd_truncate``  truncated SVD with a deterministic sign convention
- ``uut_project`` / ``ur_project``  T ≈ U·(U'T) factorizations
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

Leg = Hashable


class TensorArgumentError(ValueError):
    """Unknown, duplicated or colliding leg labels."""


class ContractShapeError(ValueError):
    """Legs paired for contraction or tracing have different dimensions."""


class NonFiniteError(FloatingPointError):
    """A tensor entry is NaN or infinite."""


# ── Value type ───────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Read-only numeric array with one unique label per leg.

    Attributes:
        array: float64 ndarray, copied and frozen on construction.
        legs: Leg labels, ``len(legs) == array.ndim``.
    """

    array: np.ndarray
    legs: tuple

    def __post_init__(self) -> None:
        arr = np.array(self.array, dtype=np.float64)
        legs = tuple(self.legs)
        if arr.ndim != len(legs):
            raise TensorArgumentError(f"{arr.ndim}-leg array given {len(legs)} labels: {legs!r}")
        if len(set(legs)) != len(legs):
            raise TensorArgumentError(f"leg labels must be unique: {legs!r}")
        if 0 in arr.shape:
            raise TensorArgumentError(f"leg dimensions must be positive: {arr.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"tensor with legs {legs!r} has non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "array", arr)
        object.__setattr__(self, "legs", legs)

    @classmethod
    def from_flat(cls, shape: Sequence[int], data: Iterable[float], legs: Sequence[Leg]) -> DenseTensor:
        """Build from a row-major flat sequence."""
        flat = np.asarray(list(data), dtype=np.float64)
        if flat.size != prod(shape):
            raise TensorArgumentError(f"shape {tuple(shape)} needs {prod(shape)} entries, got {flat.size}")
        return cls(flat.reshape(tuple(shape)), tuple(legs))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Entries in row-major order."""
        return self.array.reshape(-1)

    def axis(self, leg: Leg) -> int:
        try:
            return self.legs.index(leg)
        except ValueError:
            raise TensorArgumentError(f"no leg {leg!r} in {self.legs!r}") from None

    def dim(self, leg: Leg) -> int:
        return self.array.shape[self.axis(leg)]

    def norm(self) -> float:
        return float(np.linalg.norm(self.array))

    def max_abs(self) -> float:
        return float(np.abs(self.array).max())

    def scalar(self) -> float:
        if self.ndim:
            raise TensorArgumentError(f"tensor with legs {self.legs!r} is not a scalar")
        return float(self.array)

    def relabel(self, mapping: dict) -> DenseTensor:
        """Rename legs; labels missing from *mapping* are kept."""
        return DenseTensor(self.array, tuple(mapping.get(leg, leg) for leg in self.legs))

    def transpose(self, legs: Sequence[Leg]) -> DenseTensor:
        legs = tuple(legs)
        if len(legs) != self.ndim or set(legs) != set(self.legs):
            raise TensorArgumentError(f"{legs!r} is not a permutation of {self.legs!r}")
        if legs == self.legs:
            return self
        return DenseTensor(np.transpose(self.array, [self.axis(leg) for leg in legs]), legs)

    def __repr__(self) -> str:
        dims = ", ".join(f"{leg!r}:{d}" for leg, d in zip(self.legs, self.shape))
        return f"DenseTensor({dims})"


class SvdResult(NamedTuple):
    """Truncated SVD ``t ≈ left · diag(singular_values) · right^T``.

    ``left`` carries the left legs plus the bond, ``right`` the remaining
    legs plus the bond; both have orthonormal columns when matricized
    with the bond as the column index.
    """

    left: DenseTensor
    singular_values: np.ndarray
    right: DenseTensor
    discarded_weight: float


# ── Helpers ──────────────────────────────────────────────────────────────────


def _axes(t: DenseTensor, legs: Sequence[Leg]) -> list[int]:
    return [t.axis(leg) for leg in legs]


def _check_unique(legs: Sequence[Leg], what: str) -> None:
    if len(set(legs)) != len(legs):
        raise TensorArgumentError(f"{what}: leg listed twice in {list(legs)!r}")


def _matricize(t: DenseTensor, left_legs: Sequence[Leg]) -> tuple[np.ndarray, tuple, tuple]:
    left_legs = tuple(left_legs)
    _check_unique(left_legs, "left legs")
    if not left_legs or len(left_legs) >= t.ndim:
        raise TensorArgumentError(f"left legs {left_legs!r} must be a non-empty proper subset of {t.legs!r}")
    left_axes = _axes(t, left_legs)
    right_legs = tuple(leg for leg in t.legs if leg not in left_legs)
    right_axes = _axes(t, right_legs)
    arr = np.transpose(t.array, left_axes + right_axes)
    rows = prod(t.shape[i] for i in left_axes)
    return arr.reshape(rows, -1), left_legs, right_legs


# ── Contraction ──────────────────────────────────────────────────────────────


def contract(a: DenseTensor, b: DenseTensor, pairs: Iterable[tuple[Leg, Leg]]) -> DenseTensor:
    """Sum over each ``(leg_of_a, leg_of_b)`` pair.

    Result legs are a's unpaired legs then b's unpaired legs, each in
    their original order. An empty *pairs* gives the outer product.
    """
    pairs = list(pairs)
    a_legs = [p[0] for p in pairs]
    b_legs = [p[1] for p in pairs]
    _check_unique(a_legs, "contract")
    _check_unique(b_legs, "contract")
    a_axes = _axes(a, a_legs)
    b_axes = _axes(b, b_legs)
    for (la, lb), ia, ib in zip(pairs, a_axes, b_axes):
        if a.shape[ia] != b.shape[ib]:
            raise ContractShapeError(f"cannot pair {la!r} (dim {a.shape[ia]}) with {lb!r} (dim {b.shape[ib]})")
    out_legs = tuple(leg for leg in a.legs if leg not in a_legs) + tuple(leg for leg in b.legs if leg not in b_legs)
    if len(set(out_legs)) != len(out_legs):
        raise TensorArgumentError(f"contraction result would repeat a leg label: {out_legs!r}")
    arr = np.tensordot(a.array, b.array, axes=(a_axes, b_axes))
    return DenseTensor(arr, out_legs)


def self_trace(t: DenseTensor, pairs: Iterable[tuple[Leg, Leg]]) -> DenseTensor:
    """Trace each leg pair of *t*; surviving legs keep their order."""
    pairs = list(pairs)
    traced = [leg for p in pairs for leg in p]
    _check_unique(traced, "self_trace")
    subscripts = list(range(t.ndim))
    for first, second in pairs:
        i, j = t.axis(first), t.axis(second)
        if t.shape[i] != t.shape[j]:
            raise ContractShapeError(f"cannot trace {first!r} (dim {t.shape[i]}) with {second!r} (dim {t.shape[j]})")
        subscripts[j] = subscripts[i]
    keep = [i for i, leg in enumerate(t.legs) if leg not in traced]
    arr = np.einsum(t.array, subscripts, [subscripts[i] for i in keep])
    return DenseTensor(arr, tuple(t.legs[i] for i in keep))


# ── Leg grouping ─────────────────────────────────────────────────────────────


def regroup(t: DenseTensor, groups: Sequence[Sequence[Leg]], labels: Sequence[Leg] | None = None) -> DenseTensor:
    """Permute legs into *groups* and fuse each group into one leg.

    A one-member group keeps its label; a larger group is labelled with
    the tuple of its members unless *labels* is given.
    """
    groups = [tuple(g) for g in groups]
    flat = [leg for g in groups for leg in g]
    if any(not g for g in groups) or len(flat) != t.ndim or set(flat) != set(t.legs):
        raise TensorArgumentError(f"groups {groups!r} do not partition legs {t.legs!r}")
    _check_unique(flat, "regroup")
    if labels is None:
        labels = [g[0] if len(g) == 1 else g for g in groups]
    elif len(labels) != len(groups):
        raise TensorArgumentError(f"{len(groups)} groups but {len(labels)} labels")
    arr = np.transpose(t.array, _axes(t, flat))
    dims = [prod(t.dim(leg) for leg in g) for g in groups]
    return DenseTensor(arr.reshape(dims), tuple(labels))


def ungroup(t: DenseTensor, leg: Leg, parts: Sequence[tuple[Leg, int]]) -> DenseTensor:
    """Split *leg* in place into ``parts`` given as ``(label, dim)`` pairs."""
    i = t.axis(leg)
    dims = [d for _, d in parts]
    if prod(dims) != t.shape[i]:
        raise TensorArgumentError(f"parts {parts!r} do not multiply to dim {t.shape[i]} of {leg!r}")
    shape = t.shape[:i] + tuple(dims) + t.shape[i + 1 :]
    legs = t.legs[:i] + tuple(label for label, _ in parts) + t.legs[i + 1 :]
    return DenseTensor(t.array.reshape(shape), legs)


# ── Truncated SVD and projections ────────────────────────────────────────────


def _svd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(
    t: DenseTensor,
    left_legs: Sequence[Leg],
    chi_max: int,
    rel_cutoff: float = 1e-14,
    bond: Leg = "bond",
) -> SvdResult:
    """Truncated SVD of *t* matricized as (left_legs) × (other legs).

    Keeps ``k = min(chi_max, #{σ_i >= rel_cutoff·σ_1})`` values (at least
    one). Each left singular vector is signed so that its largest-magnitude
    entry is positive, the lowest index winning ties. An all-zero input
    yields ``k = 1``, a zero singular value and canonical basis vectors.
    """
    if chi_max < 1:
        raise TensorArgumentError(f"chi_max must be >= 1, got {chi_max}")
    if rel_cutoff < 0:
        raise TensorArgumentError(f"rel_cutoff must be >= 0, got {rel_cutoff}")
    mat, left_legs, right_legs = _matricize(t, left_legs)
    if bond in t.legs:
        raise TensorArgumentError(f"bond label {bond!r} already names a leg of {t.legs!r}")
    rows, cols = mat.shape

    if not mat.any():
        u = np.eye(rows, 1)
        s = np.zeros(1)
        vt = np.eye(1, cols)
        discarded = 0.0
    else:
        u, s, vt = _svd(mat)
        kept = int(np.count_nonzero(s >= rel_cutoff * s[0]))
        k = max(1, min(chi_max, kept))
        discarded = float(np.sqrt(np.sum(s[k:] ** 2)))
        u, s, vt = u[:, :k], s[:k], vt[:k]
        pivots = np.argmax(np.abs(u), axis=0)
        signs = np.sign(u[pivots, np.arange(k)])
        signs[signs == 0] = 1.0
        u = u * signs
        vt = vt * signs[:, None]

    k = s.size
    left_dims = tuple(t.dim(leg) for leg in left_legs)
    right_dims = tuple(t.dim(leg) for leg in right_legs)
    left = DenseTensor(u.reshape(left_dims + (k,)), left_legs + (bond,))
    right = DenseTensor(vt.T.reshape(right_dims + (k,)), right_legs + (bond,))
    return SvdResult(left, s.copy(), right, discarded)


def _factor(t: DenseTensor, left_legs, chi_max, rel_cutoff, bond) -> tuple[DenseTensor, DenseTensor]:
    res = svd_truncate(t, left_legs, chi_max, rel_cutoff, bond)
    right_legs = res.right.legs[:-1]
    core = res.right.array * res.singular_values
    core = np.moveaxis(core, -1, 0)
    return res.left, DenseTensor(core, (bond,) + right_legs)


def uut_project(
    t: DenseTensor,
    left_legs: Sequence[Leg],
    chi_max: int,
    rel_cutoff: float = 1e-14,
    bond: Leg = "bond",
) -> tuple[DenseTensor, DenseTensor]:
    """UU'T-projection: returns ``(u, core)`` with ``core = U'T``.

    ``contract(u, core, [(bond, bond)])`` reproduces *t* up to the
    discarded singular weight; ``core`` legs are ``(bond, *other legs)``.
    """
    return _factor(t, left_legs, chi_max, rel_cutoff, bond)


def ur_project(
    t: DenseTensor,
    left_legs: Sequence[Leg],
    chi_max: int,
    rel_cutoff: float = 1e-14,
    bond: Leg = "bond",
) -> tuple[DenseTensor, DenseTensor]:
    """UR-projection ``t ≈ U·R``; same factorization as :func:`uut_project`.

    Kept separate because callers place ``u`` away from a plaquette and
    ``r`` toward it.
    """
    return _factor(t, left_legs, chi_max, rel_cutoff, bond)
