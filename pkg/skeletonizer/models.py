"""Ising models on periodic square and cubic lattices as tensor networks.

Spins map to indices as σ(0) = +1, σ(1) = -1. Each lattice edge carries
the Boltzmann matrix ``S = exp(βJσσ')`` split into two factors, one per
endpoint; each site sums its spin over the product of its 2·dim factors
(plus the field weight ``exp(βBσ)`` and optional σ insertions).

Site legs are ordered ``(x-, x+, y-, y+[, z-, z+])``. Edge ``(site, axis)``
runs from ``site`` to ``site + e_axis`` (periodic) and attaches to the
``+`` leg of its origin and the ``-`` leg of its target.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.linalg

from .config import log
from .network import Edge, TensorNetwork
from .tensor_core import DenseTensor

Site = tuple  # tuple[int, ...]
EdgeId = tuple  # (Site, axis)

SPINS = np.array([1.0, -1.0])
AXES = "xyz"
DISTRIBUTIONS = ("pm1", "gaussian")


class ModelArgumentError(ValueError):
    """Invalid lattice, coupling or impurity specification."""


def leg_names(dim: int) -> tuple[str, ...]:
    """Canonical site legs, e.g. ``('x-', 'x+', 'y-', 'y+')`` for dim 2."""
    return tuple(f"{AXES[a]}{s}" for a in range(dim) for s in "-+")


def shift(site: Site, axis: int, step: int, n: int | tuple[int, ...]) -> Site:
    sizes = (n,) * len(site) if isinstance(n, int) else n
    out = list(site)
    out[axis] = (out[axis] + step) % sizes[axis]
    return tuple(out)


# ── Specs ────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Uniform:
    """Same coupling on every edge."""

    J: float = 1.0


@dataclass(frozen=True)
class PerEdge:
    """Coupling per edge id ``(site, axis)``.

    Attributes:
        values: Edge id -> J.
        distribution: Name of the sampling distribution, if sampled.
    """

    values: Mapping[EdgeId, float]
    distribution: str = "custom"


@dataclass(frozen=True)
class IsingSpec:
    """One Ising instance on an ``n^dim`` torus, ``n = 2**L``.

    Attributes:
        dim: 2 or 3.
        L: Non-negative level count.
        beta: Inverse temperature, >= 0.
        field: Uniform external field B.
        couplings: ``Uniform`` or ``PerEdge``.
        seed: RNG seed used for disorder sampling.
        site_fields: Optional per-site field overriding ``field``.
    """

    dim: int
    L: int
    beta: float
    field: float = 0.0
    couplings: Uniform | PerEdge = Uniform()
    seed: int = 0
    site_fields: Mapping[Site, float] | None = None

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ModelArgumentError(f"dim must be 2 or 3, got {self.dim}")
        if self.L < 0:
            raise ModelArgumentError(f"L must be >= 0, got {self.L}")
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ModelArgumentError(f"beta must be finite and >= 0, got {self.beta}")
        if isinstance(self.couplings, PerEdge):
            expected = set(self.edge_ids())
            got = set(self.couplings.values)
            if got != expected:
                missing = len(expected - got)
                extra = len(got - expected)
                raise ModelArgumentError(f"per-edge couplings must cover the edge set ({missing} missing, {extra} extra)")
        if self.site_fields is not None and set(self.site_fields) != set(self.sites()):
            raise ModelArgumentError("site_fields must give a value for every site")

    @property
    def n(self) -> int:
        return 2**self.L

    @property
    def n_sites(self) -> int:
        return self.n**self.dim

    @property
    def homogeneous(self) -> bool:
        return isinstance(self.couplings, Uniform) and self.site_fields is None

    def sites(self) -> Iterator[Site]:
        return itertools.product(range(self.n), repeat=self.dim)

    def edge_ids(self) -> Iterator[EdgeId]:
        for site in self.sites():
            for axis in range(self.dim):
                yield (site, axis)

    def coupling(self, edge: EdgeId) -> float:
        if isinstance(self.couplings, Uniform):
            return self.couplings.J
        return float(self.couplings.values[edge])

    def site_field(self, site: Site) -> float:
        if self.site_fields is None:
            return self.field
        return float(self.site_fields[site])


@dataclass(frozen=True)
class ImpurityKind:
    """Observable inserted into the spin sum.

    Attributes:
        tag: ``"none"``, ``"single_spin"`` or ``"bond_product"``.
        sites: The σ-carrying sites (one or two).
    """

    tag: str = "none"
    sites: tuple = ()

    def __post_init__(self) -> None:
        counts = {"none": 0, "single_spin": 1, "bond_product": 2}
        if self.tag not in counts:
            raise ModelArgumentError(f"unknown impurity tag {self.tag!r}")
        if len(self.sites) != counts[self.tag]:
            raise ModelArgumentError(f"{self.tag} needs {counts[self.tag]} site(s), got {self.sites!r}")

    @classmethod
    def none(cls) -> ImpurityKind:
        return cls()

    @classmethod
    def single_spin(cls, site: Site) -> ImpurityKind:
        return cls("single_spin", (tuple(site),))

    @classmethod
    def bond_product(cls, i: Site, j: Site) -> ImpurityKind:
        return cls("bond_product", (tuple(i), tuple(j)))

    def powers(self) -> dict[Site, int]:
        """Site -> number of σ factors inserted there."""
        out: dict[Site, int] = {}
        for s in self.sites:
            out[s] = out.get(s, 0) + 1
        return out

    def validate(self, spec: IsingSpec) -> None:
        if self.tag == "none":
            return
        block = set(central_block(spec.dim, spec.n))
        for s in self.sites:
            if len(s) != spec.dim or s not in block:
                raise ModelArgumentError(f"impurity site {s!r} is outside the central block of a {spec.n}-lattice")
        if self.tag == "bond_product":
            i, j = self.sites
            diffs = [(a, (j[a] - i[a]) % spec.n) for a in range(spec.dim) if i[a] != j[a]]
            if len(diffs) != 1 or diffs[0][1] not in (1, spec.n - 1):
                raise ModelArgumentError(f"bond_product sites {i!r}, {j!r} are not nearest neighbours")


def central_block(dim: int, n: int) -> list[Site]:
    """The ``2^dim`` sites ``{c-1, c}^dim`` with ``c = n // 2``."""
    if n < 2:
        raise ModelArgumentError("impurities need n >= 2")
    c = n // 2
    return list(itertools.product((c - 1, c), repeat=dim))


def central_bond(dim: int, n: int) -> tuple[Site, Site]:
    """A nearest-neighbour pair inside the central block, along x."""
    c = n // 2
    i = (c - 1,) * dim
    return i, (c,) + i[1:]


# ── Bond matrices ────────────────────────────────────────────────────────────


def bond_matrix(beta: float, J: float, B_share: float = 0.0) -> DenseTensor:
    """``S[σ, σ'] = exp(βJσσ' + βB_share(σ + σ'))`` with legs ``("l", "r")``."""
    s = SPINS
    arr = np.exp(beta * J * np.outer(s, s) + beta * B_share * (s[:, None] + s[None, :]))
    return DenseTensor(arr, ("l", "r"))


def bond_root(S: DenseTensor) -> tuple[DenseTensor, DenseTensor]:
    """Split ``S = A·B`` over a new index; returns ``(A, B^T)``.

    Both factors have legs ``("spin", "bond")``. For positive semidefinite
    ``S`` the split is the symmetric square root (``A == B^T``). Otherwise
    the eigenvalue signs are absorbed into ``A``, which belongs on the
    lexicographically smaller endpoint of the edge.
    """
    mat = S.array
    if not np.allclose(mat, mat.T, rtol=1e-13, atol=0.0):
        raise ModelArgumentError("bond matrix must be symmetric")
    lam, vec = scipy.linalg.eigh(mat)
    scale = max(float(np.abs(lam).max()), np.finfo(float).tiny)
    lam = np.where(np.abs(lam) < 1e-15 * scale, 0.0, lam)
    root = np.sqrt(np.abs(lam))
    if (lam >= 0).all():
        r = (vec * root) @ vec.T
        sym = DenseTensor(r, ("spin", "bond"))
        return sym, sym
    a = vec * (np.sign(lam) * root)
    b = vec * root
    return DenseTensor(a, ("spin", "bond")), DenseTensor(b, ("spin", "bond"))


# ── Network construction ─────────────────────────────────────────────────────


def edge_factors(
    spec: IsingSpec, edges: Iterable[EdgeId] | None = None
) -> dict[EdgeId, tuple[np.ndarray, np.ndarray]]:
    """Edge -> (factor at origin, factor at target), both ``spin × bond``.

    *edges* restricts the map to a subset (default: every edge).
    """
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    out = {}
    for edge in spec.edge_ids() if edges is None else edges:
        J = spec.coupling(edge)
        if J not in cache:
            a, b = bond_root(bond_matrix(spec.beta, J))
            cache[J] = (a.array, b.array)
        a, b = cache[J]
        site, axis = edge
        target = shift(site, axis, 1, spec.n)
        out[edge] = (a, b) if site <= target else (b, a)
    return out


def site_tensor(
    spec: IsingSpec,
    site: Site,
    power: int = 0,
    factors: Mapping[EdgeId, tuple[np.ndarray, np.ndarray]] | None = None,
) -> DenseTensor:
    """Site tensor ``Σ_σ e^{βBσ} σ^power Π_legs F_leg[σ, ·]``."""
    factors = factors if factors is not None else edge_factors(spec)
    mats = []
    for axis in range(spec.dim):
        mats.append(factors[(shift(site, axis, -1, spec.n), axis)][1])
        mats.append(factors[(site, axis)][0])
    weight = np.exp(spec.beta * spec.site_field(site) * SPINS) * SPINS**power
    arr = np.zeros(tuple(m.shape[1] for m in mats))
    for k, w in enumerate(weight):
        term = np.asarray(w)
        for m in mats:
            term = np.multiply.outer(term, m[k])
        arr += term
    return DenseTensor(arr, leg_names(spec.dim))


def build_network(spec: IsingSpec, impurity: ImpurityKind | None = None) -> TensorNetwork:
    """Closed periodic network whose value is ``Σ_σ O(σ)·e^{-βH}``.

    Intended for oracle-scale lattices; the coarse-graining drivers build
    their lattices from :func:`site_tensor` directly.
    """
    impurity = impurity or ImpurityKind.none()
    impurity.validate(spec)
    powers = impurity.powers()
    factors = edge_factors(spec)
    vertices = {s: site_tensor(spec, s, powers.get(s, 0), factors) for s in spec.sites()}
    edges = []
    for site, axis in spec.edge_ids():
        target = shift(site, axis, 1, spec.n)
        ax = AXES[axis]
        edges.append(Edge((site, axis), (site, f"{ax}+"), (target, f"{ax}-"), vertices[site].dim(f"{ax}+")))
    log.debug("build_network: dim=%d n=%d beta=%.6g impurity=%s", spec.dim, spec.n, spec.beta, impurity.tag)
    return TensorNetwork(vertices, edges)


# ── Disorder ─────────────────────────────────────────────────────────────────


def sample_ea_couplings(spec: IsingSpec, distribution: str = "pm1", seed: int | None = None) -> PerEdge:
    """Edwards-Anderson couplings, deterministic in ``seed`` (default ``spec.seed``)."""
    if distribution not in DISTRIBUTIONS:
        raise ModelArgumentError(f"distribution must be one of {DISTRIBUTIONS}, got {distribution!r}")
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    edges = list(spec.edge_ids())
    if distribution == "pm1":
        draws = rng.choice(np.array([-1.0, 1.0]), size=len(edges))
    else:
        draws = rng.standard_normal(len(edges))
    return PerEdge({e: float(j) for e, j in zip(edges, draws)}, distribution)


def ferromagnetic_couplings(spec: IsingSpec) -> PerEdge:
    return PerEdge({e: 1.0 for e in spec.edge_ids()}, "ferro")


def gauge_transform(spec: IsingSpec, signs: Mapping[Site, int]) -> IsingSpec:
    """Apply ``σ_i -> ε_iσ_i``: ``J_ij -> ε_iε_jJ_ij`` and ``B_i -> ε_iB_i``."""
    values = {}
    for edge in spec.edge_ids():
        site, axis = edge
        target = shift(site, axis, 1, spec.n)
        values[edge] = signs[site] * signs[target] * spec.coupling(edge)
    dist = spec.couplings.distribution if isinstance(spec.couplings, PerEdge) else "custom"
    fields = {s: signs[s] * spec.site_field(s) for s in spec.sites()}
    return IsingSpec(spec.dim, spec.L, spec.beta, spec.field, PerEdge(values, dist), spec.seed, fields)


def random_gauge(spec: IsingSpec, seed: int) -> dict[Site, int]:
    rng = np.random.default_rng(seed)
    return {s: int(e) for s, e in zip(spec.sites(), rng.choice([-1, 1], size=spec.n_sites))}


def disorder_to_json(spec: IsingSpec) -> dict:
    """Serializable realization ``{seed, distribution, dim, L, edges: [...]}``."""
    if not isinstance(spec.couplings, PerEdge):
        raise ModelArgumentError("only per-edge couplings form a disorder realization")
    edges = []
    for site, axis in spec.edge_ids():
        target = shift(site, axis, 1, spec.n)
        edges.append({"u": list(site), "v": list(target), "axis": axis, "J": spec.coupling((site, axis))})
    return {
        "seed": spec.seed,
        "distribution": spec.couplings.distribution,
        "dim": spec.dim,
        "L": spec.L,
        "edges": edges,
    }


def disorder_from_json(doc: Mapping, beta: float, field: float = 0.0) -> IsingSpec:
    values = {(tuple(e["u"]), int(e["axis"])): float(e["J"]) for e in doc["edges"]}
    couplings = PerEdge(values, doc.get("distribution", "custom"))
    return IsingSpec(int(doc["dim"]), int(doc["L"]), beta, field, couplings, int(doc.get("seed", 0)))


def save_disorder(spec: IsingSpec, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(disorder_to_json(spec), indent=2), encoding="utf-8")
    return path


def load_disorder(path: str | Path, beta: float, field: float = 0.0) -> IsingSpec:
    return disorder_from_json(json.loads(Path(path).read_text(encoding="utf-8")), beta, field)
