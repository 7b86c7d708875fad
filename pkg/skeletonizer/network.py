"""Tensor-network graphs, exact contraction and log-domain scalars.

``TensorNetwork`` is the oracle-scale representation: a vertex map of
DenseTensors plus an explicit edge list. ``contract_exact`` sums out every
interior edge (greedy smallest-intermediate order by default) and returns
either the boundary tensor or, for a closed network, a ``LogScalar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import prod
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .config import MAX_INTERMEDIATE, log
from .tensor_core import DenseTensor, contract, self_trace

Endpoint = tuple  # (vertex_id, leg)


class ResourceLimitError(RuntimeError):
    """A contraction step would exceed the intermediate-size cap."""


class CollapsedNetworkError(ArithmeticError):
    """A tensor that must carry weight is identically zero."""


# ── LogScalar ────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class LogScalar:
    """Real number stored as ``sign · exp(log_abs)``.

    Attributes:
        sign: -1, 0 or +1.
        log_abs: Natural log of the magnitude; ``-inf`` when ``sign == 0``.
    """

    sign: int
    log_abs: float

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if self.sign == 0:
            object.__setattr__(self, "log_abs", -math.inf)
        elif math.isnan(self.log_abs) or self.log_abs == math.inf:
            raise ValueError(f"log_abs must be finite or -inf, got {self.log_abs!r}")
        elif self.log_abs == -math.inf:
            object.__setattr__(self, "sign", 0)

    @classmethod
    def from_float(cls, x: float) -> LogScalar:
        if x == 0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def one(cls) -> LogScalar:
        return cls(1, 0.0)

    @classmethod
    def zero(cls) -> LogScalar:
        return cls(0, -math.inf)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def to_float(self) -> float:
        """Plain float; raises ``OverflowError`` when out of range."""
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    def __mul__(self, other: LogScalar | float) -> LogScalar:
        if not isinstance(other, LogScalar):
            other = LogScalar.from_float(float(other))
        if self.sign == 0 or other.sign == 0:
            return LogScalar.zero()
        return LogScalar(self.sign * other.sign, self.log_abs + other.log_abs)

    __rmul__ = __mul__

    def __truediv__(self, other: LogScalar | float) -> LogScalar:
        if not isinstance(other, LogScalar):
            other = LogScalar.from_float(float(other))
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogScalar")
        if self.sign == 0:
            return LogScalar.zero()
        return LogScalar(self.sign * other.sign, self.log_abs - other.log_abs)

    def __pow__(self, k: int) -> LogScalar:
        """Integer power, used for multiplicities of repeated tensors."""
        k = int(k)
        if k == 0:
            return LogScalar.one()
        if self.sign == 0:
            if k < 0:
                raise ZeroDivisionError("negative power of a zero LogScalar")
            return LogScalar.zero()
        return LogScalar(self.sign if k % 2 else 1, k * self.log_abs)

    def __add__(self, other: LogScalar | float) -> LogScalar:
        if not isinstance(other, LogScalar):
            other = LogScalar.from_float(float(other))
        return LogScalar.sum([self, other])

    __radd__ = __add__

    def __neg__(self) -> LogScalar:
        return LogScalar(-self.sign, self.log_abs)

    @staticmethod
    def sum(values: Iterable[LogScalar]) -> LogScalar:
        """Signed log-domain sum."""
        terms = [v for v in values if v.sign != 0]
        if not terms:
            return LogScalar.zero()
        logs = np.array([v.log_abs for v in terms])
        signs = np.array([v.sign for v in terms], dtype=np.float64)
        value, sign = logsumexp(logs, b=signs, return_sign=True)
        if sign == 0 or not np.isfinite(value):
            return LogScalar.zero()
        return LogScalar(int(sign), float(value))


def normalize_tensor(t: DenseTensor) -> tuple[DenseTensor, LogScalar]:
    """Scale *t* to max-abs 1; returns ``(t_scaled, factor)``, ``t = t_scaled·factor``."""
    m = t.max_abs()
    if m == 0.0:
        raise CollapsedNetworkError(f"zero tensor {t!r} cannot be normalized")
    return DenseTensor(t.array / m, t.legs), LogScalar(1, math.log(m))


# ── Network graph ────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Edge:
    """One bond of a network; an endpoint of ``None`` is open.

    Attributes:
        id: Hashable edge identifier, unique in the network.
        a: ``(vertex, leg)`` or ``None``.
        b: ``(vertex, leg)`` or ``None``.
        bond_dim: Dimension of both attached legs.
    """

    id: Hashable
    a: Endpoint | None
    b: Endpoint | None
    bond_dim: int

    @property
    def is_boundary(self) -> bool:
        return self.a is None or self.b is None

    @property
    def endpoints(self) -> list[Endpoint]:
        return [e for e in (self.a, self.b) if e is not None]


class TensorNetwork:
    """Vertices, edges, and the interior/boundary split derived from them."""

    def __init__(self, vertices: Mapping[Hashable, DenseTensor], edges: Iterable[Edge]):
        self.vertices: dict = dict(vertices)
        self.edges: list[Edge] = list(edges)
        self._validate()

    def _validate(self) -> None:
        seen: dict = {}
        ids = set()
        for e in self.edges:
            if e.id in ids:
                raise ValueError(f"duplicate edge id {e.id!r}")
            ids.add(e.id)
            if e.a is None and e.b is None:
                raise ValueError(f"edge {e.id!r} has no endpoint")
            for end in e.endpoints:
                vertex, leg = end
                if vertex not in self.vertices:
                    raise ValueError(f"edge {e.id!r} references unknown vertex {vertex!r}")
                if end in seen:
                    raise ValueError(f"leg {end!r} is attached to edges {seen[end]!r} and {e.id!r}")
                seen[end] = e.id
                dim = self.vertices[vertex].dim(leg)
                if dim != e.bond_dim:
                    raise ValueError(f"edge {e.id!r} has bond {e.bond_dim} but leg {end!r} has dim {dim}")
        for vertex, t in self.vertices.items():
            for leg in t.legs:
                if (vertex, leg) not in seen:
                    raise ValueError(f"leg {leg!r} of vertex {vertex!r} is not attached to any edge")

    @property
    def interior_edges(self) -> list[Edge]:
        return [e for e in self.edges if not e.is_boundary]

    @property
    def boundary_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.is_boundary]

    def __repr__(self) -> str:
        return f"TensorNetwork({len(self.vertices)} vertices, {len(self.edges)} edges)"


# ── Exact contraction ────────────────────────────────────────────────────────


def _result_size(a: DenseTensor, b: DenseTensor, shared: set) -> int:
    dims = [d for leg, d in zip(a.legs, a.shape) if leg[0] not in shared]
    dims += [d for leg, d in zip(b.legs, b.shape) if leg[0] not in shared]
    return prod(dims)


def contract_exact(
    net: TensorNetwork,
    order: Sequence[Hashable] | None = None,
    max_intermediate: int | None = None,
) -> DenseTensor | LogScalar:
    """Contract every interior edge of *net*.

    Edges listed in *order* are contracted first (all parallel edges
    between the two nodes go together); the remainder follows the greedy
    smallest-intermediate rule. Returns the boundary tensor with one leg
    per boundary edge (labelled by edge id, in edge order), or a
    ``LogScalar`` when the network is closed.
    """
    cap = MAX_INTERMEDIATE if max_intermediate is None else max_intermediate

    # Legs become (edge_id, side) so both ends of an edge are addressable.
    nodes: dict[int, DenseTensor] = {}
    where: dict = {}
    for node, (vertex, t) in enumerate(net.vertices.items()):
        mapping = {}
        for e in net.edges:
            for side, end in enumerate((e.a, e.b)):
                if end is not None and end[0] == vertex:
                    mapping[end[1]] = (e.id, side)
        nodes[node] = t.relabel(mapping)
        where[vertex] = node
    edge_nodes: dict = {}
    for e in net.edges:
        if not e.is_boundary:
            na, nb = where[e.a[0]], where[e.b[0]]
            if na == nb:
                nodes[na] = self_trace(nodes[na], [((e.id, 0), (e.id, 1))])
            else:
                edge_nodes[e.id] = (na, nb)

    scale = LogScalar.one()
    step = 0
    next_id = len(nodes)

    merged_into: dict[int, int] = {}

    def owner(node: int) -> int:
        while node in merged_into:
            node = merged_into[node]
        return node

    def merge(na: int, nb: int) -> None:
        nonlocal scale, step, next_id
        a, b = nodes[na], nodes[nb]
        shared = {leg[0] for leg in a.legs} & {leg[0] for leg in b.legs}
        size = _result_size(a, b, shared)
        step += 1
        if size > cap:
            raise ResourceLimitError(
                f"contraction step {step}: merging nodes {na} and {nb} needs {size} entries (cap {cap})"
            )
        pairs = []
        for leg in a.legs:
            if leg[0] in shared:
                pairs.append((leg, (leg[0], 1 - leg[1])))
        out = contract(a, b, pairs)
        if out.max_abs() > 0.0:
            out, factor = normalize_tensor(out)
            scale = scale * factor
        nodes[next_id] = out
        del nodes[na], nodes[nb]
        merged_into[na] = merged_into[nb] = next_id
        next_id += 1

    def pending() -> list[tuple[int, int]]:
        pairs = set()
        for na, nb in edge_nodes.values():
            ra, rb = owner(na), owner(nb)
            if ra != rb:
                pairs.add((min(ra, rb), max(ra, rb)))
        return sorted(pairs)

    for eid in order or ():
        if eid not in edge_nodes:
            raise ValueError(f"order names {eid!r}, which is not an interior edge")
        na, nb = (owner(n) for n in edge_nodes[eid])
        if na != nb:
            merge(na, nb)

    while True:
        candidates = pending()
        if not candidates:
            break
        best = min(
            candidates,
            key=lambda p: (
                _result_size(
                    nodes[p[0]],
                    nodes[p[1]],
                    {leg[0] for leg in nodes[p[0]].legs} & {leg[0] for leg in nodes[p[1]].legs},
                ),
                p,
            ),
        )
        merge(*best)

    # Disconnected pieces: outer products, smallest first.
    while len(nodes) > 1:
        na, nb = sorted(nodes, key=lambda n: (nodes[n].size, n))[:2]
        merge(na, nb)

    (result,) = nodes.values()
    log.debug("contract_exact: %d steps, %r", step, net)

    boundary = net.boundary_edges
    if not boundary:
        return scale * result.scalar()
    legs = [(e.id, 0 if e.a is not None else 1) for e in boundary]
    result = result.transpose(legs).relabel({leg: leg[0] for leg in legs})
    return DenseTensor(result.array * scale.to_float(), result.legs)
