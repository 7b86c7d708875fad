"""Oracle and invariant checks behind ``tns selftest``.

Every check is small enough for a laptop and returns ``(ok, detail)``.
``perturb=True`` flips the sign of every coarse-grained value before it
is compared, which must make the TNS checks fail.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import log
from .engine import TnsConfig, run_spec
from .models import ImpurityKind, IsingSpec, build_network, central_bond
from .network import LogScalar, contract_exact
from .reference import brute_force
from .skeleton import AlsConfig, als_skeletonize
from .tensor_core import DenseTensor, regroup, svd_truncate


@dataclass
class CheckResult:
    group: str
    name: str
    ok: bool
    detail: str
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Check:
    group: str
    name: str
    fn: Callable[[bool], tuple[bool, str]]


def _tns(spec: IsingSpec, chi: int, perturb: bool, impurities=()) -> tuple[LogScalar, list[float]]:
    res = run_spec(spec, TnsConfig(chi=chi), impurities)
    log_z = -res.log_z if perturb else res.log_z
    ratios = [-r for r in res.ratios] if perturb else res.ratios
    return log_z, ratios


def _rel_gap(a: LogScalar, b: LogScalar) -> float:
    """Relative gap of two log values; infinite when the signs differ."""
    if a.sign != b.sign:
        return math.inf
    return abs(a.log_abs - b.log_abs) / max(abs(b.log_abs), 1e-300)


# ── TNS against exact values ─────────────────────────────────────────────────


def _beta_zero(dim: int, L: int) -> Callable[[bool], tuple[bool, str]]:
    def check(perturb: bool) -> tuple[bool, str]:
        spec = IsingSpec(dim=dim, L=L, beta=0.0)
        log_z, _ = _tns(spec, 2, perturb)
        gap = abs(log_z.log_abs / spec.n_sites - math.log(2.0)) if log_z.sign > 0 else math.inf
        return gap <= 1e-9, f"|logZ/N - ln2| = {gap:.2e}"

    return check


def _brute(dim: int, L: int, beta: float) -> Callable[[bool], tuple[bool, str]]:
    def check(perturb: bool) -> tuple[bool, str]:
        spec = IsingSpec(dim=dim, L=L, beta=beta)
        log_z, _ = _tns(spec, 16, perturb)
        gap = _rel_gap(log_z, brute_force(spec))
        return gap <= 1e-8, f"rel gap {gap:.2e}"

    return check


def _bond_impurity(perturb: bool) -> tuple[bool, str]:
    spec = IsingSpec(dim=2, L=2, beta=0.3)
    i, j = central_bond(2, spec.n)
    kind = ImpurityKind.bond_product(i, j)
    _, ratios = _tns(spec, 8, perturb, [kind])
    exact = (brute_force(spec, kind) / brute_force(spec)).to_float()
    gap = abs(ratios[0] - exact) / abs(exact)
    return gap <= 1e-3, f"<s_i s_j> {ratios[0]:.8f} vs {exact:.8f}"


def _fake_impurity(perturb: bool) -> tuple[bool, str]:
    spec = IsingSpec(dim=2, L=3, beta=0.4)
    # σ_i·σ_i = 1: the impurity network is the bulk network.
    site = central_bond(2, spec.n)[0]
    _, ratios = _tns(spec, 4, perturb, [ImpurityKind("bond_product", (site, site))])
    gap = abs(ratios[0] - 1.0)
    return gap <= 1e-10, f"|ratio - 1| = {gap:.2e}"


# ── Building blocks ──────────────────────────────────────────────────────────


def _als_monotone(perturb: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 7))
        t = DenseTensor(rng.standard_normal((n, n, int(rng.integers(2, 9)))), ("a", "b", "f"))
        hist = np.array(als_skeletonize(t, int(rng.integers(1, n)), AlsConfig(max_iters=20)).objective_history)
        scale = float(np.sum(np.einsum("eef->f", t.array) ** 2))
        rises = np.diff(hist) / max(scale, 1e-300)
        worst = max(worst, float(rises.max(initial=0.0)))
    return worst <= 1e-12, f"largest relative rise {worst:.2e}"


def _als_full_rank(perturb: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 6))
        t = DenseTensor(rng.standard_normal((n, n, 5)), ("a", "b", "f"))
        worst = max(worst, als_skeletonize(t, n).residual_rel)
    return worst <= 1e-8, f"worst residual {worst:.2e}"


def _svd_discarded(perturb: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        rows, cols = (int(x) for x in rng.integers(2, 12, size=2))
        t = DenseTensor(rng.standard_normal((rows, cols)), ("l", "r"))
        chi = int(rng.integers(1, min(rows, cols) + 1))
        res = svd_truncate(t, ["l"], chi, 0.0)
        approx = (res.left.array * res.singular_values) @ res.right.array.T
        worst = max(worst, abs(np.linalg.norm(t.array - approx) - res.discarded_weight))
    return worst <= 1e-10, f"worst mismatch {worst:.2e}"


def _svd_orthonormal(perturb: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        t = DenseTensor(rng.standard_normal((3, 4, 5)), ("a", "b", "c"))
        u = svd_truncate(t, ["a", "b"], 6).left.array.reshape(12, -1)
        worst = max(worst, float(np.abs(u.T @ u - np.eye(u.shape[1])).max()))
    return worst <= 1e-12, f"max |U^T U - I| {worst:.2e}"


def _regroup_roundtrip(perturb: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(9)
    t = DenseTensor(rng.standard_normal((2, 3, 4, 5)), ("a", "b", "c", "d"))
    g = regroup(t, [["c", "a"], ["d", "b"]])
    back = DenseTensor(g.array.reshape(4, 2, 5, 3), ("c", "a", "d", "b")).transpose(t.legs)
    return bool(np.array_equal(back.array, t.array)), "bit-identical" if np.array_equal(back.array, t.array) else "differs"


def _contract_order(perturb: bool) -> tuple[bool, str]:
    spec = IsingSpec(dim=2, L=1, beta=0.37, field=0.1)
    net = build_network(spec)
    greedy = contract_exact(net)
    edges = [e.id for e in net.interior_edges]
    reverse = contract_exact(net, order=list(reversed(edges)))
    gap = _rel_gap(reverse, greedy)
    return gap <= 1e-10, f"order gap {gap:.2e}"


CHECKS: list[Check] = [
    Check("exact", "beta0_2d_L4", _beta_zero(2, 4)),
    Check("exact", "beta0_3d_L2", _beta_zero(3, 2)),
    Check("brute", "2d_n4_beta0.3", _brute(2, 2, 0.3)),
    Check("brute", "3d_n2_beta0.2217", _brute(3, 1, 0.2217)),
    Check("impurity", "bond_product_4x4", _bond_impurity),
    Check("impurity", "fake_impurity", _fake_impurity),
    Check("als", "monotone", _als_monotone),
    Check("als", "full_rank", _als_full_rank),
    Check("svd", "discarded_weight", _svd_discarded),
    Check("svd", "orthonormal", _svd_orthonormal),
    Check("regroup", "roundtrip", _regroup_roundtrip),
    Check("contract", "order_independent", _contract_order),
]

GROUPS = tuple(dict.fromkeys(c.group for c in CHECKS))


def run_selftest(pattern: str | None = None, perturb: bool = False) -> list[CheckResult]:
    """Run every check whose group or name contains *pattern*."""
    results = []
    for check in CHECKS:
        if pattern and pattern not in check.group and pattern not in check.name:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = check.fn(perturb)
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        results.append(CheckResult(check.group, check.name, bool(ok), detail, time.perf_counter() - t0))
        log.debug("selftest %s/%s: %s %s", check.group, check.name, "ok" if ok else "FAIL", detail)
    return results
