"""Ground-truth oracles for the square-lattice Ising model.

- ``brute_force``              exact spin sum for small lattices (any dim,
                               couplings, fields, σ insertions)
- ``onsager_free_energy``      thermodynamic-limit f(β), adaptive quadrature
- ``onsager_free_energy_grid`` same quantity by a graded Gauss–Legendre grid
- ``exact_internal_energy``    u(β) through the complete elliptic integral
- ``yang_magnetization``       spontaneous magnetization m_+(β)

All closed forms assume J = 1, B = 0 and H = -Σ σ_iσ_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import ellipk, logsumexp

from .config import log
from .models import ImpurityKind, IsingSpec, shift
from .network import LogScalar, ResourceLimitError

BETA_C = math.log(1.0 + math.sqrt(2.0)) / 2.0
TC_2D = 1.0 / BETA_C  # 2 / ln(1 + √2) ≈ 2.2692
TC_3D = 4.5115

MAX_BRUTE_SPINS = 24
_CHUNK = 1 << 16


# ── Brute force ──────────────────────────────────────────────────────────────


def _arrays(spec: IsingSpec):
    sites = list(spec.sites())
    index = {s: i for i, s in enumerate(sites)}
    u, v, J = [], [], []
    for site, axis in spec.edge_ids():
        u.append(index[site])
        v.append(index[shift(site, axis, 1, spec.n)])
        J.append(spec.coupling((site, axis)))
    h = np.array([spec.site_field(s) for s in sites])
    return index, np.array(u), np.array(v), np.array(J, dtype=np.float64), h


def _chunks(n_spins: int):
    total = 1 << n_spins
    shifts = np.arange(n_spins, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        cfg = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = (cfg[:, None] >> shifts) & 1
        yield 1.0 - 2.0 * bits


def _check_size(spec: IsingSpec) -> None:
    if spec.n_sites > MAX_BRUTE_SPINS:
        raise ResourceLimitError(f"brute force over {spec.n_sites} spins exceeds the {MAX_BRUTE_SPINS}-spin cap")


def brute_force(spec: IsingSpec, impurity: ImpurityKind | None = None) -> LogScalar:
    """``Σ_σ O(σ)·e^{-βH(σ)}`` by enumerating every configuration."""
    _check_size(spec)
    index, u, v, J, h = _arrays(spec)
    inserted = [index[s] for s in (impurity.sites if impurity else ())]
    parts = []
    with np.errstate(divide="ignore"):
        for sigma in _chunks(spec.n_sites):
            logw = spec.beta * ((sigma[:, u] * sigma[:, v]) @ J + sigma @ h)
            b = np.prod(sigma[:, inserted], axis=1) if inserted else None
            value, sign = logsumexp(logw, b=b, return_sign=True)
            if sign != 0 and np.isfinite(value):
                parts.append(LogScalar(int(sign), float(value)))
    result = LogScalar.sum(parts)
    log.debug("brute_force: %d spins, log|Z|=%.12g", spec.n_sites, result.log_abs)
    return result


def brute_force_magnetizations(spec: IsingSpec) -> np.ndarray:
    """Thermal ``⟨σ_i⟩`` for every site, in ``spec.sites()`` order."""
    log_z = brute_force(spec)
    _, u, v, J, h = _arrays(spec)
    acc = np.zeros(spec.n_sites)
    for sigma in _chunks(spec.n_sites):
        logw = spec.beta * ((sigma[:, u] * sigma[:, v]) @ J + sigma @ h)
        acc += np.exp(logw - log_z.log_abs) @ sigma
    return acc


# ── Closed forms ─────────────────────────────────────────────────────────────


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")


def onsager_log_z(beta: float) -> float:
    """``lim log Z_N / N`` for the square lattice (one-dimensional integral)."""
    if beta == 0.0:
        return math.log(2.0)
    _check_beta(beta)
    k = 1.0 / math.sinh(2.0 * beta) ** 2
    c2 = math.cosh(2.0 * beta) ** 2

    def integrand(t: float) -> float:
        return math.log(c2 + math.sqrt(1.0 + k * k - 2.0 * k * math.cos(2.0 * t)) / k)

    res, _ = quad(integrand, 0.0, math.pi, epsabs=1e-14, epsrel=1e-13, limit=400)
    return res / (2.0 * math.pi) + 0.5 * math.log(2.0)


def onsager_free_energy(beta: float) -> float:
    """Free energy per site ``f(β) = -(1/β)·lim log Z_N / N``."""
    _check_beta(beta)
    return -onsager_log_z(beta) / beta


def onsager_free_energy_grid(beta: float, nodes: int = 64) -> float:
    """``f(β)`` from the double integral on a tensorised Gauss–Legendre grid.

    Near criticality the panels are graded geometrically toward
    ``(θ1, θ2) = (0, 0)``, where the integrand's log singularity sits.
    """
    _check_beta(beta)
    levels = 14 if abs(beta - BETA_C) < 0.02 else 0
    breaks = [0.0] + [math.pi * 2.0**-j for j in range(levels, -1, -1)]
    x, w = np.polynomial.legendre.leggauss(nodes)
    pts, wts = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        pts.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w)
    theta = np.concatenate(pts)
    weight = np.concatenate(wts)
    c = np.cos(theta)
    s2 = math.sinh(2.0 * beta)
    inner = math.cosh(2.0 * beta) ** 2 - s2 * (c[:, None] + c[None, :])
    # [0, π]^2 covers a quarter of the symmetric [0, 2π]^2 domain.
    integral = 4.0 * float(weight @ np.log(inner) @ weight)
    return -(math.log(2.0) + integral / (8.0 * math.pi**2)) / beta


def exact_internal_energy(beta: float) -> float:
    """Internal energy per site ``u(β)``; exactly ``-√2`` at ``β_c``."""
    if beta == 0.0:
        return 0.0
    _check_beta(beta)
    t2 = 2.0 * beta
    k = 2.0 * math.sinh(t2) / math.cosh(t2) ** 2
    m = k * k
    coth = 1.0 / math.tanh(t2)
    if m >= 1.0 or math.isclose(beta, BETA_C, rel_tol=1e-14):
        return -coth
    return -coth * (1.0 + (2.0 / math.pi) * (2.0 * math.tanh(t2) ** 2 - 1.0) * float(ellipk(m)))


def yang_magnetization(beta: float) -> float:
    """Spontaneous magnetization ``m_+(β)``; zero for ``β <= β_c``."""
    if beta <= BETA_C:
        return 0.0
    return (1.0 - math.sinh(2.0 * beta) ** -4) ** 0.125


@dataclass(frozen=True)
class ExactCurve:
    """A named closed-form observable ``β -> value``.

    Attributes:
        name: ``free_energy``, ``internal_energy`` or ``magnetization``.
        evaluator: Function of β.
    """

    name: str
    evaluator: Callable[[float], float]

    def __call__(self, beta: float) -> float:
        return self.evaluator(beta)


CURVES = {
    "free_energy": ExactCurve("free_energy", onsager_free_energy),
    "internal_energy": ExactCurve("internal_energy", exact_internal_energy),
    "magnetization": ExactCurve("magnetization", yang_magnetization),
}
