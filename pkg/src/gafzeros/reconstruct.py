"""Recovering |f| from the zero set.

For the disk family with parameter rho, ordering the zeros by modulus,

    |f(0)| = c_rho * prod_k exp(rho / (2k)) |z_k|,
    c_rho  = exp((rho - gamma - gamma rho) / 2) * rho^(-rho/2),

and around a general point zeta the zeros are ordered by pseudo-hyperbolic
distance |T_zeta(z)| and the product picks up (1 - |zeta|^2)^(-rho/2).  Only
finitely many zeros are ever available, so every estimate is a truncated
product whose running values are returned for convergence diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import mobius

__all__ = [
    "EULER_GAMMA",
    "ReconstructionResult",
    "c_rho",
    "c_prime_rho",
    "reconstruct_abs_f0",
    "reconstruct_abs_f_at",
    "reconstruct_abs_fprime_at_zero",
    "jensen_estimate",
]

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class ReconstructionResult:
    estimate: float
    terms_used: int
    partial_products: np.ndarray


def c_rho(rho: float) -> float:
    if not rho > 0:
        raise ValueError("rho must be positive")
    return math.exp(0.5 * (rho - EULER_GAMMA - EULER_GAMMA * rho)) * rho ** (-0.5 * rho)


def c_prime_rho(rho: float) -> float:
    if not rho > 0:
        raise ValueError("rho must be positive")
    return math.exp(0.5 * rho - 0.5 * EULER_GAMMA)


def _product(moduli: np.ndarray, rho: float, K: int, prefactor: float) -> ReconstructionResult:
    if K < 0 or K > moduli.size:
        raise ValueError(f"K={K} outside 0..{moduli.size}")
    m = moduli[:K]
    if np.any(m == 0):
        first = int(np.argmax(m == 0))
        partial = np.empty(K)
        if first:
            partial[:first] = _running(m[:first], rho, prefactor)
        partial[first:] = 0.0
        return ReconstructionResult(0.0, K, partial)
    partial = _running(m, rho, prefactor)
    est = partial[-1] if K else prefactor
    return ReconstructionResult(float(est), K, partial)


def _running(m, rho, prefactor):
    k = np.arange(1, m.size + 1)
    logs = np.cumsum(rho / (2.0 * k) + np.log(m))
    return prefactor * np.exp(logs)


def reconstruct_abs_f0(zeros_by_modulus, rho: float, K: int | None = None) -> ReconstructionResult:
    """Truncated product estimate of |f(0)| from zeros sorted by modulus."""
    z = np.asarray(zeros_by_modulus, dtype=complex)
    m = np.abs(z)
    if np.any(np.diff(m) < 0):
        raise ValueError("zeros must be sorted by increasing modulus")
    return _product(m, rho, z.size if K is None else K, c_rho(rho))


def reconstruct_abs_f_at(zeta: complex, zeros, rho: float, K: int | None = None) -> ReconstructionResult:
    """Estimate of |f(zeta)|, zeros ordered by pseudo-hyperbolic distance from zeta."""
    zeta = complex(zeta)
    if abs(zeta) >= 1:
        raise ValueError("zeta must lie inside the unit disk")
    z = np.asarray(zeros, dtype=complex)
    t, _ = mobius(zeta, z) if z.size else (np.empty(0, complex), None)
    t = np.atleast_1d(t)
    d = np.abs(t)
    order = np.lexsort((np.angle(t), d))
    pref = c_rho(rho) * (1.0 - abs(zeta) ** 2) ** (-0.5 * rho)
    return _product(d[order], rho, z.size if K is None else K, pref)


def reconstruct_abs_fprime_at_zero(other_zeros_by_modulus, rho: float, K: int | None = None) -> ReconstructionResult:
    """Estimate of |f'(0)| given a zero at the origin, from the other zeros."""
    z = np.asarray(other_zeros_by_modulus, dtype=complex)
    if np.any(z == 0):
        raise ValueError("origin zero must be excluded")
    return reconstruct_abs_f0(z, rho, K)


def jensen_estimate(zeros_within_r, r: float, rho: float) -> float:
    """c'_rho (1 - r^2)^(-rho/2) prod_{|z|<r} |z|."""
    z = np.asarray(zeros_within_r, dtype=complex)
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    if np.any(np.abs(z) >= r):
        raise ValueError("all zeros must satisfy |z| < r")
    log_val = math.log(c_prime_rho(rho)) - 0.5 * rho * math.log1p(-r * r) + float(np.sum(np.log(np.abs(z))))
    return math.exp(log_val)
