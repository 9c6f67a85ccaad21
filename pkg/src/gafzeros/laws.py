"""Exact distributional laws for zeros of the i.i.d. Gaussian power series.

The number of zeros N_r in the disk of radius r is a sum of independent
Bernoulli(q^k) variables, q = r^2, k = 1, 2, ...  Everything here follows from
that representation: the generating function prod (1 + q^k s), the PMF,
hole probabilities, binomial moments, mean and variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import RandomStream

__all__ = [
    "CountLaw",
    "PRODUCT_CUT",
    "bernoulli_probs",
    "count_pgf",
    "count_pmf",
    "sample_count",
    "sample_moduli",
    "hole_probability",
    "hole_asymptotic",
    "binomial_moment",
    "mean_variance",
    "expected_zeros_hyperbolic",
    "hyperbolic_area_of_disk",
    "radius_for_hyperbolic_area",
    "euler_series",
]

PRODUCT_CUT = 1e-16
PMF_TAIL_CUT = 1e-14


def _check_r(r):
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")


def bernoulli_probs(r: float, cut: float = PRODUCT_CUT) -> np.ndarray:
    """p_k = r^(2k) for k = 1..K with K the first index where q^K < cut."""
    _check_r(r)
    q = r * r
    kmax = max(1, math.ceil(math.log(cut) / math.log(q)))
    return q ** np.arange(1, kmax + 1, dtype=float)


def count_pgf(r: float, s: float) -> float:
    """E (1 + s)^{N_r} = prod_k (1 + r^(2k) s)."""
    _check_r(r)
    if not s >= -1:
        raise ValueError("s must be at least -1")
    if s == 0:
        return 1.0
    q = r * r
    kmax = max(1, math.ceil(math.log(PRODUCT_CUT / abs(s)) / math.log(q)))
    p = q ** np.arange(1, kmax + 1, dtype=float)
    return float(np.exp(np.sum(np.log1p(p * s))))


def count_pmf(r: float, k_max: int | None = None, tail_cut: float = PMF_TAIL_CUT) -> np.ndarray:
    """Exact PMF of N_r by sequential convolution of Bernoulli factors.

    The result is trimmed where the trailing mass drops below ``tail_cut``
    (pass 0 to keep every entry), or truncated at ``k_max`` when given.
    """
    probs = bernoulli_probs(r)
    pmf = np.array([1.0])
    for p in probs:
        nxt = np.empty(pmf.size + 1)
        nxt[0] = pmf[0] * (1 - p)
        nxt[1:-1] = pmf[1:] * (1 - p) + pmf[:-1] * p
        nxt[-1] = pmf[-1] * p
        pmf = nxt
    tail = np.cumsum(pmf[::-1])[::-1]
    keep = np.nonzero(tail >= tail_cut)[0] if tail_cut > 0 else np.arange(pmf.size)
    pmf = pmf[: keep[-1] + 1] if keep.size else pmf[:1]
    if k_max is not None:
        pmf = pmf[: k_max + 1]
    return pmf


@dataclass
class CountLaw:
    """Distribution of N_r; the PMF is computed on first access."""

    r: float
    tail_cut: float = PRODUCT_CUT
    _pmf: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        _check_r(self.r)

    @property
    def q(self) -> float:
        return self.r * self.r

    @property
    def bernoulli_probs(self) -> np.ndarray:
        return bernoulli_probs(self.r, self.tail_cut)

    @property
    def pmf(self) -> np.ndarray:
        if self._pmf is None:
            self._pmf = count_pmf(self.r)
        return self._pmf

    def cdf(self, k) -> np.ndarray:
        c = np.cumsum(self.pmf)
        k = np.asarray(k)
        out = np.where(k < 0, 0.0, c[np.clip(k, 0, c.size - 1)])
        return np.where(k >= c.size, 1.0, out)

    def mean(self) -> float:
        return mean_variance(self.r)[0]

    def variance(self) -> float:
        return mean_variance(self.r)[1]

    def sample(self, stream: RandomStream, size: int | None = None):
        return sample_count(self.r, stream, size)


def sample_count(r: float, stream: RandomStream, size: int | None = None):
    """Draw N_r as a sum of independent Bernoulli(r^(2k)) variables."""
    probs = bernoulli_probs(r)
    n = 1 if size is None else int(size)
    rows = max(1, (1 << 22) // probs.size)  # bound memory near r = 1
    counts = np.empty(n, dtype=np.int64)
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        u = stream.generator.random((stop - start, probs.size))
        counts[start:stop] = np.count_nonzero(u < probs, axis=1)
    return int(counts[0]) if size is None else counts


def sample_moduli(n: int, stream: RandomStream, size: int | None = None) -> np.ndarray:
    """The set {U_k^(1/(2k)) : k = 1..n}, sorted ascending.

    k is the index in the law, not the rank; only the set has the law of the
    zero moduli.  With ``size`` given, returns ``size`` sorted rows.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rows = 1 if size is None else int(size)
    u = stream.generator.random((rows, n))
    # U^(1/(2k)) = exp(log U / (2k)); 1 - random() lies in (0, 1]
    m = np.exp(np.log1p(-u) / (2.0 * np.arange(1, n + 1)))
    m.sort(axis=1)
    return m[0] if size is None else m


def hole_probability(r: float) -> float:
    """P(N_r = 0) = prod_k (1 - r^(2k))."""
    return float(np.exp(np.sum(np.log1p(-bernoulli_probs(r)))))


def hole_asymptotic(r: float) -> float:
    """Leading behaviour exp(-pi^2 / (12 (1 - r))) of the hole probability."""
    _check_r(r)
    return math.exp(-math.pi**2 / (12.0 * (1.0 - r)))


def binomial_moment(r: float, k: int) -> float:
    """E binom(N_r, k) = r^(k(k+1)) / ((1 - r^2)(1 - r^4)...(1 - r^(2k)))."""
    _check_r(r)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return 1.0
    q = r * r
    j = np.arange(1, k + 1, dtype=float)
    log_val = 0.5 * k * (k + 1) * math.log(q) - np.sum(np.log(-np.expm1(j * math.log(q))))
    if log_val > 709.0:
        raise OverflowError(f"binomial moment overflows: log value {log_val:.1f} at r={r}, k={k}")
    return float(math.exp(log_val))


def mean_variance(r: float) -> tuple:
    """(mu, sigma^2) = (r^2/(1 - r^2), r^2/(1 - r^4))."""
    _check_r(r)
    q = r * r
    return q / (1.0 - q), q / (1.0 - q * q)


def expected_zeros_hyperbolic(rho: float, hyperbolic_area: float) -> float:
    """Expected count rho h / (4 pi) in a region of hyperbolic area h."""
    if not rho > 0 or hyperbolic_area < 0:
        raise ValueError("rho must be positive and the area nonnegative")
    return rho * hyperbolic_area / (4.0 * math.pi)


def hyperbolic_area_of_disk(r: float) -> float:
    """Hyperbolic area 4 pi r^2 / (1 - r^2) of the Euclidean disk of radius r."""
    return 4.0 * math.pi * r * r / (1.0 - r * r)


def radius_for_hyperbolic_area(h: float) -> float:
    return math.sqrt(h / (4.0 * math.pi + h))


def euler_series(q: float, s: float, terms: int = 200) -> float:
    """sum_k q^(k(k+1)/2) s^k / ((1 - q)...(1 - q^k)), truncated."""
    total = 1.0
    term = 1.0
    for k in range(1, terms + 1):
        term *= q**k * s / (1.0 - q**k)
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    return total
