"""Statistical tests used by the verification harness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

__all__ = [
    "ks_statistic",
    "ks_pvalue",
    "ks_lattice_normal",
    "ks_two_sample",
    "chi_square_gof",
    "chi_square_two_sample",
    "mean_and_se",
    "z_score",
    "IntensityGrid",
    "empirical_intensity",
    "annulus_mean_intensity",
]


def ks_statistic(sample, cdf) -> float:
    """Sup distance between the empirical CDF of ``sample`` and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("sample must be nonempty")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_pvalue(statistic: float, n: int) -> float:
    return float(sps.kstwo.sf(statistic, n))


def ks_lattice_normal(sample, mu: float | None = None, sigma: float | None = None) -> float:
    """KS distance of an integer-valued sample to a normal, with continuity correction.

    The empirical CDF is compared with Phi((k + 1/2 - mu)/sigma) at each
    lattice point k in the sample range.  Against the unsmoothed normal
    CDF the distance of any lattice law is at least half its largest atom.
    """
    x = np.asarray(sample)
    mu = float(x.mean()) if mu is None else mu
    sigma = float(x.std(ddof=1)) if sigma is None else sigma
    lo, hi = int(x.min()), int(x.max())
    ks = np.arange(lo - 1, hi + 1)
    counts = np.bincount(x - (lo - 1), minlength=ks.size)
    emp = np.cumsum(counts) / x.size
    model = sps.norm.cdf((ks + 0.5 - mu) / sigma)
    tails = max(sps.norm.cdf((lo - 1.5 - mu) / sigma), sps.norm.sf((hi + 0.5 - mu) / sigma))
    return float(max(np.max(np.abs(emp - model)), tails))


def ks_two_sample(a, b):
    """Two-sample KS statistic and p-value (conservative for discrete data)."""
    res = sps.ks_2samp(np.asarray(a), np.asarray(b))
    return float(res.statistic), float(res.pvalue)


def _pool_tail(expected, observed, min_expected):
    # merge bins from the right until each has enough expected mass
    e = list(expected)
    o = list(observed)
    while len(e) > 1 and e[-1] < min_expected:
        last_e, last_o = e.pop(), o.pop()
        e[-1] += last_e
        o[-1] += last_o
    while len(e) > 1 and e[0] < min_expected:
        first_e, first_o = e.pop(0), o.pop(0)
        e[0] += first_e
        o[0] += first_o
    return np.array(e), np.array(o)


def chi_square_gof(counts, probs, min_expected: float = 5.0):
    """Pearson chi-square of integer ``counts`` (values 0,1,...) against ``probs``.

    Values beyond ``len(probs)`` land in the last cell; sparse tail cells are
    merged.  Returns (statistic, dof, p-value).
    """
    counts = np.asarray(counts, dtype=np.int64)
    probs = np.asarray(probs, dtype=float)
    k = probs.size
    obs = np.bincount(np.clip(counts, 0, k - 1), minlength=k).astype(float)
    p = probs.copy()
    p[-1] += max(0.0, 1.0 - p.sum())
    exp = p * counts.size
    exp, obs = _pool_tail(exp, obs, min_expected)
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = exp.size - 1
    if dof < 1:
        return stat, 0, 1.0
    return stat, dof, float(sps.chi2.sf(stat, dof))


def chi_square_two_sample(labels_a, labels_b, min_expected: float = 5.0):
    """Contingency chi-square for two samples of hashable categories.

    Categories whose pooled expected count is below ``min_expected`` in
    either row are merged into one overflow cell.
    """
    a = [tuple(np.atleast_1d(x).tolist()) for x in labels_a]
    b = [tuple(np.atleast_1d(x).tolist()) for x in labels_b]
    cats = sorted(set(a) | set(b))
    index = {c: i for i, c in enumerate(cats)}
    table = np.zeros((2, len(cats)))
    for c in a:
        table[0, index[c]] += 1
    for c in b:
        table[1, index[c]] += 1
    col = table.sum(axis=0)
    row = table.sum(axis=1)
    expected_min = np.outer(row, col).min(axis=0) / table.sum()
    big = expected_min >= min_expected
    merged = table[:, big]
    if (~big).any():
        merged = np.column_stack([merged, table[:, ~big].sum(axis=1)])
    merged = merged[:, merged.sum(axis=0) > 0]
    if merged.shape[1] < 2:
        return 0.0, 0, 1.0
    stat, p, dof, _ = sps.chi2_contingency(merged, correction=False)
    return float(stat), int(dof), float(p)


def mean_and_se(x):
    x = np.asarray(x)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def z_score(estimate: float, expected: float, se: float) -> float:
    if se <= 0:
        return 0.0 if estimate == expected else math.inf
    return (estimate - expected) / se


@dataclass(frozen=True)
class IntensityGrid:
    edges: np.ndarray
    density: np.ndarray
    se: np.ndarray
    ensemble: int


def annulus_mean_intensity(a: float, b: float, rho: float = 1.0) -> float:
    """Area average of rho / (pi (1 - r^2)^2) over the annulus a <= |z| <= b."""
    return rho * (1.0 / (1.0 - b * b) - 1.0 / (1.0 - a * a)) / (math.pi * (b * b - a * a))


def empirical_intensity(zero_sets, edges, reliable_radius: float | None = None) -> IntensityGrid:
    """Zeros per unit area in annular bins, with standard errors.

    ``zero_sets`` holds ZeroSets or point arrays.  Standard errors come from
    the spread of per-realization bin counts.
    """
    zero_sets = list(zero_sets)
    if not zero_sets:
        raise ValueError("empty ensemble")
    edges = np.asarray(edges, dtype=float)
    radii = [getattr(z, "reliable_radius", None) for z in zero_sets]
    known = [r for r in radii if r is not None]
    if reliable_radius is None and known:
        reliable_radius = min(known)
    if reliable_radius is not None and edges[-1] > reliable_radius + 1e-12:
        raise ValueError("grid exceeds the reliable radius")
    counts = np.empty((len(zero_sets), edges.size - 1))
    for i, z in enumerate(zero_sets):
        pts = np.asarray(getattr(z, "points", z))
        counts[i], _ = np.histogram(np.abs(pts), bins=edges)
    area = math.pi * np.diff(edges**2)
    m = counts.shape[0]
    density = counts.mean(axis=0) / area
    se = counts.std(axis=0, ddof=1) / math.sqrt(m) / area if m > 1 else np.full(area.size, np.inf)
    return IntensityGrid(edges, density, se, m)
