import math

import numpy as np
import pytest
from scipy import optimize

from gafzeros import stats
from gafzeros.model import SeriesSpec, sample_coefficient_batch
from gafzeros.rng import RandomStream
from gafzeros.zeros import find_zeros_batch


def test_ks_single_point_at_median():
    assert stats.ks_statistic([0.5], lambda x: x) == 0.5


def test_ks_from_own_distribution():
    x = RandomStream(1).generator.random(10_000)
    assert stats.ks_statistic(x, lambda t: t) < 1.63 / math.sqrt(x.size)


def test_ks_wrong_distribution():
    x = RandomStream(2).generator.random(10_000)
    d = stats.ks_statistic(x, lambda t: t**6)
    # sup |x - x^6| at x = 6^(-1/5)
    res = optimize.minimize_scalar(lambda t: -(t - t**6), bounds=(0, 1), method="bounded")
    gap = -res.fun
    assert d == pytest.approx(gap, abs=4 / math.sqrt(x.size))
    assert stats.ks_pvalue(d, x.size) < 1e-10


def test_ks_empty():
    with pytest.raises(ValueError):
        stats.ks_statistic([], lambda x: x)


def test_lattice_normal_continuity_correction():
    x = RandomStream(3).generator.poisson(400, 100_000)
    assert stats.ks_lattice_normal(x) < 0.01
    # a shifted normal is far
    assert stats.ks_lattice_normal(x, mu=410, sigma=20) > 0.15


def test_chi_square_gof():
    g = RandomStream(4).generator
    probs = np.array([0.5, 0.3, 0.15, 0.05])
    good = g.choice(4, size=20_000, p=probs)
    assert stats.chi_square_gof(good, probs)[2] > 1e-3
    bad = g.choice(4, size=20_000, p=[0.4, 0.4, 0.15, 0.05])
    assert stats.chi_square_gof(bad, probs)[2] < 1e-10


def test_chi_square_pools_sparse_cells():
    probs = np.array([0.9, 0.09, 0.009, 0.0009, 0.0001])
    counts = RandomStream(5).generator.choice(5, size=1000, p=probs)
    stat, dof, p = stats.chi_square_gof(counts, probs)
    assert dof == 2


def test_chi_square_two_sample():
    g = RandomStream(6).generator
    a = g.integers(0, 3, size=(5000, 2))
    b = g.integers(0, 3, size=(5000, 2))
    assert stats.chi_square_two_sample(a, b)[2] > 1e-3
    c = np.column_stack([g.integers(0, 2, 5000), g.integers(0, 3, 5000)])
    assert stats.chi_square_two_sample(a, c)[2] < 1e-10


def test_z_score():
    assert stats.z_score(1.2, 1.0, 0.1) == pytest.approx(2.0)
    assert stats.z_score(1.0, 1.0, 0.0) == 0.0
    assert stats.z_score(1.1, 1.0, 0.0) == math.inf


def test_annulus_average():
    # numeric average of 1/(pi (1-r^2)^2) over 0.4 <= |z| <= 0.5
    r = np.linspace(0.4, 0.5, 200_001)
    f = 2 * r / (1 - r * r) ** 2
    integral = np.sum((f[1:] + f[:-1]) / 2 * np.diff(r))
    assert stats.annulus_mean_intensity(0.4, 0.5) == pytest.approx(integral / (math.pi * 0.09), rel=1e-9)


@pytest.fixture(scope="module")
def intensity_sets():
    out = {}
    for rho in (1.0, 2.0):
        spec = SeriesSpec.for_radius(rho, 0.6)
        c = sample_coefficient_batch(spec, RandomStream(int(rho * 10)), 20_000)
        out[rho] = find_zeros_batch(c, 0.6, spec, as_zerosets=True)
    return out


def test_empirical_intensity_bin(intensity_sets):
    grid = stats.empirical_intensity(intensity_sets[1.0], [0.4, 0.5])
    assert abs(grid.density[0] - stats.annulus_mean_intensity(0.4, 0.5)) < 4 * grid.se[0]


def test_intensity_linear_in_rho(intensity_sets):
    edges = [0.0, 0.2, 0.4, 0.6]
    one = stats.empirical_intensity(intensity_sets[1.0], edges)
    two = stats.empirical_intensity(intensity_sets[2.0], edges)
    joint = np.sqrt(two.se**2 + (2 * one.se) ** 2)
    assert np.all(np.abs(two.density - 2 * one.density) < 4 * joint)


def test_empirical_intensity_errors(intensity_sets):
    with pytest.raises(ValueError, match="empty"):
        stats.empirical_intensity([], [0, 0.5])
    with pytest.raises(ValueError, match="reliable radius"):
        stats.empirical_intensity(intensity_sets[1.0], [0.5, 0.7])
