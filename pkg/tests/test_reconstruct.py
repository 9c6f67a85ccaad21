import math

import numpy as np
import pytest

from gafzeros.model import SeriesSpec, evaluate_batch, sample_coefficient_batch, sample_conditioned_batch
from gafzeros.reconstruct import (
    EULER_GAMMA,
    c_prime_rho,
    c_rho,
    jensen_estimate,
    reconstruct_abs_f0,
    reconstruct_abs_f_at,
    reconstruct_abs_fprime_at_zero,
)
from gafzeros.rng import RandomStream
from gafzeros.zeros import find_zeros_batch


def test_constants():
    assert EULER_GAMMA == pytest.approx(0.57721566490153286, abs=1e-15)
    assert c_rho(1) == pytest.approx(math.exp((1 - 2 * EULER_GAMMA) / 2), rel=1e-12)
    assert c_rho(1) == pytest.approx(0.925690, abs=1e-6)
    assert c_prime_rho(1) == pytest.approx(math.exp((1 - EULER_GAMMA) / 2), rel=1e-12)
    assert c_prime_rho(1) == pytest.approx(1.235397, abs=1e-6)
    assert c_rho(2) == pytest.approx(math.exp((2 - 3 * EULER_GAMMA) / 2) / 2, rel=1e-12)
    with pytest.raises(ValueError):
        c_rho(0)


def test_product_by_hand():
    z = np.array([0.5, -0.6j])
    res = reconstruct_abs_f0(z, 1.0)
    first = c_rho(1) * math.exp(0.5) * 0.5
    assert res.partial_products[0] == pytest.approx(first)
    assert res.estimate == pytest.approx(first * math.exp(0.25) * 0.6)
    assert res.terms_used == 2
    assert reconstruct_abs_f0(z, 1.0, K=0).estimate == c_rho(1)


def test_errors_and_degenerate_cases():
    with pytest.raises(ValueError, match="sorted"):
        reconstruct_abs_f0(np.array([0.5, 0.1]), 1.0)
    with pytest.raises(ValueError):
        reconstruct_abs_f0(np.array([0.1]), 1.0, K=3)
    assert reconstruct_abs_f0(np.array([0.0, 0.3]), 1.0).estimate == 0
    with pytest.raises(ValueError, match="origin zero"):
        reconstruct_abs_fprime_at_zero(np.array([0.0, 0.3]), 1.0)
    assert reconstruct_abs_fprime_at_zero(np.array([]), 2.0, K=0).estimate == c_rho(2)
    assert reconstruct_abs_f_at(0.2, np.array([0.2, 0.5]), 1.0).estimate == 0


def test_zeta_zero_reduces_to_origin():
    z = np.array([0.1 + 0.2j, -0.4, 0.5j, 0.7])
    a = reconstruct_abs_f0(z, 1.5)
    b = reconstruct_abs_f_at(0.0, z, 1.5)
    assert np.array_equal(a.partial_products, b.partial_products)


def test_jensen_empty():
    assert jensen_estimate(np.array([]), 1e-9, 1.0) == pytest.approx(c_prime_rho(1.0))
    with pytest.raises(ValueError):
        jensen_estimate(np.array([0.5]), 0.4, 1.0)


@pytest.fixture(scope="module")
def realizations():
    spec = SeriesSpec.for_radius(1.0, 0.95)
    c = sample_coefficient_batch(spec, RandomStream(77), 200)
    return c, find_zeros_batch(c, 0.95)


def test_f0_median_error(realizations):
    c, zs = realizations
    err = [abs(reconstruct_abs_f0(z, 1.0).estimate - abs(row[0])) / abs(row[0]) for row, z in zip(c, zs)]
    assert np.median(err) < 0.15


def test_f_at_zeta_median_error(realizations):
    c, zs = realizations
    zeta, R = 0.3, 0.95
    s = (R - zeta) / (1 - R * zeta)  # pseudo-hyperbolic disk around zeta inside |z| < R
    truth = np.abs(evaluate_batch(c, [zeta])[:, 0])
    err = []
    for t, z in zip(truth, zs):
        d = np.abs((z - zeta) / (1 - zeta * z))
        est = reconstruct_abs_f_at(zeta, z, 1.0, K=int(np.count_nonzero(d < s))).estimate
        err.append(abs(est - t) / t)
    assert np.median(err) < 0.20


def test_jensen_improves_with_radius(realizations):
    c, zs = realizations
    errs = []
    for r in (0.9, 0.95):
        e = [abs(math.log(jensen_estimate(z[np.abs(z) < r], r, 1.0) / abs(row[0]))) for row, z in zip(c, zs)]
        errs.append(np.mean(e))
    assert errs[1] < errs[0]


def test_fprime_conditioned():
    spec = SeriesSpec.for_radius(1.0, 0.95, conditioning="zero_at_origin")
    c = sample_conditioned_batch(spec, RandomStream(78), 200)
    zs = find_zeros_batch(c, 0.95)
    err = []
    for row, z in zip(c, zs):
        others = z[np.abs(z) > 1e-12]
        assert others.size == z.size - 1
        est = reconstruct_abs_fprime_at_zero(others, 1.0).estimate
        err.append(abs(est - abs(row[1])) / abs(row[1]))
    assert np.median(err) < 0.20
