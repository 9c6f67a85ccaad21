import itertools
import math

import numpy as np
import pytest

from gafzeros import kernels
from gafzeros.kernels import (
    bergman_kernel,
    build_bundle,
    cauchy_determinant,
    determinant,
    joint_intensity_det,
    joint_intensity_perm,
    mobius,
    mobius_inverse,
    permanent,
    szego_kernel,
    two_point_ratio,
    two_point_ratio_general,
)
from gafzeros.model import SeriesSpec, evaluate_batch, sample_coefficient_batch
from gafzeros.rng import RandomStream


def brute_permanent(a):
    n = a.shape[0]
    return sum(np.prod([a[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def disk_points(rng, n, radius=0.9):
    return radius * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


def test_szego_values():
    assert szego_kernel(0, 0) == pytest.approx(1 / (2 * math.pi))
    assert szego_kernel(0.5, 0.5) == pytest.approx(0.2122065907891938, rel=1e-12)
    rng = np.random.default_rng(1)
    z, w = disk_points(rng, 5), disk_points(rng, 5)
    assert np.allclose(szego_kernel(z, w), np.conj(szego_kernel(w, z)))


def test_bergman_values():
    assert bergman_kernel(0, 0) == pytest.approx(1 / math.pi)
    assert bergman_kernel(0.5, 0.5) == pytest.approx(1 / (math.pi * 0.5625), rel=1e-12)
    rng = np.random.default_rng(2)
    z, w = disk_points(rng, 10), disk_points(rng, 10)
    assert np.allclose(bergman_kernel(z, w), 4 * math.pi * szego_kernel(z, w) ** 2, rtol=1e-12, atol=0)


def test_kernel_singularity():
    with pytest.raises(ValueError, match="singularity"):
        szego_kernel(1.0, 1.0)


def test_mobius_examples():
    beta = 0.3 + 0.4j
    assert mobius(beta, beta) == (0, pytest.approx(1 / (1 - abs(beta) ** 2)))
    assert mobius(0, 0.2 + 0.1j) == (0.2 + 0.1j, 1)
    rng = np.random.default_rng(3)
    z = disk_points(rng, 20)
    w, _ = mobius(beta, z)
    back, _ = mobius_inverse(beta, w)
    assert np.max(np.abs(back - z)) < 1e-14
    with pytest.raises(ValueError):
        mobius(1.0, 0.1)


def test_bundle_at_origin():
    b = build_bundle([0.0], 1.0)
    assert (b.A, b.B, b.C, b.M) == ([[1]], [[0]], [[1]], [[1]])


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.5])
def test_bundle_single_real_point(rho):
    assert build_bundle([0.6], rho).A[0, 0] == pytest.approx(0.64**-rho)


@pytest.mark.parametrize("rho", [0.7, 1.0, 2.0])
def test_bundle_derivatives_by_finite_difference(rho):
    # B = d/dz K(z, w), C = d/dz d/dconj(w) K(z, w), K = (1 - z conj w)^-rho
    z = np.array([0.3 + 0.1j, -0.2 + 0.4j])
    b = build_bundle(z, rho)
    h = 1e-5

    def K(x, y):
        return (1 - x * np.conj(y)) ** -rho

    for i in range(2):
        for j in range(2):
            dB = (K(z[i] + h, z[j]) - K(z[i] - h, z[j])) / (2 * h)
            assert abs(b.B[i, j] - dB) < 1e-6 * abs(b.B[i, j]) + 1e-12

            g = 1e-4  # nested differences: larger step balances roundoff

            def dz_K(y):
                return (K(z[i] + g, y) - K(z[i] - g, y)) / (2 * g)

            # K is antiholomorphic in w, so a real shift of w differentiates in conj(w)
            dC = (dz_K(z[j] + g) - dz_K(z[j] - g)) / (2 * g)
            assert abs(b.C[i, j] - dC) < 1e-6 * abs(b.C[i, j])


def test_bundle_errors():
    with pytest.raises(ValueError, match="coincident"):
        build_bundle([0.1, 0.1])
    with pytest.raises(ValueError):
        build_bundle([1.2])
    with pytest.raises(ValueError):
        build_bundle([0.1], rho=0)


def test_permanent_examples():
    m = np.array([[1, 2], [3, 4]], dtype=complex)
    assert permanent(m) == pytest.approx(10)
    assert determinant(m) == pytest.approx(-2)
    assert brute_permanent(m) == 10
    for n in (1, 4, 9):
        assert permanent(np.eye(n)) == pytest.approx(1)
        assert determinant(np.eye(n)) == pytest.approx(1)
    assert permanent(np.zeros((0, 0))) == 1


@pytest.mark.parametrize("n", [3, 5, 7])
def test_ryser_matches_brute_force(n):
    rng = np.random.default_rng(n)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    ref = brute_permanent(a)
    assert abs(permanent(a) - ref) < 1e-10 * abs(ref)


def test_determinant_matches_numpy():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    assert determinant(a) == pytest.approx(np.linalg.det(a), rel=1e-12)


def test_permanent_size_cap():
    with pytest.raises(ValueError, match="size cap"):
        permanent(np.ones((25, 25)))


def test_borchardt_identity():
    rng = np.random.default_rng(5)
    for n in range(1, 9):
        b = build_bundle(disk_points(rng, n), 1.0)
        lhs = permanent(b.A) * determinant(b.A)
        rhs = determinant(b.M)
        assert abs(lhs - rhs) < 1e-9 * abs(rhs)


def test_cauchy_determinant():
    assert cauchy_determinant([0.4]) == pytest.approx(1 / 0.84)
    rng = np.random.default_rng(6)
    for _ in range(5):
        z = disk_points(rng, 3)
        d = cauchy_determinant(z)
        lu = determinant(build_bundle(z).A)
        assert d > 0
        assert abs(d - lu) < 1e-10 * d


def test_one_point_intensity():
    assert joint_intensity_det([0.0]) == pytest.approx(1 / math.pi)
    for rho in (0.5, 2.0, 3.0):
        assert joint_intensity_perm(build_bundle([0.0], rho)) == pytest.approx(rho / math.pi)
        assert joint_intensity_perm(build_bundle([0.5j], rho)) == pytest.approx(rho / (math.pi * 0.75**2))


def test_det_and_perm_routes_agree():
    rng = np.random.default_rng(7)
    for n in range(1, 7):
        for _ in range(5):
            z = disk_points(rng, n)
            d = joint_intensity_det(z)
            p = joint_intensity_perm(build_bundle(z, 1.0))
            assert d > 0
            assert abs(d - p) < 1e-8 * d


def _ratio_by_routes(r, rho):
    p2 = joint_intensity_perm(build_bundle([0.0, r], rho))
    p0 = joint_intensity_perm(build_bundle([0.0], rho))
    pr = joint_intensity_perm(build_bundle([r], rho))
    return p2 / (p0 * pr)


def test_two_point_ratio_rho1():
    assert two_point_ratio(0.5, 1.0) == 0.4375
    assert _ratio_by_routes(0.5, 1.0) == pytest.approx(0.4375, rel=1e-10)
    p2 = joint_intensity_det([0.0, 0.5])
    assert p2 / (joint_intensity_det([0.0]) * joint_intensity_det([0.5])) == pytest.approx(0.4375, rel=1e-12)


@pytest.mark.parametrize("rho", [0.5, 2.0, 3.0])
@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_two_point_ratio_general_rho(rho, r):
    assert two_point_ratio(r, rho) == pytest.approx(_ratio_by_routes(r, rho), rel=1e-9)


def test_general_formula_at_rho1():
    for r in np.arange(1, 10) / 10:
        assert two_point_ratio_general(r, 1.0) == pytest.approx(r * r * (2 - r * r), rel=1e-10)


@pytest.mark.parametrize("rho", [1.0, 2.0, 3.0])
def test_two_point_ratio_decorrelates(rho):
    assert abs(two_point_ratio(0.999, rho) - 1) < 1e-2


def test_two_point_ratio_slow_decorrelation_small_rho():
    # the excess decays like s^rho: still 1.1e-2 at rho = 1/2, r = 0.999
    gaps = [two_point_ratio(r, 0.5) - 1 for r in (0.99, 0.999, 0.99999)]
    assert gaps[0] > gaps[1] > gaps[2] > 0
    assert gaps[2] < 1e-2


@pytest.mark.parametrize("rho", [0.3, 1.0, 2.0, 4.5])
def test_two_point_numerator_moments_vanish(rho):
    c, a = kernels._two_point_terms(rho)
    for m in range(4):
        assert abs(np.sum(c * a**m)) < 1e-12 * np.sum(np.abs(c * a**m))


def test_two_point_general_small_r_against_series():
    # at rho = 1 the ratio is r^2 (2 - r^2) exactly
    for r in (1e-4, 1e-2, 0.05):
        assert two_point_ratio_general(r, 1.0) == pytest.approx(r * r * (2 - r * r), rel=1e-10)


def test_intensity_vanishes_quadratically_at_coincidence():
    z = 0.3 + 0.2j
    p = [joint_intensity_det([z, z + d]) for d in (1e-2, 1e-3)]
    assert p[1] / p[0] == pytest.approx(1e-2, rel=3e-2)


def test_mobius_invariance_of_intensity():
    rng = np.random.default_rng(8)
    for rho in (0.5, 1.0, 2.0):
        for n in (1, 2, 3):
            z = disk_points(rng, n, 0.8)
            beta = complex(disk_points(rng, 1, 0.7)[0])
            w, dw = mobius(beta, z)
            lhs = joint_intensity_perm(build_bundle(w, rho)) * np.prod(np.abs(dw) ** 2)
            rhs = joint_intensity_perm(build_bundle(z, rho))
            assert abs(lhs - rhs) < 1e-9 * rhs


def test_degenerate_configuration():
    with pytest.raises(ValueError, match="degenerate"):
        joint_intensity_perm(build_bundle([0.5, 0.5 + 1e-15], 1.0))


@pytest.mark.parametrize("points", [[0.3], [0.2, -0.4j], [0.1, 0.5j, -0.3 + 0.2j], [0.2, -0.2, 0.3j, -0.1j]])
def test_gaussian_moment_is_permanent(points):
    # E |f(z_1) ... f(z_n)|^2 = perm(A)
    pts = np.array(points, dtype=complex)
    spec = SeriesSpec.for_radius(1.0, float(np.max(np.abs(pts))), epsilon=1e-10)
    v = evaluate_batch(sample_coefficient_batch(spec, RandomStream(len(points)), 200_000), pts)
    x = np.abs(np.prod(v, axis=1)) ** 2
    target = permanent(build_bundle(pts).A).real
    assert abs(x.mean() - target) < 4 * x.std() / math.sqrt(x.size)


def test_negative_intensity_guard():
    assert kernels._clamp(-1e-13) == 0.0
    with pytest.raises(ArithmeticError):
        kernels._clamp(-1e-6)
