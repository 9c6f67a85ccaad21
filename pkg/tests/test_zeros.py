import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gafzeros.model import CoefficientVector, SeriesSpec, sample_coefficient_batch, sample_coefficients
from gafzeros.rng import RandomStream
from gafzeros.zeros import (
    ZeroSet,
    count_zeros_argument_principle,
    find_zeros,
    find_zeros_batch,
    match_zero_trajectories,
    polynomial_roots,
)


def test_quadratic():
    zs = find_zeros(np.array([-0.25, 0, 1]), 0.9)
    # equal moduli: ordered by argument, 0 before pi
    assert np.allclose(zs.points, [0.5, -0.5], atol=1e-14)


def test_constant_has_no_zeros():
    assert find_zeros(np.array([1.0, 0, 0, 0]), 0.9).count == 0


def test_zero_polynomial_is_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        find_zeros(np.zeros(5), 0.5)


def test_radius_beyond_spec_rejected(stream):
    cv = sample_coefficients(SeriesSpec.for_radius(1.0, 0.5), stream)
    with pytest.raises(ValueError):
        find_zeros(cv, 0.8)


def test_zero_at_origin_found():
    zs = find_zeros(np.array([0, 0.5, 0, 1]), 0.6)  # others at +-0.707i
    assert zs.count == 1 and zs.points[0] == 0


def test_roots_match_numpy(stream):
    c = sample_coefficient_batch(SeriesSpec(truncation_degree=30), stream, 10)
    for row in c:
        ours = np.sort_complex(polynomial_roots(row))
        ref = np.sort_complex(np.roots(row[::-1]))
        assert np.allclose(ours, ref, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.05, 0.85), st.floats(-np.pi, np.pi)), min_size=1, max_size=8))
def test_recovers_planted_roots(polar):
    roots = np.array([r * np.exp(1j * t) for r, t in polar])
    d = np.abs(roots[:, None] - roots[None, :]) + np.eye(roots.size)
    if d.min() < 1e-3:
        return
    c = np.poly(roots)[::-1]
    zs = find_zeros(c, 0.9)
    assert zs.count == roots.size
    found = zs.points
    for z in roots:
        assert np.min(np.abs(found - z)) < 1e-8


@pytest.mark.parametrize("radius", [0.5, 0.8, 0.95])
def test_count_matches_argument_principle(radius):
    spec = SeriesSpec.for_radius(1.0, radius)
    s = RandomStream(31)
    for _ in range(5):
        cv = sample_coefficients(spec, s)
        zs = find_zeros(cv)
        assert zs.count == count_zeros_argument_principle(cv, radius)
        assert np.all(zs.residuals <= zs.polish_tolerance)
        assert np.all(np.abs(zs.points) <= radius)
        assert np.all(np.diff(np.abs(zs.points)) >= 0)


def test_argument_principle_examples():
    assert count_zeros_argument_principle(np.array([-0.25, 0, 1]), 0.9) == 2
    assert count_zeros_argument_principle(np.array([-0.25, 0, 1]), 0.4) == 0
    assert count_zeros_argument_principle(np.array([1.0]), 0.7) == 0


def test_argument_principle_zero_on_contour():
    with pytest.raises(RuntimeError, match="contour"):
        count_zeros_argument_principle(np.array([-0.25, 0, 1]), 0.5, max_points=1 << 12)


def test_mean_count_at_half():
    spec = SeriesSpec.for_radius(1.0, 0.5)
    c = sample_coefficient_batch(spec, RandomStream(12), 10_000)
    n = np.array([z.size for z in find_zeros_batch(c, 0.5)])
    assert abs(n.mean() - 1 / 3) < 4 * n.std() / np.sqrt(n.size)


def test_batch_agrees_with_single(stream):
    spec = SeriesSpec.for_radius(2.0, 0.8)
    c = sample_coefficient_batch(spec, stream, 20)
    batch = find_zeros_batch(c, 0.8)
    sets = find_zeros_batch(c, 0.8, spec, as_zerosets=True)
    for row, pts, zs in zip(c, batch, sets):
        assert np.allclose(pts, find_zeros(CoefficientVector(spec, row)).points, atol=1e-12)
        assert np.array_equal(pts, zs.points)


def test_zeroset_serialization(stream):
    cv = sample_coefficients(SeriesSpec.for_radius(1.0, 0.9), stream)
    zs = find_zeros(cv)
    back = ZeroSet.from_json(zs.to_json())
    assert back.points.tobytes() == zs.points.tobytes()
    assert back.source_spec == zs.source_spec
    lines = zs.to_csv().strip().splitlines()
    assert lines[0] == "re,im,modulus,residual"
    assert len(lines) == zs.count + 1


def test_near_boundary_flag():
    zs = find_zeros(np.array([-0.5, 1.0]), 0.5 + 1e-9)
    assert "near_boundary" in zs.flags


def test_match_identical_frames():
    f = np.array([0.1, 0.3j, -0.4])
    trajs = match_zero_trajectories([f, f, f], 0.05)
    assert len(trajs) == 3
    for t in trajs:
        assert len(t) == 3 and np.ptp(np.abs(np.diff(t.positions))) == 0
        assert not t.terminated


def test_match_recovers_planted_path():
    rng = np.random.default_rng(0)
    times = np.linspace(0, 1, 50)
    path = 0.3 * np.exp(2j * np.pi * times)
    others = np.array([-0.6, 0.6j])
    frames = [np.concatenate([[p + 1e-4 * rng.standard_normal()], others]) for p in path]
    trajs = match_zero_trajectories(frames, 0.05, times)
    moving = [t for t in trajs if abs(t.positions[0] - path[0]) < 1e-3]
    assert len(moving) == 1
    assert len(moving[0]) == 50
    assert np.allclose(moving[0].positions, path, atol=1e-3)


def test_match_breaks_on_large_jump():
    trajs = match_zero_trajectories([np.array([0.1]), np.array([0.5])], 0.1)
    assert len(trajs) == 2
    assert sum(t.terminated for t in trajs) == 1


def test_match_times_length_checked():
    with pytest.raises(ValueError):
        match_zero_trajectories([np.array([0.1])], 0.1, [0, 1])
