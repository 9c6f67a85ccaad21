"""Zero dynamics under Ornstein-Uhlenbeck coefficient motion.

Each Gaussian factor a_k(t) of the series runs an independent stationary
complex OU process; the weights stay fixed.  The coefficient motion is
simulated exactly (see :func:`gafzeros.rng.ou_step`) and zero motion is read
off the evolving zero sets.

Near a zero sitting at the origin, f = a0 + sqrt(rho) a1 z + ..., and the
zero moves as dz = -da0 / (sqrt(rho) a1): no drift, and squared diffusion
coefficient 1 / (rho |a1|^2).

The conditioned ensemble below is the law of the coefficients given that the
zero set has a point at 0.  It differs from the law of f given f(0) = 0: the
modulus of a1 is size-biased (density 2 r^3 exp(-r^2)) rather than Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .kernels import mobius
from .model import (
    CoefficientVector,
    Conditioning,
    SeriesSpec,
    coefficient_std_devs,
    conformal_pushforward,
    mobius_map,
    sample_coefficient_batch,
    sample_conditioned_batch,
)
from .rng import RandomStream, ou_step
from .zeros import Trajectory, find_zeros_batch, match_zero_trajectories

__all__ = [
    "DynamicsState",
    "Trajectory",
    "SDEEstimate",
    "evolve",
    "evolve_batch",
    "simulate_zero_trajectories",
    "simulate_zero_frames",
    "estimate_drift_diffusion_at_conditioned_zero",
    "calibrated_dt",
    "pseudo_hyperbolic_steps",
    "pushforward_zero_frames",
]


@dataclass(frozen=True)
class DynamicsState:
    coeffs: CoefficientVector
    time: float = 0.0


def _unconditioned(spec: SeriesSpec) -> SeriesSpec:
    # after any positive time the origin constraint is gone
    if spec.conditioning is Conditioning.NONE:
        return spec
    return replace(spec, conditioning=Conditioning.NONE)


def evolve_batch(coeffs: np.ndarray, spec: SeriesSpec, dt: float, stream: RandomStream, noise: bool = True) -> np.ndarray:
    """Advance rows of full coefficients by one exact OU step of length dt."""
    w = coefficient_std_devs(spec)
    g = np.asarray(coeffs, dtype=complex) / w
    return ou_step(g, dt, stream, noise=noise) * w


def evolve(state: DynamicsState, dt: float, stream: RandomStream, noise: bool = True) -> DynamicsState:
    spec = state.coeffs.spec
    new = evolve_batch(state.coeffs.coeffs[None, :], spec, dt, stream, noise)[0]
    return DynamicsState(CoefficientVector(_unconditioned(spec), new), state.time + dt)


def _frame_zeros(coeffs_row, region_radius):
    return find_zeros_batch(coeffs_row[None, :], region_radius)[0]


def simulate_zero_frames(
    spec: SeriesSpec,
    horizon: float,
    dt: float,
    region_radius: float,
    stream: RandomStream,
    noise: bool = True,
    initial: Optional[np.ndarray] = None,
):
    """Zero sets at times 0, dt, 2dt, ... up to ``horizon``; returns (times, frames)."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if spec.r_max is not None and region_radius > spec.r_max:
        raise ValueError("region_radius exceeds the SeriesSpec r_max")
    n_steps = int(math.floor(horizon / dt + 1e-9)) if horizon > 0 else 0
    if initial is None:
        if spec.conditioning is Conditioning.ZERO_AT_ORIGIN:
            c = sample_conditioned_batch(spec, stream, 1)[0]
        else:
            c = sample_coefficient_batch(spec, stream, 1)[0]
    else:
        c = np.asarray(initial, dtype=complex)
    base = _unconditioned(spec)
    times = [0.0]
    frames = [_frame_zeros(c, region_radius)]
    for i in range(1, n_steps + 1):
        c = evolve_batch(c[None, :], base, dt, stream, noise)[0]
        times.append(i * dt)
        frames.append(_frame_zeros(c, region_radius))
    return times, frames


def simulate_zero_trajectories(
    spec: SeriesSpec,
    horizon: float,
    dt: float,
    region_radius: float,
    stream: RandomStream,
    match_radius: Optional[float] = None,
    noise: bool = True,
    initial: Optional[np.ndarray] = None,
):
    """Evolve a realization, extract zeros per frame and link them.

    ``match_radius`` defaults to a quarter of the typical Euclidean spacing of
    zeros at the region edge.  The first ten frames are checked: if more than
    a tenth of the zeros fail to match, the step is too coarse.
    """
    if match_radius is None:
        r = region_radius
        match_radius = 0.25 * math.sqrt(math.pi) * (1 - r * r) / math.sqrt(spec.rho)
    times, frames = simulate_zero_frames(spec, horizon, dt, region_radius, stream, noise, initial)
    check = min(len(frames), 11)
    if check >= 2:
        head = match_zero_trajectories(frames[:check], match_radius, times[:check])
        steps = sum(len(t) - 1 for t in head)
        possible = sum(min(frames[i].size, frames[i + 1].size) for i in range(check - 1))
        if possible and steps < 0.9 * possible:
            raise ValueError("dt too coarse for matching")
    return match_zero_trajectories(frames, match_radius, times)


def calibrated_dt(rho: float, target_step: float = 1e-2) -> float:
    """Step dt giving mean zero displacement ``target_step`` at a conditioned zero.

    E|dz| = sqrt(dt) E|xi| E[1/|a1|] / sqrt(rho) with E|xi| = sqrt(pi)/2 and,
    for the size-biased |a1|, E[1/|a1|] = Gamma(3/2)/Gamma(2) = sqrt(pi)/2.
    """
    return (target_step * 4.0 * math.sqrt(rho) / math.pi) ** 2


@dataclass
class SDEEstimate:
    rho: float
    dt: float
    n: int
    lost: int
    drift: complex
    drift_se: tuple
    sigma2: float
    sigma2_se: float
    predicted_sigma2: float
    slope: float
    slope_se: float
    bucket_edges: np.ndarray = field(repr=False)
    bucket_ratio: np.ndarray = field(repr=False)
    displacement: np.ndarray = field(repr=False)
    predicted: np.ndarray = field(repr=False)
    a1: np.ndarray = field(repr=False)

    def drift_z_scores(self) -> tuple:
        return (self.drift.real / self.drift_se[0], self.drift.imag / self.drift_se[1])


def estimate_drift_diffusion_at_conditioned_zero(
    rho: float,
    dt: Optional[float] = None,
    ensemble: int = 10_000,
    stream: Optional[RandomStream] = None,
    region_radius: float = 0.5,
    buckets: int = 5,
    max_lost_fraction: float = 0.01,
) -> SDEEstimate:
    """Estimate drift and diffusion of the zero started at the origin.

    Each member starts from the conditioned law, takes one exact OU step,
    and the zero nearest the origin gives the increment dz.  The slope of
    |dz|^2/dt against 1/(rho |a1|^2) is fitted by weighted least squares with
    weights x^-2, i.e. mean(y/x), the efficient fit when the conditional
    spread of y grows like x.
    """
    if ensemble < 2:
        raise ValueError("ensemble too small")
    stream = stream or RandomStream(0)
    dt = calibrated_dt(rho) if dt is None else dt
    spec = SeriesSpec.for_radius(rho, region_radius, conditioning=Conditioning.ZERO_AT_ORIGIN)
    c0 = sample_conditioned_batch(spec, stream, ensemble)
    c1 = evolve_batch(c0, _unconditioned(spec), dt, stream)
    zs = find_zeros_batch(c1, region_radius)
    dz = np.full(ensemble, np.nan, dtype=complex)
    for i, z in enumerate(zs):
        if z.size:
            dz[i] = z[0]  # sorted by modulus: nearest to the origin
    ok = ~np.isnan(dz.real)
    lost = int(ensemble - ok.sum())
    if lost > max_lost_fraction * ensemble:
        raise ValueError("dt too large")
    dz = dz[ok]
    a1 = c0[ok, 1]
    x = 1.0 / np.abs(a1) ** 2  # coeffs[1] = sqrt(rho) * a1
    y = np.abs(dz) ** 2 / dt
    n = dz.size
    drift = complex(dz.mean() / dt)
    drift_se = (float(dz.real.std(ddof=1) / math.sqrt(n) / dt), float(dz.imag.std(ddof=1) / math.sqrt(n) / dt))
    ratio = y / x
    slope = float(ratio.mean())
    slope_se = float(ratio.std(ddof=1) / math.sqrt(n))
    edges = np.quantile(np.abs(a1), np.linspace(0, 1, buckets + 1))
    idx = np.clip(np.searchsorted(edges, np.abs(a1), side="right") - 1, 0, buckets - 1)
    bucket_ratio = np.array([y[idx == b].mean() / x[idx == b].mean() for b in range(buckets)])
    return SDEEstimate(
        rho=rho,
        dt=dt,
        n=n,
        lost=lost,
        drift=drift,
        drift_se=drift_se,
        sigma2=float(y.mean()),
        sigma2_se=float(y.std(ddof=1) / math.sqrt(n)),
        predicted_sigma2=float(x.mean()),
        slope=slope,
        slope_se=slope_se,
        bucket_edges=edges,
        bucket_ratio=bucket_ratio,
        displacement=dz,
        predicted=x,
        a1=a1,
    )


def pseudo_hyperbolic_steps(trajectories) -> np.ndarray:
    """|T_{z_t}(z_{t+1})| for every consecutive pair along every trajectory."""
    out = []
    for tr in trajectories:
        p = np.asarray(tr.positions, dtype=complex)
        if p.size >= 2:
            a, b = p[:-1], p[1:]
            out.append(np.abs((b - a) / (1.0 - np.conj(a) * b)))
    return np.concatenate(out) if out else np.empty(0)


def pushforward_zero_frames(
    coeff_frames,
    spec: SeriesSpec,
    beta: complex,
    region_radius: float,
):
    """Zeros in ``|z| <= region_radius`` of the pushforward ``T'^(rho/2) f(T)``.

    Zeros of f are located in the image ``T(B)`` of the region (a disk
    contained in the reliable radius), mapped back by ``T^{-1}``, and polished
    by Newton steps on the pushforward itself.
    """
    beta = complex(beta)
    outer = (region_radius + abs(beta)) / (1.0 + abs(beta) * region_radius)
    if spec.r_max is not None and outer > spec.r_max:
        raise ValueError("image of the region leaves the reliable radius")
    handle = mobius_map(beta)
    frames = []
    for c in coeff_frames:
        zf = find_zeros_batch(np.asarray(c)[None, :], outer)[0]
        pre, _ = mobius(-beta, zf) if zf.size else (np.empty(0, complex), None)
        pre = np.atleast_1d(pre)
        g = conformal_pushforward(CoefficientVector(_unconditioned(spec), c), handle)
        for _ in range(3):
            if pre.size == 0:
                break
            val, der = g(pre)
            pre = pre - val / der
        keep = np.abs(pre) <= region_radius
        frames.append(np.sort_complex(pre[keep]))
    return frames
