"""Reproducible random streams, complex Gaussians and the exact OU transition.

Streams are built on numpy's counter-based Philox generator.  A stream is
identified by ``(seed, stream_id)``; the stream id enters the seed sequence as
a spawn key, so distinct ids give independent substreams without any
coordination between workers.

The complex Ornstein-Uhlenbeck process used throughout is

    a(t) = exp(-t/2) W(exp(t)),   W complex Brownian motion, E|W(1)|^2 = 1.

For s < t, Cov(a(s), a(t)) = exp(-(s+t)/2) * exp(s) = exp(-(t-s)/2), so the
exact transition over a step dt is

    a(t+dt) = exp(-dt/2) a(t) + sqrt(1 - exp(-dt)) xi,

with xi a fresh standard complex Gaussian.  The innovation variance follows
from stationarity: 1 = exp(-dt) + Var(innovation).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "RandomStream",
    "sample_standard_complex_gaussian",
    "ou_step",
    "ou_autocovariance",
]


class RandomStream:
    """A reproducible substream keyed by ``(seed, stream_id)``.

    Not safe to share between concurrent workers; give each worker its own
    stream via :meth:`substream`.
    """

    def __init__(self, seed: int, stream_id: int = 0, path: tuple = ()):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be nonnegative 64-bit integers")
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.stream_id = int(stream_id) & 0xFFFF_FFFF_FFFF_FFFF
        self.path = tuple(int(i) for i in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))
        self._bitgen = np.random.Philox(ss)
        self.generator = np.random.Generator(self._bitgen)

    @property
    def counter(self) -> int:
        """Current Philox counter (first word); exposes the stream position."""
        return int(self._bitgen.state["state"]["counter"][0])

    def substream(self, index: int) -> "RandomStream":
        """Independent child stream, deterministic in ``(seed, stream_id, path, index)``."""
        if index < 0:
            raise ValueError("substream index must be nonnegative")
        # a longer spawn key never collides with a sibling or ancestor key
        return RandomStream(self.seed, self.stream_id, self.path + (index,))

    def layout(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id, "path": list(self.path), "generator": "Philox"}

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


def sample_standard_complex_gaussian(stream: RandomStream, count) -> np.ndarray:
    """Draw i.i.d. standard complex Gaussians (density exp(-|z|^2)/pi).

    ``count`` may be an int or a shape tuple.  Real and imaginary parts are
    independent N(0, 1/2), so E|a|^2 = 1.
    """
    shape = (count,) if np.isscalar(count) else tuple(count)
    if any(s < 0 for s in shape):
        raise ValueError("count must be nonnegative")
    xy = stream.generator.standard_normal(shape + (2,))
    out = np.empty(shape, dtype=np.complex128)
    out.real = xy[..., 0]
    out.imag = xy[..., 1]
    out *= math.sqrt(0.5)
    return out


def ou_step(state, dt: float, stream: RandomStream, noise: bool = True):
    """Exact stationary complex OU transition over a time step ``dt``.

    ``state`` may be a scalar or an array; every entry gets independent
    innovation.  ``noise=False`` applies only the deterministic contraction
    (used to build frozen test fixtures).
    """
    if not dt > 0:
        raise ValueError("nonpositive time step")
    state = np.asarray(state, dtype=np.complex128)
    decay = math.exp(-0.5 * dt)
    out = decay * state
    if noise:
        # -expm1(-dt) is 1 - exp(-dt) without cancellation for tiny dt.
        scale = math.sqrt(-math.expm1(-dt))
        out = out + scale * sample_standard_complex_gaussian(stream, state.shape)
    return out[()] if out.ndim == 0 else out


def ou_autocovariance(lag: float) -> float:
    """Cov(a(t), a(t+lag)) = exp(-lag/2) for the stationary process."""
    return math.exp(-0.5 * abs(lag))
