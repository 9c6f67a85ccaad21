"""Gaussian analytic function families and their coefficient samplers.

Two families are supported:

* the hyperbolic family on the unit disk, ``f(z) = sum w_k a_k z^k`` with
  ``w_k^2 = |binom(-rho, k)|`` and covariance ``(1 - z conj(w))^(-rho)``;
* the planar family, ``w_k^2 = rho^k / k!`` and covariance ``exp(rho z conj(w))``.

A disk function can be pushed forward to another simply connected domain
through a conformal map ``psi`` onto the disk: ``psi'(z)^(rho/2) f(psi(z))``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .rng import RandomStream, sample_standard_complex_gaussian

__all__ = [
    "DomainKind",
    "Conditioning",
    "MapHandle",
    "SeriesSpec",
    "CoefficientVector",
    "SCHEMA_VERSION",
    "coefficient_std_devs",
    "sample_coefficients",
    "sample_coefficient_batch",
    "sample_conditioned_at_zero",
    "sample_conditioned_batch",
    "evaluate_with_derivative",
    "evaluate_batch",
    "truncation_degree_for",
    "conformal_pushforward",
    "mobius_map",
    "covariance",
]

SCHEMA_VERSION = 1


class DomainKind(str, enum.Enum):
    UNIT_DISK = "unit_disk"
    PLANE = "plane"
    CONFORMAL_IMAGE = "conformal_image"


class Conditioning(str, enum.Enum):
    NONE = "none"
    ZERO_AT_ORIGIN = "zero_at_origin"


@dataclass(frozen=True)
class MapHandle:
    """An injective analytic map from some domain onto the unit disk.

    ``forward(z)`` returns ``(psi(z), psi'(z))``.  Injectivity is the caller's
    responsibility.  ``second`` optionally gives ``psi''``; without it the
    pushforward derivative differentiates ``psi'`` numerically.
    """

    forward: Callable[[complex], tuple]
    label: str = "map"
    second: Optional[Callable] = None

    def __call__(self, z):
        return self.forward(z)


def mobius_map(beta: complex) -> MapHandle:
    """MapHandle for the disk automorphism ``(z - beta) / (1 - conj(beta) z)``."""
    from .kernels import mobius

    beta = complex(beta)
    bc = beta.conjugate()

    def second(z):
        return 2.0 * bc * (1.0 - abs(beta) ** 2) / (1.0 - bc * np.asarray(z, dtype=complex)) ** 3

    return MapHandle(
        lambda z: mobius(beta, z),
        label=f"mobius({beta.real:+.6g}{beta.imag:+.6g}j)",
        second=second,
    )


def _identity(z):
    z = np.asarray(z, dtype=complex)
    return z[()], np.ones_like(z)[()]


IDENTITY_MAP = MapHandle(_identity, label="identity", second=lambda z: np.zeros_like(np.asarray(z, dtype=complex)))


@dataclass(frozen=True)
class SeriesSpec:
    domain_kind: DomainKind = DomainKind.UNIT_DISK
    rho: float = 1.0
    truncation_degree: int = 64
    conditioning: Conditioning = Conditioning.NONE
    conformal_map: Optional[MapHandle] = field(default=None, compare=False)
    r_max: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "domain_kind", DomainKind(self.domain_kind))
        object.__setattr__(self, "conditioning", Conditioning(self.conditioning))
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.truncation_degree < 0:
            raise ValueError("truncation_degree must be nonnegative")
        if self.conditioning is Conditioning.ZERO_AT_ORIGIN and self.truncation_degree < 2:
            raise ValueError("conditioning at the origin needs truncation_degree >= 2")
        has_map = self.conformal_map is not None
        if has_map != (self.domain_kind is DomainKind.CONFORMAL_IMAGE):
            raise ValueError("conformal_map must be given iff domain_kind is conformal_image")

    @classmethod
    def for_radius(cls, rho: float, r_max: float, epsilon: float = 1e-8, **kwargs) -> "SeriesSpec":
        """Disk spec truncated so that evaluation is trusted up to ``r_max``."""
        n = truncation_degree_for(rho, r_max, epsilon)
        if kwargs.get("conditioning") in (Conditioning.ZERO_AT_ORIGIN, "zero_at_origin"):
            n = max(n, 2)
        return cls(rho=rho, truncation_degree=n, r_max=r_max, **kwargs)

    @property
    def is_disk_like(self) -> bool:
        return self.domain_kind is not DomainKind.PLANE

    def to_dict(self) -> dict:
        d = {
            "domain_kind": self.domain_kind.value,
            "rho": self.rho,
            "truncation_degree": self.truncation_degree,
            "conditioning": self.conditioning.value,
            "r_max": self.r_max,
        }
        if self.conformal_map is not None:
            d["conformal_map"] = self.conformal_map.label
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SeriesSpec":
        kind = DomainKind(d.get("domain_kind", "unit_disk"))
        if kind is DomainKind.CONFORMAL_IMAGE:
            raise ValueError("conformal_image specs carry a callable map and cannot be deserialized")
        return cls(
            domain_kind=kind,
            rho=float(d["rho"]),
            truncation_degree=int(d["truncation_degree"]),
            conditioning=Conditioning(d.get("conditioning", "none")),
            r_max=d.get("r_max"),
        )


@dataclass(frozen=True)
class CoefficientVector:
    """One realization: ``coeffs[k]`` is the full coefficient of ``z^k``."""

    spec: SeriesSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if c.shape != (self.spec.truncation_degree + 1,):
            raise ValueError(
                f"expected {self.spec.truncation_degree + 1} coefficients, got {c.shape}"
            )
        if self.spec.conditioning is Conditioning.ZERO_AT_ORIGIN and c[0] != 0:
            raise ValueError("conditioned realization must have coeffs[0] == 0")

    def __call__(self, z):
        return evaluate_with_derivative(self, z)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "CoefficientVector",
                "spec": self.spec.to_dict(),
                "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CoefficientVector":
        d = json.loads(text)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
        spec = SeriesSpec.from_dict(d["spec"])
        coeffs = np.array([complex(re, im) for re, im in d["coeffs"]])
        return cls(spec, coeffs)


def coefficient_std_devs(spec: SeriesSpec) -> np.ndarray:
    """Per-degree standard deviations of the coefficients.

    Uses multiplicative recurrences so large degrees neither overflow nor
    lose precision to Gamma-function cancellation.
    """
    n = spec.truncation_degree
    k = np.arange(1, n + 1, dtype=float)
    if spec.domain_kind is DomainKind.PLANE:
        ratios = spec.rho / k
    else:
        ratios = (k - 1.0 + spec.rho) / k
    w = np.empty(n + 1)
    w[0] = 1.0
    # cumulative product of sqrt ratios, in log space to stay finite
    w[1:] = np.exp(0.5 * np.cumsum(np.log(ratios)))
    return w


def sample_coefficients(spec: SeriesSpec, stream: RandomStream) -> CoefficientVector:
    if spec.conditioning is not Conditioning.NONE:
        raise ValueError("use sample_conditioned_at_zero")
    return CoefficientVector(spec, sample_coefficient_batch(spec, stream, 1)[0])


def sample_coefficient_batch(spec: SeriesSpec, stream: RandomStream, size: int) -> np.ndarray:
    """``size`` independent realizations as a ``(size, N+1)`` coefficient array."""
    if spec.conditioning is not Conditioning.NONE:
        raise ValueError("use sample_conditioned_at_zero")
    w = coefficient_std_devs(spec)
    return sample_standard_complex_gaussian(stream, (size, w.size)) * w


def _conditioned_a1(stream: RandomStream, size: int) -> np.ndarray:
    # |a1|^2 ~ Gamma(2, 1) as a sum of two unit exponentials; uniform phase.
    u = stream.generator.random((size, 3))
    t = -np.log1p(-u[:, 0]) - np.log1p(-u[:, 1])
    return np.sqrt(t) * np.exp(2j * np.pi * u[:, 2])


def sample_conditioned_batch(spec: SeriesSpec, stream: RandomStream, size: int) -> np.ndarray:
    """Realizations conditioned to have a zero at the origin.

    This is the limit law of the coefficients given a zero in a shrinking
    disk about 0: ``a0 = 0``, the Gaussian factor of ``a1`` is rotationally
    symmetric with modulus density ``2 r^3 exp(-r^2)``, and the remaining
    factors are untouched standard Gaussians.  It is not the law of ``f``
    given ``f(0) = 0``.
    """
    if spec.conditioning is not Conditioning.ZERO_AT_ORIGIN:
        raise ValueError("spec must have conditioning='zero_at_origin'")
    w = coefficient_std_devs(spec)
    g = sample_standard_complex_gaussian(stream, (size, w.size))
    g[:, 0] = 0.0
    g[:, 1] = _conditioned_a1(stream, size)
    return g * w


def sample_conditioned_at_zero(spec: SeriesSpec, stream: RandomStream) -> CoefficientVector:
    return CoefficientVector(spec, sample_conditioned_batch(spec, stream, 1)[0])


def evaluate_with_derivative(cv, z):
    """Horner evaluation of the truncated series and its derivative.

    ``cv`` is a CoefficientVector or a raw coefficient array; ``z`` may be an
    array, in which case both outputs have its shape.
    """
    c = cv.coeffs if isinstance(cv, CoefficientVector) else np.asarray(cv, dtype=complex)
    z = np.asarray(z, dtype=complex)
    val = np.zeros_like(z)
    der = np.zeros_like(z)
    for a in c[::-1]:
        der = der * z + val
        val = val * z + a
    if z.ndim == 0:
        return complex(val), complex(der)
    return val, der


def evaluate_batch(coeffs: np.ndarray, z) -> np.ndarray:
    """Values of many realizations (rows of ``coeffs``) at points ``z``.

    Returns an array of shape ``(rows, len(z))``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    powers = z[None, :] ** np.arange(coeffs.shape[1])[:, None]
    return coeffs @ powers


def truncation_degree_for(
    rho: float, r_max: float, epsilon: float, domain_kind: DomainKind = DomainKind.UNIT_DISK
) -> int:
    """Smallest N whose relative tail variance at radius ``r_max`` is below ``epsilon^2``.

    The total variance at radius r is ``(1 - r^2)^(-rho)`` on the disk and
    ``exp(rho r^2)`` on the plane.  Terms of the variance series are generated
    by the weight recurrence and the tails are formed as suffix sums, so no
    subtraction from the total is involved.
    """
    domain_kind = DomainKind(domain_kind)
    if not r_max > 0:
        raise ValueError("r_max must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = r_max * r_max
    if domain_kind is DomainKind.PLANE:
        log_total = rho * x
    else:
        if r_max >= 1:
            raise ValueError("truncation impossible at the boundary")
        log_total = -rho * math.log1p(-x)
    log_target = 2.0 * math.log(epsilon) + log_total

    # log of the variance terms, generated until they are far below target
    logs = [0.0]
    k = 0
    while True:
        k += 1
        if domain_kind is DomainKind.PLANE:
            step = math.log(rho * x / k)
        else:
            step = math.log((k - 1.0 + rho) / k) + math.log(x)
        logs.append(logs[-1] + step)
        if step < 0 and logs[-1] < log_target - 46.0:  # e^-46 ~ 1e-20 relative
            break
        if k > 50_000_000:
            raise RuntimeError("truncation degree search did not terminate")
    terms = np.exp(np.array(logs) - log_target)
    # suffix[j] = sum_{i >= j} terms[i]; tail after degree N is suffix[N+1]
    suffix = np.cumsum(terms[::-1])[::-1]
    ok = np.nonzero(suffix[1:] < 1.0)[0]
    return max(int(ok[0]), 1)


def covariance(spec: SeriesSpec, z, w) -> np.ndarray:
    """Closed-form ``E f(z) conj(f(w))`` of the untruncated family."""
    zw = np.asarray(z, dtype=complex) * np.conj(np.asarray(w, dtype=complex))
    if spec.domain_kind is DomainKind.PLANE:
        return np.exp(spec.rho * zw)
    return (1.0 - zw) ** (-spec.rho)


def conformal_pushforward(cv: CoefficientVector, map_handle: MapHandle):
    """Return ``g(z) = psi'(z)^(rho/2) f(psi(z))`` together with ``g'``.

    The principal branch of the power is used; the zero set of ``g`` equals
    ``psi^{-1}`` of the zero set of ``f`` regardless of the branch.
    """
    if cv.spec.domain_kind is DomainKind.PLANE:
        raise ValueError("pushforward requires a unit-disk realization")
    half = 0.5 * cv.spec.rho

    def g(z):
        z_arr = np.asarray(z, dtype=complex)
        psi, dpsi = map_handle.forward(z_arr)
        psi = np.asarray(psi, dtype=complex)
        dpsi = np.asarray(dpsi, dtype=complex)
        if np.any(dpsi == 0):
            raise ValueError("critical point of conformal map")
        ddpsi = _second_derivative(map_handle, z_arr, dpsi)
        f, df = evaluate_with_derivative(cv.coeffs, psi)
        pw = dpsi**half
        val = pw * f
        der = half * dpsi ** (half - 1.0) * ddpsi * f + pw * df * dpsi
        if z_arr.ndim == 0:
            return complex(val), complex(der)
        return val, der

    return g


def _second_derivative(map_handle, z, dpsi):
    if map_handle.second is not None:
        return np.asarray(map_handle.second(z), dtype=complex)
    h = 1e-6
    _, d_plus = map_handle.forward(z + h)
    _, d_minus = map_handle.forward(z - h)
    return (np.asarray(d_plus) - np.asarray(d_minus)) / (2 * h)


def with_degree(spec: SeriesSpec, n: int) -> SeriesSpec:
    return replace(spec, truncation_degree=n)
