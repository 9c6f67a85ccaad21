"""Closed-form kernels and joint intensities of zeros on the unit disk.

For the disk family with parameter rho and points z_1..z_n the covariance
matrices are

    A_jk = E f(z_j) conj f(z_k)   = (1 - z_j conj z_k)^(-rho)
    B_jk = E f'(z_j) conj f(z_k)  = rho conj(z_k) (1 - z_j conj z_k)^(-rho-1)
    C_jk = E f'(z_j) conj f'(z_k) = rho (1 + rho z_j conj z_k) (1 - z_j conj z_k)^(-rho-2)

(B and C are the first derivatives of A in z and in conj(w)).  The joint
intensity of zeros is ``perm(C - B A^-1 B*) / det(pi A)``; for rho = 1 it
collapses to the Bergman determinant ``pi^-n det[(1 - z_j conj z_k)^-2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg

__all__ = [
    "KernelBundle",
    "szego_kernel",
    "bergman_kernel",
    "mobius",
    "mobius_inverse",
    "build_bundle",
    "determinant",
    "permanent",
    "PERMANENT_MAX_N",
    "cauchy_determinant",
    "joint_intensity_det",
    "joint_intensity_perm",
    "two_point_ratio",
    "two_point_ratio_general",
]

PERMANENT_MAX_N = 24
NEGATIVE_CLAMP = -1e-12
IMAG_RESIDUE_TOL = 1e-8


def _one_minus_zw(z, w):
    d = 1.0 - np.asarray(z, dtype=complex) * np.conj(np.asarray(w, dtype=complex))
    if np.any(d == 0):
        raise ValueError("kernel singularity")
    return d


def szego_kernel(z, w):
    """Szego kernel of the unit disk, ``(2 pi)^-1 (1 - z conj w)^-1``."""
    out = 1.0 / (2.0 * math.pi * _one_minus_zw(z, w))
    return out[()] if np.ndim(out) == 0 else out


def bergman_kernel(z, w):
    """Bergman kernel of the unit disk, ``pi^-1 (1 - z conj w)^-2``."""
    out = 1.0 / (math.pi * _one_minus_zw(z, w) ** 2)
    return out[()] if np.ndim(out) == 0 else out


def mobius(beta, z):
    """Disk automorphism ``T(z) = (z - beta)/(1 - conj(beta) z)`` and ``T'(z)``."""
    beta = complex(beta)
    if abs(beta) >= 1:
        raise ValueError("mobius parameter must satisfy |beta| < 1")
    z = np.asarray(z, dtype=complex)
    den = 1.0 - beta.conjugate() * z
    if np.any(den == 0):
        raise ValueError("pole of Mobius map")
    val = (z - beta) / den
    der = (1.0 - abs(beta) ** 2) / den**2
    if z.ndim == 0:
        return complex(val), complex(der)
    return val, der


def mobius_inverse(beta, w):
    """Inverse of ``T_beta``, which is ``T_{-beta}``."""
    return mobius(-complex(beta), w)


@dataclass(frozen=True)
class KernelBundle:
    points: np.ndarray
    rho: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    M: np.ndarray

    @property
    def n(self) -> int:
        return self.points.size


def _check_points(points) -> np.ndarray:
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    if z.ndim != 1:
        raise ValueError("points must be a 1-d sequence")
    if np.any(np.abs(z) >= 1):
        raise ValueError("points must lie inside the unit disk")
    if z.size != np.unique(z).size:
        raise ValueError("coincident points")
    return z


def build_bundle(points, rho: float = 1.0) -> KernelBundle:
    if not rho > 0:
        raise ValueError("rho must be positive")
    z = _check_points(points)
    zw = z[:, None] * np.conj(z)[None, :]
    d = 1.0 - zw
    A = d ** (-rho)
    B = rho * np.conj(z)[None, :] * d ** (-rho - 1.0)
    C = rho * (1.0 + rho * zw) * d ** (-rho - 2.0)
    M = d**-2.0
    for m in (A, B, C, M):
        m.setflags(write=False)
    return KernelBundle(z, float(rho), A, B, C, M)


def determinant(matrix) -> complex:
    """Determinant by partial-pivoting LU."""
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    if a.shape[0] == 0:
        return 1.0 + 0j
    lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    swaps = np.count_nonzero(piv != np.arange(a.shape[0]))
    d = np.prod(np.diag(lu))
    return complex(-d if swaps % 2 else d)


@numba.njit(cache=True)
def _ryser_gray(a):
    n = a.shape[0]
    rowsum = np.zeros(n, dtype=np.complex128)
    total = 0j
    in_set = np.zeros(n, dtype=np.bool_)
    size = 0
    for k in range(1, 1 << n):
        # column whose membership flips between consecutive Gray codes
        j = 0
        while not (k >> j) & 1:
            j += 1
        if in_set[j]:
            in_set[j] = False
            size -= 1
            for i in range(n):
                rowsum[i] -= a[i, j]
        else:
            in_set[j] = True
            size += 1
            for i in range(n):
                rowsum[i] += a[i, j]
        prod = 1.0 + 0j
        for i in range(n):
            prod *= rowsum[i]
        if size & 1:
            total -= prod
        else:
            total += prod
    return total if n % 2 == 0 else -total


def permanent(matrix) -> complex:
    """Permanent by Ryser's inclusion-exclusion over Gray-code ordered subsets.

    Cost is ``2^n n``; sizes above 24 are refused.
    """
    a = np.ascontiguousarray(np.asarray(matrix, dtype=np.complex128))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    n = a.shape[0]
    if n > PERMANENT_MAX_N:
        raise ValueError("permanent size cap")
    if n == 0:
        return 1.0 + 0j
    return complex(_ryser_gray(a))


def cauchy_determinant(points) -> float:
    """det(A) at rho = 1 from the Cauchy product formula.

    ``prod_{j,k} (1 - z_j conj z_k)^-1 * prod_{k<j} |z_j - z_k|^2``.
    """
    z = _check_points(points)
    d = 1.0 - z[:, None] * np.conj(z)[None, :]
    # the double product is real: (j,k) and (k,j) factors are conjugate
    log_val = -np.sum(np.log(np.abs(d)))
    iu = np.triu_indices(z.size, 1)
    diffs = np.abs(z[iu[0]] - z[iu[1]])
    log_val += 2.0 * np.sum(np.log(diffs))
    return float(np.exp(log_val))


def _clamp(value: float) -> float:
    if value < 0:
        if value < NEGATIVE_CLAMP:
            raise ArithmeticError(f"negative intensity {value!r}")
        return 0.0
    return value


def joint_intensity_det(points) -> float:
    """Joint intensity of zeros of the i.i.d. series: ``pi^-n det M``."""
    z = _check_points(points)
    M = (1.0 - z[:, None] * np.conj(z)[None, :]) ** -2.0
    d = determinant(M)
    return _clamp(d.real / math.pi**z.size)


def joint_intensity_perm(bundle: KernelBundle) -> float:
    """``perm(C - B A^-1 B*) / det(pi A)`` for any rho.

    The Schur-type complement is formed by a Cholesky solve against A; no
    explicit inverse is built.
    """
    n = bundle.n
    if n > PERMANENT_MAX_N:
        raise ValueError("permanent size cap")
    try:
        chol = scipy.linalg.cho_factor(bundle.A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("degenerate configuration") from exc
    diag = np.real(np.diag(chol[0]))
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise ValueError("degenerate configuration")
    X = scipy.linalg.cho_solve(chol, bundle.B.conj().T)
    S = bundle.C - bundle.B @ X
    p = permanent(S)
    log_det_pi_a = n * math.log(math.pi) + 2.0 * np.sum(np.log(diag))
    value = p / math.exp(log_det_pi_a)
    if abs(value.imag) > IMAG_RESIDUE_TOL * max(abs(value.real), 1e-300):
        raise ArithmeticError(f"intensity has non-negligible imaginary part {value!r}")
    return _clamp(value.real)


def two_point_ratio(r: float, rho: float) -> float:
    """``p(0, r) / (p(0) p(r))`` for the disk family, with ``s = 1 - r^2``.

    At rho = 1 the closed form reduces to ``r^2 (2 - r^2)``, which is used
    directly.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    if rho == 1:
        return r * r * (2.0 - r * r)
    return two_point_ratio_general(r, rho)


def _exp_remainder4(x: np.ndarray) -> np.ndarray:
    """exp(x) - (1 + x + x^2/2 + x^3/6), accurate for small |x|."""
    out = np.empty_like(x)
    small = np.abs(x) < 1.0
    xs = x[small]
    term = xs**4 / 24.0
    acc = term.copy()
    for m in range(5, 30):
        term = term * xs / m
        acc += term
    out[small] = acc
    xl = x[~small]
    out[~small] = np.exp(xl) - (1.0 + xl + xl * xl / 2.0 + xl**3 / 6.0)
    return out


def _two_point_terms(rho: float):
    # numerator = sum_i c_i s^(a_i)
    c = np.array([
        1.0,
        rho**2 - 2.0 * rho - 2.0, rho**2 - 2.0 * rho - 2.0,
        (rho + 1.0) ** 2, (rho + 1.0) ** 2,
        -2.0 * rho**2, -2.0 * rho**2,
        1.0,
    ])
    a = np.array([0.0, rho, 2.0 + 2.0 * rho, 2.0 * rho, 2.0 + rho, 1.0 + rho, 1.0 + 2.0 * rho, 2.0 + 3.0 * rho])
    return c, a


def two_point_ratio_general(r: float, rho: float) -> float:
    """General-rho closed form, evaluated without the rho = 1 shortcut.

    With s = 1 - r^2 the numerator is a sum c_i s^(a_i) whose exponent
    moments sum c_i a_i^m vanish for m <= 3, so it equals
    sum c_i R(a_i log s) with R the remainder of exp after its cubic Taylor
    polynomial.  This removes the cancellation at small r.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    L = math.log1p(-r * r)
    c, a = _two_point_terms(rho)
    num = float(np.sum(c * _exp_remainder4(a * L)))
    return num / (-math.expm1(rho * L)) ** 3
