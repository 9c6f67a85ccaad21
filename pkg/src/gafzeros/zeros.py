"""Zero sets of truncated realizations.

Roots are found by Aberth-Ehrlich simultaneous iteration on the truncated
polynomial, started on concentric circles read off the Newton polygon of the
coefficient moduli, and then Newton-polished.  The argument principle gives
an independent count used as an oracle.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .model import SCHEMA_VERSION, CoefficientVector, SeriesSpec, evaluate_with_derivative

__all__ = [
    "ZeroSet",
    "Trajectory",
    "RootFindingError",
    "find_zeros",
    "find_zeros_batch",
    "polynomial_roots",
    "count_zeros_argument_principle",
    "match_zero_trajectories",
    "POLISH_REL_TOL",
]

POLISH_REL_TOL = 1e-10
BOUNDARY_FLAG_DIST = 1e-6
MAX_ITER = 500

_EPS = np.finfo(float).eps


class RootFindingError(RuntimeError):
    """Raised when simultaneous iteration fails; ``partial`` holds the iterates."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


# --------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _initial_guesses(c, offset):
    d = c.size - 1
    ks = np.empty(d + 1, dtype=np.int64)
    la = np.empty(d + 1)
    m = 0
    for k in range(d + 1):
        a = abs(c[k])
        if a > 0:
            ks[m] = k
            la[m] = math.log(a)
            m += 1
    # upper convex hull of (k, log|c_k|)
    hull = np.empty(m, dtype=np.int64)
    h = 0
    for i in range(m):
        while h >= 2:
            i1 = hull[h - 2]
            i2 = hull[h - 1]
            if (la[i2] - la[i1]) * (ks[i] - ks[i1]) <= (la[i] - la[i1]) * (ks[i2] - ks[i1]):
                h -= 1
            else:
                break
        hull[h] = i
        h += 1
    z = np.empty(d, dtype=np.complex128)
    pos = 0
    for s in range(h - 1):
        k0 = ks[hull[s]]
        k1 = ks[hull[s + 1]]
        n = k1 - k0
        u = math.exp((la[hull[s]] - la[hull[s + 1]]) / n)
        for j in range(n):
            ang = 2.0 * math.pi * j / n + 2.0 * math.pi * s / d + offset
            z[pos] = u * complex(math.cos(ang), math.sin(ang))
            pos += 1
    return z


@numba.njit(cache=True)
def _newton_ratio(c, ac, z):
    """Return (p/p', backward-error ratio |p| / sum |c_k||z|^k); ``ac = |c|``."""
    d = c.size - 1
    if abs(z) <= 1.0:
        p = c[d]
        dp = 0j
        ap = ac[d]
        az = abs(z)
        for k in range(d - 1, -1, -1):
            dp = dp * z + p
            p = p * z + c[k]
            ap = ap * az + ac[k]
        if dp == 0:
            return complex(np.inf, 0.0), abs(p) / ap
        return p / dp, abs(p) / ap
    w = 1.0 / z
    aw = abs(w)
    q = c[0]
    dq = 0j
    aq = ac[0]
    for k in range(1, d + 1):
        dq = dq * w + q
        q = q * w + c[k]
        aq = aq * aw + ac[k]
    den = w * (d - w * dq / q) if q != 0 else 0j
    if q == 0:
        return 0j, 0.0
    if den == 0:
        return complex(np.inf, 0.0), abs(q) / aq
    return 1.0 / den, abs(q) / aq


@numba.njit(cache=True)
def _aberth(c, offset, max_iter, eps):
    d = c.size - 1
    z = _initial_guesses(c, offset)
    ac = np.abs(c)
    done = np.zeros(d, dtype=np.bool_)
    n_done = 0
    it = 0
    while it < max_iter and n_done < d:
        it += 1
        for i in range(d):
            if done[i]:
                continue
            zi = z[i]
            ratio, berr = _newton_ratio(c, ac, zi)
            if berr <= eps:
                done[i] = True
                n_done += 1
                continue
            # sum_j 1/(zi - zj) in real arithmetic (avoids complex division)
            sr = 0.0
            si = 0.0
            xr = zi.real
            xi = zi.imag
            for j in range(d):
                if j != i:
                    dx = xr - z[j].real
                    dy = xi - z[j].imag
                    inv = 1.0 / (dx * dx + dy * dy)
                    sr += dx * inv
                    si -= dy * inv
            s = complex(sr, si)
            if np.isinf(ratio.real):
                corr = 1.0 / s
            else:
                corr = ratio / (1.0 - ratio * s)
            z[i] = zi - corr
            if abs(corr) <= 4.0 * 2.220446049250313e-16 * abs(z[i]):
                done[i] = True
                n_done += 1
    return z, n_done == d, it


@numba.njit(cache=True)
def _polish(c, z, radius_hint):
    """Newton iterations on the full truncated series; returns (z, |f(z)|)."""
    d = c.size - 1
    best = z
    best_res = np.inf
    for _ in range(30):
        p = c[d]
        dp = 0j
        for k in range(d - 1, -1, -1):
            dp = dp * z + p
            p = p * z + c[k]
        res = abs(p)
        if res < best_res:
            best_res = res
            best = z
        if dp == 0 or res == 0:
            break
        step = p / dp
        z = z - step
        if abs(step) <= 2.220446049250313e-16 * max(abs(z), 1e-300):
            # evaluate once more at the final iterate
            p = c[d]
            for k in range(d - 1, -1, -1):
                p = p * z + c[k]
            if abs(p) < best_res:
                best_res = abs(p)
                best = z
            break
    return best, best_res


@numba.njit(cache=True)
def _roots_in_disk(c_full, radius, max_iter):
    """All zeros of the polynomial with |z| <= radius, polished.

    Returns (roots, residuals, status); status 0 ok, 1 degenerate, 2 no convergence.
    """
    n = c_full.size
    top = n - 1
    while top >= 0 and c_full[top] == 0:
        top -= 1
    if top < 0:
        return np.empty(0, np.complex128), np.empty(0), 1
    low = 0
    while c_full[low] == 0:
        low += 1
    c = c_full[low : top + 1].copy()
    d = c.size - 1
    out = np.empty(low + d, dtype=np.complex128)
    res = np.empty(low + d)
    m = 0
    for _ in range(low):
        out[m] = 0j
        res[m] = 0.0
        m += 1
    if d == 0:
        return out[:m], res[:m], 0
    ok = False
    z = np.empty(0, np.complex128)
    for attempt in range(3):
        z, ok, _ = _aberth(c, 0.4 + 1.1 * attempt, max_iter, 8.0 * 2.220446049250313e-16)
        if ok:
            break
    if not ok:
        for i in range(d):
            out[m] = z[i]
            res[m] = np.nan
            m += 1
        return out[:m], res[:m], 2
    for i in range(d):
        zi = z[i]
        if abs(zi) <= radius * (1.0 + 1e-6):
            # polish on the undeflated series
            zp, r = _polish(c_full, zi, radius)
            if abs(zp) <= radius:
                out[m] = zp
                res[m] = r
                m += 1
    return out[:m], res[:m], 0


@numba.njit(cache=True)
def _batch_roots(coeffs, radius, max_iter):
    rows = coeffs.shape[0]
    n = coeffs.shape[1]
    cap = rows * 8 + 16
    flat = np.empty(cap, dtype=np.complex128)
    flat_res = np.empty(cap)
    offsets = np.zeros(rows + 1, dtype=np.int64)
    status = np.zeros(rows, dtype=np.int64)
    pos = 0
    for r in range(rows):
        z, res, st = _roots_in_disk(coeffs[r], radius, max_iter)
        status[r] = st
        if st == 0:
            k = z.size
            if pos + k > flat.size:
                new_cap = max(2 * flat.size, pos + k)
                tmp = np.empty(new_cap, dtype=np.complex128)
                tmp[:pos] = flat[:pos]
                flat = tmp
                tmp2 = np.empty(new_cap)
                tmp2[:pos] = flat_res[:pos]
                flat_res = tmp2
            flat[pos : pos + k] = z
            flat_res[pos : pos + k] = res
            pos += k
        offsets[r + 1] = pos
    return flat[:pos], flat_res[:pos], offsets, status


# --------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class ZeroSet:
    points: np.ndarray
    reliable_radius: float
    source_spec: Optional[SeriesSpec]
    residuals: np.ndarray
    polish_tolerance: float
    flags: tuple = ()

    def __len__(self) -> int:
        return self.points.size

    @property
    def count(self) -> int:
        return self.points.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["re", "im", "modulus", "residual"])
        for z, r in zip(self.points, self.residuals):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(abs(z))), repr(float(r))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "ZeroSet",
                "reliable_radius": self.reliable_radius,
                "polish_tolerance": self.polish_tolerance,
                "spec": None if self.source_spec is None else self.source_spec.to_dict(),
                "points": [[float(z.real), float(z.imag)] for z in self.points],
                "residuals": [float(r) for r in self.residuals],
                "flags": list(self.flags),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ZeroSet":
        d = json.loads(text)
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
        spec = None if d["spec"] is None else SeriesSpec.from_dict(d["spec"])
        pts = np.array([complex(a, b) for a, b in d["points"]], dtype=complex)
        return cls(pts, d["reliable_radius"], spec, np.array(d["residuals"], dtype=float),
                   d["polish_tolerance"], tuple(d["flags"]))


def sort_zeros(z: np.ndarray) -> np.ndarray:
    """Sort by modulus, ties broken by argument."""
    z = np.asarray(z, dtype=complex)
    return z[np.lexsort((np.angle(z), np.abs(z)))]


def _scale_on_circle(c: np.ndarray, radius: float) -> float:
    k = np.arange(c.size)
    with np.errstate(under="ignore"):
        return float(np.sqrt(np.sum(np.abs(c) ** 2 * radius ** (2.0 * k))))


def polynomial_roots(coeffs, max_iter: int = MAX_ITER) -> np.ndarray:
    """All roots of ``sum coeffs[k] z^k`` by Aberth-Ehrlich iteration (unpolished)."""
    c = np.asarray(coeffs, dtype=np.complex128)
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        raise ValueError("degenerate polynomial")
    low, top = nz[0], nz[-1]
    inner = np.ascontiguousarray(c[low : top + 1])
    if inner.size == 1:
        return np.zeros(low, dtype=complex)
    z, ok, _ = _aberth(inner, 0.4, max_iter, 8 * _EPS)
    if not ok:
        raise RootFindingError("Aberth iteration did not converge", partial=z)
    return np.concatenate([np.zeros(low, dtype=complex), z])


def _make_zeroset(c, pts, res, radius, spec):
    tol = POLISH_REL_TOL * max(_scale_on_circle(c, radius), 1e-300)
    order = np.lexsort((np.angle(pts), np.abs(pts)))
    pts = pts[order]
    res = res[order]
    flags = []
    if np.any(res > tol):
        raise RootFindingError(
            f"polished residual {res.max():.3e} exceeds tolerance {tol:.3e}", partial=pts
        )
    if pts.size > 1:
        diff = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(diff, np.inf)
        if diff.min() < 10 * tol:
            flags.append("near_coincident")
    if np.any(radius - np.abs(pts) < BOUNDARY_FLAG_DIST):
        flags.append("near_boundary")
    return ZeroSet(pts, float(radius), spec, res, tol, tuple(flags))


def find_zeros(cv, reliable_radius: Optional[float] = None) -> ZeroSet:
    """Zeros of a truncated realization inside ``|z| <= reliable_radius``.

    ``cv`` is a CoefficientVector (or raw coefficient array).  The radius
    defaults to the SeriesSpec ``r_max``.
    """
    spec = cv.spec if isinstance(cv, CoefficientVector) else None
    c = np.ascontiguousarray(cv.coeffs if spec is not None else np.asarray(cv), dtype=np.complex128)
    if reliable_radius is None:
        if spec is None or spec.r_max is None:
            raise ValueError("reliable_radius required when the SeriesSpec has no r_max")
        reliable_radius = spec.r_max
    if spec is not None and spec.r_max is not None and reliable_radius > spec.r_max * (1 + 1e-12):
        raise ValueError("reliable_radius exceeds the SeriesSpec r_max")
    pts, res, status = _roots_in_disk(c, float(reliable_radius), MAX_ITER)
    if status == 1:
        raise ValueError("degenerate polynomial")
    if status == 2:
        raise RootFindingError("Aberth iteration did not converge", partial=pts)
    return _make_zeroset(c, pts, res, reliable_radius, spec)


def find_zeros_batch(coeffs: np.ndarray, reliable_radius: float, spec: Optional[SeriesSpec] = None,
                     as_zerosets: bool = False):
    """Zeros of many realizations (rows of ``coeffs``).

    Returns a list of sorted point arrays, or of ZeroSets when
    ``as_zerosets`` is set.
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    flat, res, offsets, status = _batch_roots(coeffs, float(reliable_radius), MAX_ITER)
    bad = np.nonzero(status)[0]
    if bad.size:
        i = int(bad[0])
        if status[i] == 1:
            raise ValueError(f"degenerate polynomial in row {i}")
        raise RootFindingError(f"Aberth iteration did not converge in row {i}")
    out = []
    for i in range(coeffs.shape[0]):
        pts = flat[offsets[i] : offsets[i + 1]]
        r = res[offsets[i] : offsets[i + 1]]
        if as_zerosets:
            out.append(_make_zeroset(coeffs[i], pts, r, reliable_radius, spec))
        else:
            out.append(sort_zeros(pts))
    return out


def count_zeros_argument_principle(cv, radius: float, max_points: int = 1 << 22) -> int:
    """Winding number of f around ``|z| = radius`` by trapezoidal quadrature of f'/f.

    Values of f and z f' on the equispaced nodes are FFTs of the scaled
    coefficients.  The node count doubles until the value is within 1e-3 of
    an integer and agrees with the previous refinement.
    """
    c = cv.coeffs if isinstance(cv, CoefficientVector) else np.asarray(cv, dtype=complex)
    k = np.arange(c.size)
    with np.errstate(under="ignore"):
        scaled = c * radius ** k.astype(float)
    m = 64
    while m < 2 * c.size:
        m *= 2
    prev = None
    while m <= max_points:
        # f(r e^{i t_j}) = sum_k c_k r^k e^{i k t_j}: an inverse DFT times m
        f = np.fft.ifft(scaled, n=m) * m
        zdf = np.fft.ifft(scaled * k, n=m) * m
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.mean(zdf / f)
        if np.isfinite(val):
            n = int(round(val.real))
            if abs(val.real - n) < 1e-3 and abs(val.imag) < 1e-3 and prev == n:
                return n
            prev = n
        m *= 2
    raise RuntimeError("zero near contour")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    terminated: bool = False

    def __len__(self):
        return len(self.times)

    def as_arrays(self):
        return np.asarray(self.times, dtype=float), np.asarray(self.positions, dtype=complex)


def match_zero_trajectories(frames: Sequence, match_radius: float, times: Optional[Sequence] = None):
    """Link zeros of consecutive frames into trajectories.

    A zero continues only when it and its successor are mutual nearest
    neighbours within ``match_radius``.  Anything else ends the trajectory
    (``terminated``) and any unmatched successor starts a new one.
    """
    pts_frames = [np.asarray(f.points if isinstance(f, ZeroSet) else f, dtype=complex) for f in frames]
    if times is None:
        times = list(range(len(pts_frames)))
    if len(times) != len(pts_frames):
        raise ValueError("times and frames differ in length")
    finished = []
    if not pts_frames:
        return finished
    active = [Trajectory([times[0]], [z]) for z in pts_frames[0]]
    for t in range(1, len(pts_frames)):
        prev = pts_frames[t - 1]
        cur = pts_frames[t]
        next_active = [None] * cur.size
        if prev.size and cur.size:
            dist = np.abs(prev[:, None] - cur[None, :])
            fwd = np.argmin(dist, axis=1)
            back = np.argmin(dist, axis=0)
            for i in range(prev.size):
                j = fwd[i]
                if back[j] == i and dist[i, j] <= match_radius:
                    tr = active[i]
                    tr.times.append(times[t])
                    tr.positions.append(cur[j])
                    next_active[j] = tr
                    active[i] = None
        for tr in active:
            if tr is not None:
                tr.terminated = True
                finished.append(tr)
        for j in range(cur.size):
            if next_active[j] is None:
                next_active[j] = Trajectory([times[t]], [cur[j]])
        active = next_active
    finished.extend(active)
    return finished
