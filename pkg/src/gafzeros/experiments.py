"""Named verification experiments, their configs and run reports.

Each experiment declares its parameters, default ensemble size, tolerance
keys and the tests it emits.  :func:`run_experiment` validates a config,
runs the experiment on a deterministic random stream and writes CSV/JSON
artifacts plus a report.  Artifacts are held in memory until the run
finishes, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from . import kernels, laws, stats
from .dynamics import (
    _unconditioned,
    estimate_drift_diffusion_at_conditioned_zero,
    evolve_batch,
    pseudo_hyperbolic_steps,
    pushforward_zero_frames,
)
from .model import SeriesSpec, evaluate_batch, sample_coefficient_batch
from .reconstruct import reconstruct_abs_f0
from .rng import RandomStream
from .zeros import find_zeros_batch, match_zero_trajectories

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_TOLERANCES",
    "ConfigError",
    "ExperimentConfig",
    "TestRecord",
    "RunReport",
    "EXPERIMENTS",
    "known_experiments",
    "default_config",
    "run_experiment",
]

SCHEMA_VERSION = 1

# global thresholds shared by every statistical test
DEFAULT_TOLERANCES = {"z_sigma": 4.0, "p_min": 1e-3}


class ConfigError(ValueError):
    """Invalid experiment config; ``problems`` lists every issue found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


@dataclass
class ExperimentConfig:
    experiment_id: str
    seed: int = 0
    ensemble_size: Optional[int] = None
    spec: Optional[SeriesSpec] = None
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment_id": self.experiment_id,
            "seed": self.seed,
            "ensemble_size": self.ensemble_size,
            "spec": None if self.spec is None else self.spec.to_dict(),
            "params": self.params,
            "tolerances": self.tolerances,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError(["config must be a JSON object"])
        problems = []
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            problems.append(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
        allowed = {"schema_version", "experiment_id", "seed", "ensemble_size", "spec", "params", "tolerances"}
        extra = sorted(set(d) - allowed)
        if extra:
            problems.append(f"unknown fields {extra}")
        if not isinstance(d.get("experiment_id"), str):
            problems.append("experiment_id must be a string")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            problems.append("seed must be an unsigned 64-bit integer")
        spec = None
        if d.get("spec") is not None:
            try:
                spec = SeriesSpec.from_dict(d["spec"])
            except (KeyError, TypeError, ValueError) as exc:
                problems.append(f"spec: {exc}")
        for key in ("params", "tolerances"):
            if not isinstance(d.get(key, {}), dict):
                problems.append(f"{key} must be an object")
        if problems:
            raise ConfigError(problems)
        return cls(
            experiment_id=d["experiment_id"],
            seed=seed,
            ensemble_size=d.get("ensemble_size"),
            spec=spec,
            params=dict(d.get("params", {})),
            tolerances=dict(d.get("tolerances", {})),
            schema_version=version,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"]) from exc
        return cls.from_dict(d)

    def resolved(self) -> "ExperimentConfig":
        """Validated copy with experiment defaults filled in."""
        exp = EXPERIMENTS.get(self.experiment_id)
        if exp is None:
            raise ConfigError([f"unknown experiment_id {self.experiment_id!r}; known ids: {', '.join(known_experiments())}"])
        problems = []
        unknown = sorted(set(self.params) - set(exp.params))
        if unknown:
            problems.append(f"unknown params {unknown}")
        tol = {**DEFAULT_TOLERANCES, **exp.tolerances}
        unknown = sorted(set(self.tolerances) - set(tol))
        if unknown:
            problems.append(f"unknown tolerances {unknown}")
        tol.update(self.tolerances)
        for k, v in tol.items():
            if not _is_tolerance(v):
                problems.append(f"tolerance {k} must be a positive number or [lo, hi] pair")
        ens = exp.ensemble if self.ensemble_size is None else self.ensemble_size
        if ens is not None and (not isinstance(ens, int) or isinstance(ens, bool) or ens < 2):
            problems.append("ensemble_size must be an integer >= 2")
        if problems:
            raise ConfigError(problems)
        return ExperimentConfig(
            experiment_id=self.experiment_id,
            seed=self.seed,
            ensemble_size=ens,
            spec=self.spec,
            params={**exp.params, **self.params},
            tolerances=tol,
            schema_version=self.schema_version,
        )


def _is_tolerance(v) -> bool:
    if isinstance(v, bool):
        return False
    if isinstance(v, (int, float)):
        return math.isfinite(v) and v > 0
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v) and v[0] < v[1]
    return False


@dataclass(frozen=True)
class TestRecord:
    name: str
    statistic: float
    threshold: object
    relation: str
    passed: bool

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "relation": self.relation,
            "pass": self.passed,
        }


@dataclass
class RunReport:
    config: dict
    records: list
    artifacts: list
    wall_clock: float
    hash: str
    rng: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self, include_wall_clock: bool = True) -> dict:
        d = {
            "config": self.config,
            "tests": [r.to_dict() for r in self.records],
            "artifacts": self.artifacts,
            "hash": self.hash,
            "rng": self.rng,
            "pass": self.passed,
        }
        if include_wall_clock:
            d["wall_clock"] = self.wall_clock
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable)

    def summary_lines(self) -> list:
        name = self.config["experiment_id"]
        return [
            f"{'PASS' if r.passed else 'FAIL'} {name}/{r.name}: {r.statistic:.6g} {r.relation} {r.threshold}"
            for r in self.records
        ]


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


_COMPARE = {
    "<": lambda s, t: s < t,
    "<=": lambda s, t: s <= t,
    ">": lambda s, t: s > t,
    "|.|<=": lambda s, t: abs(s) <= t,
    "in": lambda s, t: t[0] <= s <= t[1],
}


class RunContext:
    """What an experiment sees: resolved settings, a stream and output sinks."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.params = config.params
        self.tol = config.tolerances
        self.ensemble = config.ensemble_size
        self.stream = RandomStream(config.seed)
        self.records: list = []
        self.files: dict = {}

    def check(self, name: str, statistic, threshold, relation: str) -> TestRecord:
        statistic = float(statistic)
        ok = bool(_COMPARE[relation](statistic, threshold)) and not math.isnan(statistic)
        rec = TestRecord(name, statistic, threshold, relation, ok)
        self.records.append(rec)
        return rec

    def csv(self, name: str, header, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self.files[name] = buf.getvalue()

    def json(self, name: str, obj) -> None:
        self.files[name] = json.dumps(obj, indent=2, default=_jsonable)


@dataclass(frozen=True)
class Experiment:
    id: str
    run: Callable
    tests: Callable  # params -> list of test names
    params: dict
    ensemble: Optional[int] = None
    tolerances: dict = field(default_factory=dict)


EXPERIMENTS: dict = {}


def _experiment(id, tests, params, ensemble=None, tolerances=None):
    def deco(fn):
        EXPERIMENTS[id] = Experiment(id, fn, tests, params, ensemble, tolerances or {})
        return fn

    return deco


def known_experiments() -> list:
    return list(EXPERIMENTS)


def default_config(experiment_id: str, seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig(experiment_id, seed=seed).resolved()


_source_digest = None


def _code_digest() -> str:
    global _source_digest
    if _source_digest is None:
        h = hashlib.sha256()
        for p in sorted(Path(__file__).parent.glob("*.py")):
            h.update(p.name.encode())
            h.update(p.read_bytes())
        _source_digest = h.hexdigest()
    return _source_digest


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunReport:
    """Run one named experiment; artifacts go to ``out_dir`` when given."""
    cfg = config.resolved()
    exp = EXPERIMENTS[cfg.experiment_id]
    ctx = RunContext(cfg)
    t0 = time.perf_counter()
    exp.run(ctx)
    wall = time.perf_counter() - t0

    names = [r.name for r in ctx.records]
    expected = exp.tests(cfg.params)
    if sorted(names) != sorted(expected):
        raise RuntimeError(f"experiment {exp.id} emitted tests {names}, declared {expected}")

    config_text = cfg.to_json()
    digest = hashlib.sha256((_code_digest() + config_text).encode()).hexdigest()
    artifacts = []
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in ctx.files.items():
            (out / name).write_text(text)
            artifacts.append(name)
        (out / "config.json").write_text(config_text)
        artifacts.append("config.json")
    report = RunReport(
        config=cfg.to_dict(),
        records=ctx.records,
        artifacts=artifacts,
        wall_clock=wall,
        hash=digest,
        rng=ctx.stream.layout(),
    )
    if out_dir is not None:
        (Path(out_dir) / "report.json").write_text(report.to_json())
        report.artifacts.append("report.json")
    return report


# --------------------------------------------------------------------------
# helpers


def _disk_points(stream: RandomStream, n: int, radius: float) -> np.ndarray:
    u = stream.generator.random((n, 2))
    return radius * np.sqrt(u[:, 0]) * np.exp(2j * math.pi * u[:, 1])


def _simulate_zeros(rho, radius, ensemble, stream, chunk=5000):
    """Zero point arrays of ``ensemble`` disk realizations, within ``radius``."""
    spec = SeriesSpec.for_radius(rho, radius)
    out = []
    for start in range(0, ensemble, chunk):
        size = min(chunk, ensemble - start)
        c = sample_coefficient_batch(spec, stream, size)
        out.extend(find_zeros_batch(c, radius))
    return out


def _counts(zero_arrays, radii) -> np.ndarray:
    radii = np.asarray(radii)
    return np.array([np.searchsorted(np.abs(z), radii, side="right") for z in zero_arrays])


def _tag(x) -> str:
    return f"{x:g}"


# --------------------------------------------------------------------------
# experiments


@_experiment(
    "borchardt-identity",
    tests=lambda p: ["max-relative-error", "runtime"],
    params={"n_max": 8, "configs": 100, "radius": 0.9, "max_seconds": 10.0},
    tolerances={"relative_error": 1e-9},
)
def _borchardt(ctx):
    p = ctx.params
    t0 = time.perf_counter()
    rows = []
    for i in range(p["configs"]):
        n = 1 + i % p["n_max"]
        b = kernels.build_bundle(_disk_points(ctx.stream, n, p["radius"]), 1.0)
        lhs = kernels.permanent(b.A) * kernels.determinant(b.A)
        rhs = kernels.determinant(b.M)
        rows.append((i, n, abs(lhs - rhs) / abs(rhs)))
    elapsed = time.perf_counter() - t0
    ctx.csv("borchardt.csv", ["config", "n", "relative_error"], rows)
    ctx.check("max-relative-error", max(r[2] for r in rows), ctx.tol["relative_error"], "<")
    ctx.check("runtime", elapsed, p["max_seconds"], "<")


@_experiment(
    "det-perm-equivalence",
    tests=lambda p: ["max-relative-error"],
    params={"n_max": 6, "configs": 100, "radius": 0.9},
    tolerances={"relative_error": 1e-8},
)
def _det_vs_perm(ctx):
    p = ctx.params
    rows = []
    for i in range(p["configs"]):
        n = 1 + i % p["n_max"]
        pts = _disk_points(ctx.stream, n, p["radius"])
        d = kernels.joint_intensity_det(pts)
        q = kernels.joint_intensity_perm(kernels.build_bundle(pts, 1.0))
        rows.append((i, n, d, q, abs(d - q) / abs(d)))
    ctx.csv("intensity_routes.csv", ["config", "n", "det_route", "perm_route", "relative_error"], rows)
    ctx.check("max-relative-error", max(r[4] for r in rows), ctx.tol["relative_error"], "<")


def _bin_average_ratio(a, b, rho):
    # average of the two-point ratio against the hyperbolic radial measure
    def weight(s):
        return 2.0 * s / (1.0 - s * s) ** 2

    num = integrate.quad(lambda s: kernels.two_point_ratio(s, rho) * weight(s), a, b, epsabs=0, epsrel=1e-12)[0]
    den = integrate.quad(weight, a, b, epsabs=0, epsrel=1e-12)[0]
    return num / den


@_experiment(
    "two-point-law",
    tests=lambda p: [f"ratio-r{_tag(r)}" for r in p["separations"]],
    params={"rho": 1.0, "separations": [0.3, 0.5], "half_width": 0.05, "center_radius": 0.6, "chunk": 5000},
    ensemble=100_000,
)
def _two_point(ctx):
    """Pair counting in pseudo-hyperbolic distance around zeros near 0.

    By disk invariance the pair intensity around a zero z1 depends only on
    |T_{z1}(z2)|.  Dividing the mean number of partners in the annulus
    a <= |T| <= b by its hyperbolic measure estimates the ratio averaged
    over the annulus.
    """
    p = ctx.params
    rho, c, hw = p["rho"], p["center_radius"], p["half_width"]
    seps = list(p["separations"])
    outer = max(seps) + hw
    R = (c + outer) / (1.0 + c * outer)
    edges = [(s - hw, s + hw) for s in seps]
    centers = np.zeros(ctx.ensemble)
    pairs = np.zeros((ctx.ensemble, len(seps)))
    spec = SeriesSpec.for_radius(rho, R)
    i = 0
    for start in range(0, ctx.ensemble, p["chunk"]):
        size = min(p["chunk"], ctx.ensemble - start)
        coeffs = sample_coefficient_batch(spec, ctx.stream, size)
        for z in find_zeros_batch(coeffs, R):
            inner = z[np.abs(z) <= c]
            centers[i] = inner.size
            if inner.size and z.size > 1:
                d = np.abs((z[None, :] - inner[:, None]) / (1.0 - np.conj(inner)[:, None] * z[None, :]))
                for j, (a, b) in enumerate(edges):
                    pairs[i, j] = np.count_nonzero((d >= a) & (d < b))
            i += 1
    rows = []
    total_c = centers.sum()
    m = ctx.ensemble
    for j, (s, (a, b)) in enumerate(zip(seps, edges)):
        measure = rho * (b * b / (1 - b * b) - a * a / (1 - a * a))
        ratio = pairs[:, j].sum() / total_c
        resid = pairs[:, j] - ratio * centers
        se = math.sqrt(np.sum(resid**2) * m / (m - 1)) / total_c
        est, est_se = ratio / measure, se / measure
        theory = _bin_average_ratio(a, b, rho)
        z = stats.z_score(est, theory, est_se)
        rows.append((s, a, b, int(pairs[:, j].sum()), int(total_c), est, est_se, theory, kernels.two_point_ratio(s, rho), z))
        ctx.check(f"ratio-r{_tag(s)}", z, ctx.tol["z_sigma"], "|.|<=")
    ctx.csv(
        "two_point.csv",
        ["separation", "bin_lo", "bin_hi", "pairs", "centers", "estimate", "se", "theory_bin", "theory_point", "z"],
        rows,
    )


@_experiment(
    "count-law-mc",
    tests=lambda p: ["chi-square-p", "mean-z"],
    params={"r": 0.5},
    ensemble=10_000,
)
def _count_law(ctx):
    r = ctx.params["r"]
    counts = _counts(_simulate_zeros(1.0, r, ctx.ensemble, ctx.stream), [r])[:, 0]
    pmf = laws.count_pmf(r)
    stat, dof, pval = stats.chi_square_gof(counts, pmf)
    obs = np.bincount(np.clip(counts, 0, pmf.size - 1), minlength=pmf.size)
    ctx.csv("count_law.csv", ["k", "observed", "expected"], [(k, int(obs[k]), pmf[k] * ctx.ensemble) for k in range(pmf.size)])
    mean, se = stats.mean_and_se(counts)
    ctx.check("chi-square-p", pval, ctx.tol["p_min"], ">")
    ctx.check("mean-z", stats.z_score(mean, laws.mean_variance(r)[0], se), ctx.tol["z_sigma"], "|.|<=")


@_experiment(
    "moduli-law",
    tests=lambda p: [f"ks-r{_tag(r)}" for r in p["radii"]] + ["joint-chi-square"],
    params={"radii": [0.3, 0.5, 0.6, 0.7, 0.8], "exact_terms": 200},
    ensemble=20_000,
)
def _moduli_law(ctx):
    radii = sorted(ctx.params["radii"])
    sim = _counts(_simulate_zeros(1.0, radii[-1], ctx.ensemble, ctx.stream.substream(0)), radii)
    mod = laws.sample_moduli(ctx.params["exact_terms"], ctx.stream.substream(1), ctx.ensemble)
    exact = np.array([np.searchsorted(row, radii, side="right") for row in mod])
    rows = []
    for j, r in enumerate(radii):
        d, pval = stats.ks_two_sample(sim[:, j], exact[:, j])
        rows.append((r, sim[:, j].mean(), exact[:, j].mean(), laws.mean_variance(r)[0], d, pval))
        ctx.check(f"ks-r{_tag(r)}", pval, ctx.tol["p_min"], ">")
    # annulus counts make the joint categories
    ann_sim = np.diff(sim, axis=1, prepend=0)
    ann_exact = np.diff(exact, axis=1, prepend=0)
    stat, dof, pval = stats.chi_square_two_sample(ann_sim, ann_exact)
    ctx.csv("moduli_law.csv", ["radius", "sim_mean", "exact_mean", "theory_mean", "ks", "p"], rows)
    ctx.json("moduli_joint.json", {"statistic": stat, "dof": dof, "p": pval})
    ctx.check("joint-chi-square", pval, ctx.tol["p_min"], ">")


@_experiment(
    "hole-probability",
    tests=lambda p: ["exact-vs-product", "mc-frequency-z", "asymptotic-ratio"],
    params={"r": 0.5, "oracle_terms": 64, "r_asymptotic": 0.99},
    ensemble=10_000,
    tolerances={"relative_error": 1e-10, "ratio_window": [0.9, 1.1]},
)
def _hole(ctx):
    p = ctx.params
    r = p["r"]
    exact = laws.hole_probability(r)
    oracle = 1.0
    for k in range(1, p["oracle_terms"] + 1):
        oracle *= 1.0 - r ** (2 * k)
    counts = _counts(_simulate_zeros(1.0, r, ctx.ensemble, ctx.stream), [r])[:, 0]
    freq = np.mean(counts == 0)
    se = math.sqrt(exact * (1 - exact) / ctx.ensemble)
    ra = p["r_asymptotic"]
    ratio = math.log(laws.hole_probability(ra)) / math.log(laws.hole_asymptotic(ra))
    ctx.json("hole.json", {"exact": exact, "oracle": oracle, "mc_frequency": freq, "mc_se": se, "log_ratio": ratio})
    ctx.check("exact-vs-product", abs(exact - oracle) / oracle, ctx.tol["relative_error"], "<")
    ctx.check("mc-frequency-z", stats.z_score(freq, exact, se), ctx.tol["z_sigma"], "|.|<=")
    ctx.check("asymptotic-ratio", ratio, list(ctx.tol["ratio_window"]), "in")


@_experiment(
    "euler-identity",
    tests=lambda p: [f"moment-k{k}" for k in range(1, p["k_max"] + 1)] + ["generating-function"],
    params={"q": 0.25, "k_max": 6, "s_values": [-0.5, 0.5, 1.0, 2.0]},
    tolerances={"relative_error": 1e-9},
)
def _euler(ctx):
    p = ctx.params
    r = math.sqrt(p["q"])
    pmf = laws.count_pmf(r, tail_cut=0)
    j = np.arange(pmf.size)
    rows = []
    for k in range(1, p["k_max"] + 1):
        closed = laws.binomial_moment(r, k)
        from_pmf = float(np.sum(np.array([math.comb(int(x), k) for x in j], dtype=float) * pmf))
        err = abs(closed - from_pmf) / closed
        rows.append((k, closed, from_pmf, err))
        ctx.check(f"moment-k{k}", err, ctx.tol["relative_error"], "<")
    worst = 0.0
    for s in p["s_values"]:
        prod = laws.count_pgf(r, s)
        worst = max(worst, abs(prod - laws.euler_series(p["q"], s)) / abs(prod))
    ctx.csv("binomial_moments.csv", ["k", "closed_form", "from_pmf", "relative_error"], rows)
    ctx.check("generating-function", worst, ctx.tol["relative_error"], "<")


@_experiment(
    "clt",
    tests=lambda p: ["ks-distance"],
    params={"r": 0.995},
    ensemble=100_000,
    tolerances={"ks_distance": 0.02},
)
def _clt(ctx):
    r = ctx.params["r"]
    n = laws.sample_count(r, ctx.stream, ctx.ensemble)
    d = stats.ks_lattice_normal(n)
    mu, var = laws.mean_variance(r)
    ctx.json("clt.json", {"sample_mean": n.mean(), "sample_var": n.var(ddof=1), "mean": mu, "variance": var, "ks": d})
    ctx.check("ks-distance", d, ctx.tol["ks_distance"], "<")


@_experiment(
    "lln",
    tests=lambda p: [f"mean-rho{_tag(r)}-h{_tag(h)}" for r in p["rhos"] for h in p["areas"]]
    + [f"variance-decay-rho{_tag(r)}" for r in p["rhos"]],
    params={"rhos": [0.5, 1.0, 2.0], "areas": [5.0, 20.0, 80.0]},
    ensemble=2000,
)
def _lln(ctx):
    areas = sorted(ctx.params["areas"])
    radii = [laws.radius_for_hyperbolic_area(h) for h in areas]
    rows = []
    for i, rho in enumerate(ctx.params["rhos"]):
        counts = _counts(_simulate_zeros(rho, radii[-1], ctx.ensemble, ctx.stream.substream(i)), radii)
        scaled_var = []
        for j, h in enumerate(areas):
            mean, se = stats.mean_and_se(counts[:, j])
            expected = laws.expected_zeros_hyperbolic(rho, h)
            z = stats.z_score(mean, expected, se)
            v = float(np.var(counts[:, j] / h, ddof=1))
            scaled_var.append(v)
            rows.append((rho, h, radii[j], mean, se, expected, z, v))
            ctx.check(f"mean-rho{_tag(rho)}-h{_tag(h)}", z, ctx.tol["z_sigma"], "|.|<=")
        # largest successive ratio of Var(N/h); below 1 means strict decay
        worst = max(b / a for a, b in zip(scaled_var, scaled_var[1:]))
        ctx.check(f"variance-decay-rho{_tag(rho)}", worst, 1.0, "<")
    ctx.csv("lln.csv", ["rho", "area", "radius", "mean", "se", "expected", "z", "var_scaled"], rows)


@_experiment(
    "reconstruction",
    tests=lambda p: ["median-error", "error-decreases"],
    params={"rho": 1.0, "radius": 0.95, "larger_radius": 0.98},
    ensemble=200,
    tolerances={"median_relative_error": 0.15},
)
def _reconstruction(ctx):
    p = ctx.params
    rho, r1, r2 = p["rho"], p["radius"], p["larger_radius"]
    spec = SeriesSpec.for_radius(rho, r2)
    coeffs = sample_coefficient_batch(spec, ctx.stream, ctx.ensemble)
    zs = find_zeros_batch(coeffs, r2)
    rows = []
    for c, z in zip(coeffs, zs):
        truth = abs(c[0])
        e1 = reconstruct_abs_f0(z[np.abs(z) <= r1], rho).estimate
        e2 = reconstruct_abs_f0(z, rho).estimate
        rows.append((truth, e1, e2, abs(e1 - truth) / truth, abs(e2 - truth) / truth))
    arr = np.array(rows)
    m1, m2 = float(np.median(arr[:, 3])), float(np.median(arr[:, 4]))
    ctx.csv("reconstruction.csv", ["truth", f"estimate_r{_tag(r1)}", f"estimate_r{_tag(r2)}", "error_small", "error_large"], rows)
    ctx.check("median-error", m1, ctx.tol["median_relative_error"], "<=")
    ctx.check("error-decreases", m2 - m1, 0.0, "<")


@_experiment(
    "dynamics-sde",
    tests=lambda p: [f"{t}-rho{_tag(r)}" for r in p["rhos"] for t in ("drift-re-z", "drift-im-z", "slope", "dt-halving")],
    params={"rhos": [1.0, 2.0], "region_radius": 0.5},
    ensemble=10_000,
    tolerances={"slope_window": [0.9, 1.1], "halving_change": 0.02},
)
def _dynamics_sde(ctx):
    from .dynamics import calibrated_dt

    rows = []
    for i, rho in enumerate(ctx.params["rhos"]):
        dt = calibrated_dt(rho)
        # common random numbers: the halved run reuses the same substream
        est = estimate_drift_diffusion_at_conditioned_zero(
            rho, dt, ctx.ensemble, ctx.stream.substream(i), ctx.params["region_radius"]
        )
        half = estimate_drift_diffusion_at_conditioned_zero(
            rho, dt / 2, ctx.ensemble, ctx.stream.substream(i), ctx.params["region_radius"]
        )
        zr, zi = est.drift_z_scores()
        change = abs(half.slope - est.slope) / est.slope
        rows.append((rho, dt, est.n, est.lost, zr, zi, est.slope, est.slope_se, half.slope, change))
        tag = _tag(rho)
        ctx.check(f"drift-re-z-rho{tag}", zr, ctx.tol["z_sigma"], "|.|<=")
        ctx.check(f"drift-im-z-rho{tag}", zi, ctx.tol["z_sigma"], "|.|<=")
        ctx.check(f"slope-rho{tag}", est.slope, list(ctx.tol["slope_window"]), "in")
        ctx.check(f"dt-halving-rho{tag}", change, ctx.tol["halving_change"], "<")
    ctx.csv(
        "dynamics_sde.csv",
        ["rho", "dt", "n", "lost", "drift_re_z", "drift_im_z", "slope", "slope_se", "slope_half_dt", "relative_change"],
        rows,
    )


def _one_step_displacements(frames0, frames1, match_radius):
    steps = []
    for f0, f1 in zip(frames0, frames1):
        if f0.size and f1.size:
            steps.append(pseudo_hyperbolic_steps(match_zero_trajectories([f0, f1], match_radius)))
    return np.concatenate(steps) if steps else np.empty(0)


@_experiment(
    "conformal-invariance",
    tests=lambda p: ["intensity-max-relative-error", "displacement-ks", "displacement-mean-z"],
    params={"maps": 20, "n_max": 4, "rhos": [0.5, 1.0, 2.0], "radius": 0.8, "beta_radius": 0.7,
            "rho": 1.0, "beta": [0.5, 0.0], "region_radius": 0.5, "dt": 1e-3, "chunk": 5000},
    ensemble=10_000,
    tolerances={"relative_error": 1e-9},
)
def _conformal(ctx):
    p = ctx.params
    rows = []
    g = ctx.stream.substream(0)
    for i in range(p["maps"]):
        beta = complex(_disk_points(g, 1, p["beta_radius"])[0])
        rho = p["rhos"][i % len(p["rhos"])]
        n = 1 + i % p["n_max"]
        z = _disk_points(g, n, p["radius"])
        w, dw = kernels.mobius(beta, z)
        # p(Tz) prod |T'(z)|^2 = p(z)
        lhs = kernels.joint_intensity_perm(kernels.build_bundle(w, rho)) * np.prod(np.abs(dw) ** 2)
        rhs = kernels.joint_intensity_perm(kernels.build_bundle(z, rho))
        rows.append((i, beta.real, beta.imag, rho, n, lhs, rhs, abs(lhs - rhs) / rhs))
    ctx.csv("conformal_intensity.csv", ["map", "beta_re", "beta_im", "rho", "n", "transformed", "original", "relative_error"], rows)
    ctx.check("intensity-max-relative-error", max(r[7] for r in rows), ctx.tol["relative_error"], "<")

    rho, region, dt = p["rho"], p["region_radius"], p["dt"]
    beta = complex(*p["beta"])
    match_radius = 0.25 * math.sqrt(math.pi) * (1 - region**2) / math.sqrt(rho)
    outer = (region + abs(beta)) / (1 + abs(beta) * region)
    disk_spec = SeriesSpec.for_radius(rho, region)
    push_spec = SeriesSpec.for_radius(rho, outer)
    a_steps, b_steps = [], []
    sa, sb = ctx.stream.substream(1), ctx.stream.substream(2)
    for start in range(0, ctx.ensemble, p["chunk"]):
        size = min(p["chunk"], ctx.ensemble - start)
        c0 = sample_coefficient_batch(disk_spec, sa, size)
        c1 = evolve_batch(c0, disk_spec, dt, sa)
        a_steps.append(_one_step_displacements(find_zeros_batch(c0, region), find_zeros_batch(c1, region), match_radius))
        c0 = sample_coefficient_batch(push_spec, sb, size)
        c1 = evolve_batch(c0, _unconditioned(push_spec), dt, sb)
        f0 = pushforward_zero_frames(c0, push_spec, beta, region)
        f1 = pushforward_zero_frames(c1, push_spec, beta, region)
        b_steps.append(_one_step_displacements(f0, f1, match_radius))
    a, b = np.concatenate(a_steps), np.concatenate(b_steps)
    d, pval = stats.ks_two_sample(a, b)
    (ma, sea), (mb, seb) = stats.mean_and_se(a), stats.mean_and_se(b)
    z = (ma - mb) / math.hypot(sea, seb)
    ctx.json("conformal_dynamics.json", {"disk_steps": a.size, "pushforward_steps": b.size, "ks": d, "p": pval,
                                         "disk_mean": ma, "pushforward_mean": mb, "z": z})
    ctx.check("displacement-ks", pval, ctx.tol["p_min"], ">")
    ctx.check("displacement-mean-z", z, ctx.tol["z_sigma"], "|.|<=")


@_experiment(
    "gaussian-moment-permanent",
    tests=lambda p: ["moment-z"],
    params={"rho": 1.0, "points": [[0.3, 0.0], [-0.2, 0.4], [0.0, -0.5]], "chunk": 50_000},
    ensemble=1_000_000,
)
def _moment_perm(ctx):
    p = ctx.params
    pts = np.array([complex(*xy) for xy in p["points"]])
    spec = SeriesSpec.for_radius(p["rho"], float(np.max(np.abs(pts))), epsilon=1e-10)
    acc = []
    for start in range(0, ctx.ensemble, p["chunk"]):
        size = min(p["chunk"], ctx.ensemble - start)
        vals = evaluate_batch(sample_coefficient_batch(spec, ctx.stream, size), pts)
        acc.append(np.abs(np.prod(vals, axis=1)) ** 2)
    x = np.concatenate(acc)
    mean, se = stats.mean_and_se(x)
    theory = kernels.permanent(kernels.build_bundle(pts, p["rho"]).A).real
    z = stats.z_score(mean, theory, se)
    ctx.json("moment_permanent.json", {"empirical": mean, "se": se, "permanent": theory, "z": z})
    ctx.check("moment-z", z, ctx.tol["z_sigma"], "|.|<=")
