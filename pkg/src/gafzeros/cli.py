"""Command line entry point: ``gafzeros <command> [--config PATH] [--seed N] [--out DIR]``.

Every command accepts a versioned JSON config whose keys supply option
defaults; explicit flags win.  ``verify`` runs named experiments and exits
0 only if every test passes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import kernels, laws
from .dynamics import estimate_drift_diffusion_at_conditioned_zero, simulate_zero_trajectories
from .experiments import SCHEMA_VERSION, ConfigError, ExperimentConfig, known_experiments, run_experiment
from .model import CoefficientVector, Conditioning, SeriesSpec, sample_coefficients, sample_conditioned_at_zero
from .reconstruct import reconstruct_abs_f0
from .rng import RandomStream
from .zeros import find_zeros

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# option name -> builtin default, per command
DEFAULTS = {
    "sample": {"rho": 1.0, "r_max": 0.9, "epsilon": 1e-8, "conditioned": False, "count": 1},
    "zeros": {"input": None, "rho": 1.0, "radius": 0.9},
    "intensity": {"points": None, "rho": 1.0},
    "law": {"radii": [0.5], "k_max": 6},
    "reconstruct": {"input": None, "rho": 1.0, "radius": 0.95},
    "dynamics": {"rho": 1.0, "horizon": 0.1, "dt": 1e-3, "region": 0.5, "estimate_sde": False, "ensemble": 10_000},
}


def _parse_points(text):
    if isinstance(text, list):
        return np.array([complex(*p) if isinstance(p, list) else complex(p) for p in text])
    return np.array([complex(t.replace(" ", "")) for t in text.replace(",", " ").split()])


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gafzeros", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config with a schema_version field")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=None, help="output directory (default: current)")
        return p

    p = common(sub.add_parser("sample", help="draw coefficient realizations"))
    p.add_argument("--rho", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--conditioned", action="store_true", default=None, help="condition on a zero at the origin")
    p.add_argument("--count", type=int)

    p = common(sub.add_parser("zeros", help="zeros of a realization"))
    p.add_argument("--input", type=Path, help="realization JSON; a fresh one is drawn if omitted")
    p.add_argument("--rho", type=float)
    p.add_argument("--radius", type=float)

    p = common(sub.add_parser("intensity", help="joint intensity by both routes"))
    p.add_argument("--points", help="complex points, e.g. '0.1+0.2j 0.3'")
    p.add_argument("--rho", type=float)

    p = common(sub.add_parser("law", help="exact counting law tables"))
    p.add_argument("--radii", type=float, nargs="+")
    p.add_argument("--k-max", type=int)

    p = common(sub.add_parser("reconstruct", help="product reconstruction of |f(0)| from zeros"))
    p.add_argument("--input", type=Path)
    p.add_argument("--rho", type=float)
    p.add_argument("--radius", type=float)

    p = common(sub.add_parser("dynamics", help="zero trajectories under coefficient OU motion"))
    p.add_argument("--rho", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--region", type=float)
    p.add_argument("--ensemble", type=int)
    p.add_argument("--estimate-sde", action="store_true", default=None)

    p = common(sub.add_parser("verify", help="run named verification experiments"))
    p.add_argument("--experiment", action="append", help="experiment id, repeatable; 'all' runs every one")
    p.add_argument("--list", action="store_true", help="list experiment ids and exit")
    return ap


def _load_config(path):
    if path is None:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    if not isinstance(d, dict) or d.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError([f"config must be an object with schema_version {SCHEMA_VERSION}"])
    return d


def _options(args, command, cfg):
    known = DEFAULTS[command]
    unknown = sorted(set(cfg) - set(known) - {"schema_version", "seed"})
    if unknown:
        raise ConfigError([f"unknown config keys for {command}: {unknown}"])
    opts = {}
    for key, default in known.items():
        cli = getattr(args, key, None)
        opts[key] = cli if cli is not None else cfg.get(key, default)
    return opts


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _realization(opts, stream, radius):
    if opts.get("input"):
        return CoefficientVector.from_json(Path(opts["input"]).read_text())
    return sample_coefficients(SeriesSpec.for_radius(opts["rho"], radius), stream)


def cmd_sample(opts, stream, out):
    kw = {"conditioning": Conditioning.ZERO_AT_ORIGIN} if opts["conditioned"] else {}
    spec = SeriesSpec.for_radius(opts["rho"], opts["r_max"], opts["epsilon"], **kw)
    draw = sample_conditioned_at_zero if opts["conditioned"] else sample_coefficients
    for i in range(opts["count"]):
        (out / f"realization_{i}.json").write_text(draw(spec, stream.substream(i)).to_json())
    print(f"wrote {opts['count']} realization(s) of degree {spec.truncation_degree}")
    return EXIT_OK


def cmd_zeros(opts, stream, out):
    cv = _realization(opts, stream, opts["radius"])
    zs = find_zeros(cv, opts["radius"])
    (out / "zeros.csv").write_text(zs.to_csv())
    (out / "zeros.json").write_text(zs.to_json())
    print(f"{zs.count} zeros within {zs.reliable_radius}")
    return EXIT_OK


def cmd_intensity(opts, stream, out):
    if opts["points"] is None:
        raise ConfigError(["intensity needs --points"])
    pts = _parse_points(opts["points"])
    rho = opts["rho"]
    perm = kernels.joint_intensity_perm(kernels.build_bundle(pts, rho))
    det = kernels.joint_intensity_det(pts) if rho == 1 else None
    rel = None if det is None else abs(det - perm) / max(abs(det), 1e-300)
    result = {
        "points": [[z.real, z.imag] for z in pts],
        "rho": rho,
        "det_route": det,
        "perm_route": perm,
        "relative_difference": rel,
    }
    text = json.dumps(result, indent=2)
    (out / "intensity.json").write_text(text)
    print(text)
    return EXIT_OK


def cmd_law(opts, stream, out):
    pmf_rows, moment_rows, binom_rows = [], [], []
    for r in opts["radii"]:
        for k, p in enumerate(laws.count_pmf(r)):
            pmf_rows.append((r, k, repr(float(p))))
        mu, var = laws.mean_variance(r)
        moment_rows.append((r, mu, var, laws.hole_probability(r), laws.hole_asymptotic(r)))
        for k in range(1, opts["k_max"] + 1):
            try:
                binom_rows.append((r, k, laws.binomial_moment(r, k)))
            except OverflowError:
                binom_rows.append((r, k, "inf"))
    _write_csv(out / "count_pmf.csv", ["r", "k", "probability"], pmf_rows)
    _write_csv(out / "moments.csv", ["r", "mean", "variance", "hole_probability", "hole_asymptotic"], moment_rows)
    _write_csv(out / "binomial_moments.csv", ["r", "k", "moment"], binom_rows)
    print(f"wrote law tables for radii {opts['radii']}")
    return EXIT_OK


def cmd_reconstruct(opts, stream, out):
    cv = _realization(opts, stream, opts["radius"])
    zs = find_zeros(cv, opts["radius"])
    res = reconstruct_abs_f0(zs.points, cv.spec.rho)
    truth = abs(cv.coeffs[0])
    rows = [
        (k + 1, float(p), math.log(p / truth) if p > 0 and truth > 0 else "")
        for k, p in enumerate(res.partial_products)
    ]
    _write_csv(out / "convergence.csv", ["terms", "estimate", "log_error"], rows)
    print(f"|f(0)| = {truth:.6g}, estimate {res.estimate:.6g} from {res.terms_used} zeros")
    return EXIT_OK


def cmd_dynamics(opts, stream, out):
    if opts["estimate_sde"]:
        est = estimate_drift_diffusion_at_conditioned_zero(opts["rho"], None, opts["ensemble"], stream)
        zr, zi = est.drift_z_scores()
        result = {
            "rho": est.rho, "dt": est.dt, "n": est.n, "lost": est.lost,
            "drift": [est.drift.real, est.drift.imag], "drift_z": [zr, zi],
            "sigma2": est.sigma2, "predicted_sigma2": est.predicted_sigma2,
            "slope": est.slope, "slope_se": est.slope_se,
        }
        (out / "sde.json").write_text(json.dumps(result, indent=2))
        print(json.dumps(result, indent=2))
        return EXIT_OK
    spec = SeriesSpec.for_radius(opts["rho"], opts["region"])
    trajs = simulate_zero_trajectories(spec, opts["horizon"], opts["dt"], opts["region"], stream)
    rows = []
    for i, tr in enumerate(trajs):
        for t, z in zip(tr.times, tr.positions):
            rows.append((i, t, z.real, z.imag))
    rows.sort(key=lambda r: (r[1], r[0]))
    _write_csv(out / "frames.csv", ["trajectory", "time", "re", "im"], rows)
    payload = [
        {"times": list(map(float, tr.times)), "re": [z.real for z in tr.positions],
         "im": [z.imag for z in tr.positions], "terminated": tr.terminated}
        for tr in trajs
    ]
    (out / "trajectories.json").write_text(json.dumps(payload))
    print(f"{len(trajs)} trajectories")
    return EXIT_OK


def cmd_verify(args, cfg, out):
    if args.list:
        print("\n".join(known_experiments()))
        return EXIT_OK
    if cfg:
        configs = [ExperimentConfig.from_dict(cfg)]
        if args.seed is not None:
            configs[0].seed = args.seed
    else:
        ids = args.experiment or ["all"]
        if "all" in ids:
            ids = known_experiments()
        configs = [ExperimentConfig(i, seed=args.seed or 0) for i in ids]
    for c in configs:
        c.resolved()  # fail before any artifact is written
    ok = True
    for c in configs:
        report = run_experiment(c, out / c.experiment_id)
        for line in report.summary_lines():
            print(line)
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "sample": cmd_sample,
    "zeros": cmd_zeros,
    "intensity": cmd_intensity,
    "law": cmd_law,
    "reconstruct": cmd_reconstruct,
    "dynamics": cmd_dynamics,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = args.out or Path(".")
    try:
        cfg = _load_config(args.config)
        if args.command == "verify":
            return cmd_verify(args, cfg, out)
        opts = _options(args, args.command, cfg)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](opts, RandomStream(seed), out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
