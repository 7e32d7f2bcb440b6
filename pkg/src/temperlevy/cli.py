"""Command-line front end.

Exit status: 0 on success, 1 when the model fails validation (or the input
is malformed), 2 when a numerical routine fails.
"""

import argparse
import csv
import datetime
import json
import math
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__, bench
from . import rng as rngmod
from .charfn import exponent_identity_rows, stable_exponent, tempered_exponent
from .density import batch_pdf_cdf, build_grid, grid_pair
from .errors import TemperLevyError
from .model import ModelSpec, TweedieExp, reference_model, sigma_from_rosinski, validate
from .sampler import (cached_grid_pair, inversion_sample, make_ratio, optimal_split,
                      parallel_rejection, rejection_decisions, sample_path, sample_stable,
                      tweedie_rejection)
from .stats import acceptance_summary, kde, kde_envelope, ks_statistic, smooth_pdf

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

# KDE bandwidths for the reference run (fixed inputs, not estimated)
BW_TEMPERED = 0.02463
BW_STABLE = 0.006565
BW_T10 = 0.1863


class InvalidModel(Exception):
    pass


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_json(path, payload):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def output_path(out, default_name):
    """``--out`` naming a .csv file is used as is; otherwise it is a directory."""
    if out.endswith(".csv"):
        return out
    return os.path.join(out, default_name)


def manifest_path(csv_path):
    return os.path.splitext(csv_path)[0] + ".manifest.json"


def load_model(path):
    if path is None:
        return reference_model()
    try:
        with open(path) as fh:
            return ModelSpec.from_json(fh.read())
    except (OSError, ValueError, KeyError, TypeError, SyntaxError) as exc:
        raise InvalidModel(f"cannot read model {path}: {exc}") from exc


def require_valid(spec):
    problems = validate(spec)
    if problems:
        raise InvalidModel("; ".join(str(v) for v in problems))


def manifest(args, spec, batch, wall, **extra):
    d = dict(command=args.command, seed=args.seed, rng_scheme=rngmod.SCHEME,
             spec_hash=spec.spec_hash(), model=spec.to_dict(), version=__version__,
             proposals_used=batch.proposals_used, accepted=batch.accepted,
             wall_time=wall, created=datetime.datetime.now(datetime.timezone.utc).isoformat())
    d.update(extra)
    return d


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_validate(args, spec):
    problems = validate(spec)
    if problems:
        print("invalid")
        for v in problems:
            print(f"  {v}")
        return EXIT_INVALID
    print(f"valid, eta = {spec.eta:.6f}")
    header = ("z", "C_re", "C_im", "C_tilde_re", "C_tilde_im", "rho_hat_re", "rho_hat_im", "defect")
    rows = [(r.z, r.stable.real, r.stable.imag, r.tempered.real, r.tempered.imag,
             r.big_jump.real, r.big_jump.imag, r.defect)
            for r in exponent_identity_rows(spec, args.z)]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    write_csv(output_path(args.out, "identity.csv"), header, rows)
    return EXIT_OK


def cmd_pdf(args, spec):
    require_valid(spec)
    t = args.t
    x = np.linspace(args.x_min, args.x_max, args.n_points)
    f = batch_pdf_cdf(stable_exponent(spec.stable), t, x, want_cdf=False)[0]
    ft = batch_pdf_cdf(tempered_exponent(spec), t, x, want_cdf=False)[0]
    bound = math.exp(t * spec.eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(f > 0, ft / f, np.nan)
    path = write_csv(output_path(args.out, "pdf.csv"), ("x", "f_t", "f_tilde_t", "ratio", "bound"),
                     zip(x, f, ft, ratio, np.full(x.size, bound)))
    if args.save_grid:
        g_st, g_te = grid_pair(spec, t, args.grid_points)
        base = os.path.join(args.out if not args.out.endswith(".csv") else os.path.dirname(args.out),
                            f"grid_t{t:g}")
        g_st.save(base + "_stable.bin")
        g_te.save(base + "_tempered.bin")
    print(path)
    return EXIT_OK


def cmd_sample(args, spec):
    require_valid(spec)
    start = time.perf_counter()
    extra = {}
    if args.method == "rejection":
        plan = optimal_split(args.t, spec.eta)
        batch = parallel_rejection(spec, args.t, args.n, args.seed, n_streams=args.streams,
                                   threads=args.threads, plan=plan)
        extra = dict(n_splits=plan.n_splits, dt=plan.dt, streams=args.streams)
    elif args.method == "tweedie":
        if not isinstance(spec.tempering, TweedieExp):
            raise InvalidModel("--method tweedie needs a tweedie model")
        batch = tweedie_rejection(spec, args.t, args.n, args.seed)
    else:
        ct = tempered_exponent(spec)
        batch = inversion_sample(ct, args.t, args.n, args.seed, build_grid(ct, args.t))
    wall = time.perf_counter() - start
    path = write_csv(output_path(args.out, "sample.csv"), ("index", "value"),
                     enumerate(batch.values))
    write_json(manifest_path(path), manifest(args, spec, batch, wall, method=args.method,
                                             t=args.t, n=args.n, **extra))
    print(path)
    return EXIT_OK


def cmd_path(args, spec):
    require_valid(spec)
    start = time.perf_counter()
    path_values, batch = sample_path(spec, args.dt, args.n_steps, args.seed, return_batch=True)
    wall = time.perf_counter() - start
    k = np.arange(1, args.n_steps + 1)
    path = write_csv(output_path(args.out, "path.csv"), ("k", "time", "value"),
                     zip(k, k * args.dt, path_values))
    write_json(manifest_path(path), manifest(args, spec, batch, wall, dt=args.dt,
                                             n_steps=args.n_steps))
    print(path)
    return EXIT_OK


def cmd_bench(args, spec):
    require_valid(spec)
    obs = max(10, int(round(args.observations * args.scale)))
    cfg = bench.BenchConfig(model=spec, t_values=tuple(args.t_values), alphas=tuple(args.alphas),
                            ells=tuple(args.ells), observations=obs, repeats=args.repeats,
                            seed=args.seed)
    out_dir = args.out
    if args.sweep in ("t", "both"):
        rows = bench.t_sweep(cfg)
        print(bench.write_rows(rows, os.path.join(out_dir, "bench_t.csv")))
    if args.sweep in ("alpha-ell", "both"):
        rows = bench.alpha_ell_sweep(cfg)
        print(bench.write_rows(rows, os.path.join(out_dir, "bench_alpha_ell.csv")))
    return EXIT_OK


def _kde_table(path, sample, bandwidth, grid, smoothed, envelope):
    est = kde(sample, bandwidth, grid).density_estimates
    write_csv(path, ("x", "estimate", "smoothed_true", "band_lo", "band_hi"),
              zip(grid, est, smoothed, envelope.band_lo, envelope.band_hi))
    dev, ok = envelope.check(est)
    return dict(bandwidth=bandwidth, n=int(np.size(sample)), max_deviation=dev,
                threshold=envelope.sup_threshold, within_envelope=bool(ok))


def _eval_grid(density_grid, points=401, mass=0.005):
    lo, hi = density_grid.quantile(np.array([mass, 1.0 - mass]))
    return np.linspace(lo, hi, points)


def reproduce_reference(out_dir, seed=0, replications=500, proposals=3000, long_proposals=30000,
                       envelope_replications=100, spec=None):
    """Fixed-seed run of the worked simulation study; returns the summary dict."""
    spec = spec or reference_model()
    t = 1.0
    streams = rngmod.substreams(seed, 6)
    g_st, g_te = cached_grid_pair(spec, t)
    ratio = make_ratio(spec, t, (g_st, g_te))
    c_st, c_te = stable_exponent(spec.stable), tempered_exponent(spec)

    # one rejection run
    Y, _, A = rejection_decisions(spec, t, proposals, streams[0], ratio)
    accepted = Y[A]
    k = np.arange(1, accepted.size + 1)
    write_csv(os.path.join(out_dir, "path_tempered.csv"), ("k", "time", "value"),
              zip(k, k * t, np.cumsum(accepted)))
    k = np.arange(1, Y.size + 1)
    write_csv(os.path.join(out_dir, "path_stable.csv"), ("k", "time", "value"),
              zip(k, k * t, np.cumsum(Y)))

    grid = _eval_grid(g_te)
    env = kde_envelope(lambda m, g: inversion_sample(c_te, t, m, g, g_te).values, accepted.size,
                       BW_TEMPERED, grid, smooth_pdf(c_te, t, BW_TEMPERED, grid),
                       envelope_replications, streams[3])
    kde_te = _kde_table(os.path.join(out_dir, "kde_tempered_t1.csv"), accepted, BW_TEMPERED,
                        grid, env.smoothed, env)
    grid_s = _eval_grid(g_st, mass=0.05)
    env_s = kde_envelope(lambda m, g: sample_stable(spec.stable, t, m, g).values, Y.size,
                         BW_STABLE, grid_s, smooth_pdf(c_st, t, BW_STABLE, grid_s),
                         envelope_replications, streams[4])
    kde_st = _kde_table(os.path.join(out_dir, "kde_stable_t1.csv"), Y, BW_STABLE, grid_s,
                        env_s.smoothed, env_s)

    summary_acc = acceptance_summary(replications, proposals, spec, t, streams[1], (g_st, g_te))
    write_json(os.path.join(out_dir, "acceptance_summary.json"), summary_acc.to_dict())

    # long run at dt = 1, aggregated into sums of ten consecutive increments
    Y10, _, A10 = rejection_decisions(spec, t, long_proposals, streams[2], ratio)
    inc = Y10[A10]
    n_sums = inc.size // 10
    sums = inc[: n_sums * 10].reshape(n_sums, 10).sum(axis=1)
    g10 = build_grid(c_te, 10.0, verify=False)
    grid10 = _eval_grid(g10)
    env10 = kde_envelope(lambda m, g: inversion_sample(c_te, 10.0, m, g, g10).values, n_sums,
                         BW_T10, grid10, smooth_pdf(c_te, 10.0, BW_T10, grid10),
                         envelope_replications, streams[5])
    kde_10 = _kde_table(os.path.join(out_dir, "kde_tempered_t10.csv"), sums, BW_T10, grid10,
                        env10.smoothed, env10)
    write_csv(os.path.join(out_dir, "sums_t10.csv"), ("index", "value"), enumerate(sums))

    ks1 = ks_statistic(accepted, g_te.cdf)
    ks_st = ks_statistic(Y, g_st.cdf)
    ks10 = ks_statistic(sums, g10.cdf)
    s_plus = None
    if hasattr(spec.tempering, "rosinski_measure"):
        s_plus = sigma_from_rosinski(spec.tempering.rosinski_measure(), spec.alpha)[0]
    summary = dict(
        seed=seed, rng_scheme=rngmod.SCHEME, spec_hash=spec.spec_hash(), model=spec.to_dict(),
        eta=spec.eta, s=s_plus, proposals=proposals, accepted=int(accepted.size),
        acceptance=summary_acc.to_dict(),
        long_run=dict(proposals=long_proposals, accepted=int(inc.size), sums=int(n_sums),
                      expected_accepted=long_proposals * math.exp(-spec.eta * t)),
        ks=dict(tempered_t1=asdict(ks1), stable_t1=asdict(ks_st), tempered_t10=asdict(ks10)),
        kde=dict(tempered_t1=kde_te, stable_t1=kde_st, tempered_t10=kde_10),
    )
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def cmd_reproduce7(args, spec):
    if args.model is not None:
        require_valid(spec)
    else:
        spec = reference_model()
    summary = reproduce_reference(args.out, args.seed, replications=args.replications,
                                 envelope_replications=args.envelope_replications, spec=spec)
    acc = summary["acceptance"]
    if summary["s"] is not None:
        print(f"s = {summary['s']:.7f}")
    print(f"eta = {summary['eta']:.6f}")
    print(f"accepted {summary['accepted']} of {summary['proposals']}")
    print(f"acceptance over {acc['replications']} runs: mean {acc['mean']:.1f}, sd {acc['sd']:.1f}, "
          f"range [{acc['min']}, {acc['max']}]")
    print(f"t=10 run: {summary['long_run']['accepted']} accepted, {summary['long_run']['sums']} sums")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="temperlevy",
                                description="Tempered stable simulation by rejection sampling.")
    p.add_argument("--model", help="model JSON file (default: symmetric R_ell model, alpha=.75)")
    p.add_argument("--seed", type=int, default=0, help="64-bit seed")
    p.add_argument("--out", default=".", help="output directory (or .csv path for sample/path)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a model and print the exponent identity table")
    v.add_argument("--z", type=float, nargs="+", default=[0.5, 1.0, 2.0, 5.0])

    d = sub.add_parser("pdf", help="stable and tempered densities on a grid")
    d.add_argument("--t", type=float, default=1.0)
    d.add_argument("--x-min", type=float, default=-2.0)
    d.add_argument("--x-max", type=float, default=2.0)
    d.add_argument("--n-points", type=int, default=201)
    d.add_argument("--save-grid", action="store_true", help="also write the density grid cache")
    d.add_argument("--grid-points", type=int, default=2049)

    s = sub.add_parser("sample", help="draws of the tempered law at time t")
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--method", choices=("rejection", "inversion", "tweedie"), default="rejection")
    s.add_argument("--streams", type=int, default=4, help="substreams for the rejection sampler")

    pa = sub.add_parser("path", help="a sample path on a regular time grid")
    pa.add_argument("--dt", type=float, default=1.0)
    pa.add_argument("--n-steps", type=int, default=1000)

    b = sub.add_parser("bench", help="timing comparison against grid inversion")
    b.add_argument("--sweep", choices=("t", "alpha-ell", "both"), default="both")
    b.add_argument("--t-values", type=float, nargs="+", default=[1.0, 2.0, 5.0, 10.0, 20.0])
    b.add_argument("--alphas", type=float, nargs="+", default=[0.5, 0.75, 0.95])
    b.add_argument("--ells", type=float, nargs="+", default=[0.5, 1.0, 5.0])
    b.add_argument("--observations", type=int, default=1000)
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--scale", type=float, default=1.0, help="multiplies the observation count")

    r = sub.add_parser("reproduce7", help="fixed-seed reference simulation run")
    r.add_argument("--replications", type=int, default=500)
    r.add_argument("--envelope-replications", type=int, default=100)
    return p


COMMANDS = dict(validate=cmd_validate, pdf=cmd_pdf, sample=cmd_sample, path=cmd_path,
                bench=cmd_bench, reproduce7=cmd_reproduce7)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = load_model(args.model)
        return COMMANDS[args.command](args, spec)
    except (TemperLevyError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidModel, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
