"""Timing harness comparing rejection sampling with grid-based inversion.

Only the sampling loop is timed (best of ``repeats``); building the density
grids each method needs is timed separately and reported as precompute_time.
Both methods produce the same number of observations in every cell.
"""

import csv
import math
import time
from dataclasses import dataclass, field

from .charfn import tempered_exponent
from .density import build_grid
from .model import ModelSpec, PowerLawRosinski, reference_model
from .sampler import cached_grid_pair, inversion_sample, optimal_split, sample_tempered_at_time

COLUMNS = ("t", "alpha", "ell", "method", "run_time", "iterations", "observations",
           "ratio", "precompute_time", "error")


@dataclass
class BenchConfig:
    model: ModelSpec = field(default_factory=reference_model)
    t_values: tuple = (1.0, 2.0, 5.0, 10.0, 20.0)
    alphas: tuple = (0.5, 0.75, 0.95)
    ells: tuple = (0.5, 1.0, 5.0)
    observations: int = 1000
    repeats: int = 3
    seed: int = 0
    p: float = 1.0

    def __post_init__(self):
        for a in self.alphas:
            if not 0.0 < a < self.p:
                raise ValueError(f"alpha={a} violates alpha < p={self.p}")


def _best_time(fn, repeats):
    best, result = math.inf, None
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def run_cell(spec, t, observations, repeats, seed):
    """Two rows (rejection, inversion) for one (spec, t) cell."""
    rows = []
    base = dict(t=t, alpha=spec.alpha, ell=getattr(spec.tempering, "ell", ""))
    try:
        plan = optimal_split(t, spec.eta)
        start = time.perf_counter()
        grids = cached_grid_pair(spec, plan.dt)
        pre_rej = time.perf_counter() - start
        rej_time, batch = _best_time(
            lambda: sample_tempered_at_time(spec, t, observations, seed, grids, plan), repeats)

        ct = tempered_exponent(spec)
        start = time.perf_counter()
        grid = build_grid(ct, t, verify=False)
        pre_inv = time.perf_counter() - start
        inv_time, inv = _best_time(lambda: inversion_sample(ct, t, observations, seed, grid), repeats)
        ratio = rej_time / inv_time if inv_time > 0 else math.inf
        rows.append(dict(base, method="rejection", run_time=rej_time,
                         iterations=batch.proposals_used, observations=batch.accepted,
                         ratio=ratio, precompute_time=pre_rej, error=""))
        rows.append(dict(base, method="inversion", run_time=inv_time, iterations=inv.accepted,
                         observations=inv.accepted, ratio=ratio, precompute_time=pre_inv, error=""))
    except Exception as exc:  # a failing cell is recorded, the sweep continues
        for method in ("rejection", "inversion"):
            rows.append(dict(base, method=method, run_time=math.nan, iterations=0, observations=0,
                             ratio=math.nan, precompute_time=math.nan,
                             error=f"{type(exc).__name__}: {exc}"))
    return rows


def t_sweep(config):
    rows = []
    for t in config.t_values:
        rows.extend(run_cell(config.model, float(t), config.observations, config.repeats, config.seed))
    return rows


def alpha_ell_sweep(config, t=1.0):
    rows = []
    for a in config.alphas:
        for ell in config.ells:
            spec = ModelSpec.build(PowerLawRosinski(a, config.p, ell))
            rows.extend(run_cell(spec, t, config.observations, config.repeats, config.seed))
    return rows


def write_rows(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in COLUMNS})
    return path


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


def ratios_by_t(rows):
    return [r["ratio"] for r in rows if r["method"] == "rejection"]
