"""Random generation: stable proposals, rejection sampling and the big-jump process.

Proposal stream contract (part of the reproducibility guarantee): every batch
of m proposals draws, in this order, m uniforms V on (-pi/2, pi/2) and m unit
exponentials W for the Chambers-Mallows-Stuck transform, then m uniforms U
for the accept/reject test.  Batch sizes depend only on (n, eta, t), so the
generic rejection sampler and the Tweedie shortcut see identical (Y, U) pairs.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import interpolate

from . import rng as rngmod
from .charfn import cms_bridge, stable_exponent, tempered_exponent
from .density import grid_pair, pdf
from .errors import DivergentEta, RatioAboveOne, UnsupportedAlpha
from .model import DIRECTIONS, TweedieExp, big_jump_measure

RATIO_SLACK = 1e-6
MAX_BATCH = 1 << 20


@dataclass(frozen=True)
class RejectionPlan:
    """Split of [0, t] into n_splits pieces of length dt = t / n_splits."""

    t_total: float
    n_splits: int
    eta: float

    @property
    def dt(self):
        return self.t_total / self.n_splits

    @property
    def expected_iterations(self):
        return self.n_splits * math.exp(self.eta * self.dt)


@dataclass(frozen=True)
class SampleBatch:
    seed: int
    values: np.ndarray
    proposals_used: int
    accepted: int

    def __post_init__(self):
        if self.accepted != len(self.values) or self.proposals_used < self.accepted:
            raise ValueError("inconsistent SampleBatch counts")


def optimal_split(t, eta):
    """Integer n near t eta minimizing the expected proposal count n exp(t eta / n)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if eta == 0.0:
        return RejectionPlan(float(t), 1, 0.0)
    x = t * eta
    candidates = sorted({max(1, math.floor(x)), max(1, math.ceil(x))})
    best = min(candidates, key=lambda n: (n * math.exp(x / n), n))
    return RejectionPlan(float(t), int(best), float(eta))


# --------------------------------------------------------------------------
# stable proposals
# --------------------------------------------------------------------------


def cms(alpha, beta, V, W):
    """Standard S1 stable variates (scale 1, location 0) from V ~ U(-pi/2, pi/2), W ~ Exp(1)."""
    if alpha == 1.0:
        if beta != 0.0:
            raise UnsupportedAlpha("alpha = 1 with beta != 0 is not supported")
        return np.tan(V)
    tan = math.tan(math.pi * alpha / 2.0)
    B = math.atan(beta * tan) / alpha
    S = (1.0 + beta * beta * tan * tan) ** (1.0 / (2.0 * alpha))
    arg = alpha * (V + B)
    return (S * np.sin(arg) / np.cos(V) ** (1.0 / alpha)
            * (np.cos(V - arg) / W) ** ((1.0 - alpha) / alpha))


def _proposal_batch(gen, params, t, m):
    a, beta, gamma, delta = cms_bridge(params, t)
    V = gen.uniform(-math.pi / 2.0, math.pi / 2.0, m)
    W = gen.standard_exponential(m)
    U = gen.random(m)
    Y = gamma * cms(a, beta, V, W) + delta
    if params.is_one_sided:
        # the CMS output is nonnegative in exact arithmetic
        Y = np.maximum(Y, delta)
    return Y, U


def sample_stable(params, t, n, rng):
    """n draws from mu^t by the Chambers-Mallows-Stuck method."""
    gen = rngmod.make_rng(rng)
    a, beta, gamma, delta = cms_bridge(params, t)
    V = gen.uniform(-math.pi / 2.0, math.pi / 2.0, n)
    W = gen.standard_exponential(n)
    Y = gamma * cms(a, beta, V, W) + delta
    if params.is_one_sided:
        Y = np.maximum(Y, delta)
    return SampleBatch(rngmod.seed_of(rng), Y, int(n), int(n))


# --------------------------------------------------------------------------
# acceptance ratio
# --------------------------------------------------------------------------


class AcceptanceRatio:
    """r(y) = exp(-eta t) f~_t(y) / f_t(y), the rejection acceptance probability.

    With a grid pair, log r is a cubic spline over the nodes where both
    densities are resolved.  Outside that range log r moves by
    log q(|y - c|) - log q(|edge - c|), which is exact for exponential
    tempering and asymptotically exact for power-law tempering.  Without grids
    each call makes two point-query inversions.
    """

    def __init__(self, spec, t, grids=None, floor=1e-9):
        self.spec = spec
        self.t = float(t)
        self.log_scale = -spec.eta * self.t
        self.trivial = spec.eta == 0.0
        self.grids = grids
        if self.trivial:
            return
        if grids is None:
            self._c = stable_exponent(spec.stable)
            self._ct = tempered_exponent(spec)
            return
        g_st, g_te = grids
        if not np.array_equal(g_st.x_grid, g_te.x_grid):
            raise ValueError("grid pair must share nodes")
        f, ft = g_st.pdf_values, g_te.pdf_values
        ok = (f > floor * f.max()) & (ft > floor * ft.max())
        idx = np.nonzero(ok)[0]
        i0, i1 = idx[0], idx[-1]
        if not ok[i0:i1 + 1].all():
            raise ValueError("resolved region of the grid pair is not contiguous")
        self.center = g_st.center
        self.scale = g_st.scale
        x = g_st.x_grid[i0:i1 + 1]
        lr = np.log(ft[i0:i1 + 1]) - np.log(f[i0:i1 + 1]) + self.log_scale
        self.x_lo, self.x_hi = x[0], x[-1]
        self.lr_lo, self.lr_hi = lr[0], lr[-1]
        self.spline = interpolate.CubicSpline(g_st.u_of(x), lr)
        d = self.spline.derivative()
        # d lr / dx = d lr / du * du / dx
        self.slope_lo = d(g_st.u_of(self.x_lo)) / math.hypot(self.scale, self.x_lo - self.center)
        self.slope_hi = d(g_st.u_of(self.x_hi)) / math.hypot(self.scale, self.x_hi - self.center)

    def _log_q(self, y, xi):
        q = self.spec.tempering.q(np.abs(y), xi)
        with np.errstate(divide="ignore"):
            return np.log(q)

    def _outside(self, y, edge, lr_edge, slope):
        side = 1 if edge - self.center > 0 else -1
        if np.all(np.sign(y - self.center) == side) and edge != self.center:
            lq = self._log_q(y - self.center, side)
            lq_edge = self._log_q(np.array([edge - self.center]), side)[0]
            if np.isfinite(lq_edge):
                return lr_edge + lq - lq_edge
        return lr_edge + slope * (y - edge)

    def log_ratio(self, y):
        y = np.asarray(y, dtype=float)
        if self.trivial:
            return np.zeros(y.shape)
        if self.grids is None:
            f = pdf(self._c, self.t, y)
            ft = pdf(self._ct, self.t, y)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(ft > 0, np.log(ft) - np.log(f), -np.inf) + self.log_scale
            return np.asarray(out)
        out = np.empty(y.shape)
        mid = (y >= self.x_lo) & (y <= self.x_hi)
        if mid.any():
            out[mid] = self.spline(np.arcsinh((y[mid] - self.center) / self.scale))
        lo = y < self.x_lo
        if lo.any():
            out[lo] = self._outside(y[lo], self.x_lo, self.lr_lo, self.slope_lo)
        hi = y > self.x_hi
        if hi.any():
            out[hi] = self._outside(y[hi], self.x_hi, self.lr_hi, self.slope_hi)
        return out

    def __call__(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        r = np.exp(self.log_ratio(y))
        bad = r > 1.0 + RATIO_SLACK
        if bad.any():
            i = int(np.argmax(r))
            raise RatioAboveOne(f"acceptance ratio {r[i]:.9g} at y={y[i]:.9g} exceeds 1",
                                x=float(y[i]), ratio=float(r[i]))
        return r


def tweedie_ratio(spec, t):
    """exp(-c (y - b t)): the exact acceptance probability for exponential tempering."""
    c = spec.tempering.c
    shift = spec.stable.b * t

    def ratio(y):
        return np.exp(-c * (np.asarray(y, dtype=float) - shift))

    return ratio


_GRID_CACHE = {}


def cached_grid_pair(spec, t, n_points=2049):
    """Grid pair for (spec, t), built once per process."""
    key = (spec.spec_hash(), float(t), int(n_points))
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = grid_pair(spec, t, n_points)
    return _GRID_CACHE[key]


def make_ratio(spec, t, grids=None):
    """AcceptanceRatio with grids resolved: None builds (cached) grids, False uses point queries."""
    if spec.eta == 0.0:
        return AcceptanceRatio(spec, t)
    if grids is None:
        grids = cached_grid_pair(spec, t)
    return AcceptanceRatio(spec, t, grids or None)


# --------------------------------------------------------------------------
# rejection sampling
# --------------------------------------------------------------------------


def _batch_size(remaining, eta, t):
    expected = remaining * math.exp(eta * t)
    return int(min(MAX_BATCH, math.ceil(1.1 * expected) + 16))


def rejection_decisions(spec, t, m, rng, ratio):
    """Exactly m proposals: returns (Y, U, accepted mask) in stream order."""
    gen = rngmod.make_rng(rng)
    Ys, Us, As = [], [], []
    done = 0
    while done < m:
        k = min(MAX_BATCH, m - done)
        Y, U = _proposal_batch(gen, spec.stable, t, k)
        Ys.append(Y)
        Us.append(U)
        As.append(U <= ratio(Y))
        done += k
    if not Ys:
        return np.empty(0), np.empty(0), np.empty(0, dtype=bool)
    return np.concatenate(Ys), np.concatenate(Us), np.concatenate(As)


def _run_rejection(spec, t, n, rng, ratio):
    gen = rngmod.make_rng(rng)
    kept = []
    got = 0
    used = 0
    while got < n:
        m = _batch_size(n - got, spec.eta, t)
        Y, U = _proposal_batch(gen, spec.stable, t, m)
        acc = U <= ratio(Y)
        pos = np.nonzero(acc)[0]
        need = n - got
        if pos.size >= need:
            last = pos[need - 1]
            kept.append(Y[pos[:need]])
            used += int(last) + 1
            got = n
        else:
            kept.append(Y[pos])
            used += m
            got += pos.size
    values = np.concatenate(kept) if kept else np.empty(0)
    return SampleBatch(rngmod.seed_of(rng), values, used, int(n))


def rejection_sample_tempered(spec, t, n, rng, grids=None):
    """n draws from mu~^t by rejection from mu^t proposals.

    ``grids`` is a (stable, tempered) DensityGrid pair at time t.  ``None``
    builds one (cached per process); ``False`` evaluates densities by point
    quadrature instead.  ``proposals_used`` counts proposals up to and including
    the n-th acceptance.
    """
    if not math.isfinite(spec.eta):
        raise DivergentEta("rejection sampling needs a finite eta")
    return _run_rejection(spec, t, n, rng, make_ratio(spec, t, grids))


def tweedie_rejection(spec, t, n, rng):
    """Tweedie shortcut: accept a stable proposal Y with probability exp(-c (Y - b t))."""
    if not isinstance(spec.tempering, TweedieExp):
        raise ValueError("tweedie_rejection needs a TweedieExp model")
    return _run_rejection(spec, t, n, rng, tweedie_ratio(spec, t))


def sample_tempered_at_time(spec, t, n, rng, grids=None, plan=None):
    """n draws from mu~^t as sums of n_splits rejection-sampled increments at dt = t / n_splits."""
    plan = plan or optimal_split(t, spec.eta)
    k = plan.n_splits
    ratio = make_ratio(spec, plan.dt, grids)
    inc = _run_rejection(spec, plan.dt, n * k, rng, ratio)
    values = inc.values.reshape(n, k).sum(axis=1) if k > 1 else inc.values
    return SampleBatch(inc.seed, values, inc.proposals_used, int(n))


def sample_path(spec, dt, n_steps, rng, grids=None, return_batch=False):
    """Partial sums X~_{k dt}, k = 1..n_steps, of iid rejection-sampled increments."""
    if n_steps == 0:
        empty = np.empty(0)
        return (empty, SampleBatch(rngmod.seed_of(rng), empty, 0, 0)) if return_batch else empty
    batch = rejection_sample_tempered(spec, dt, n_steps, rng, grids)
    path = np.cumsum(batch.values)
    return (path, batch) if return_batch else path


def parallel_rejection(spec, t, n, seed, n_streams=4, threads=1, grids=None, plan=None):
    """n draws of mu~^t split across ``n_streams`` substreams.

    Each stream runs the split sampler of ``sample_tempered_at_time``; ``grids``
    (if given) must be tabulated at ``plan.dt``.  Output is concatenated in
    stream order, so it does not depend on ``threads``.
    """
    plan = plan or optimal_split(t, spec.eta)
    k = plan.n_splits
    ratio = make_ratio(spec, plan.dt, grids)
    counts = [n // n_streams + (1 if i < n % n_streams else 0) for i in range(n_streams)]
    gens = rngmod.substreams(seed, n_streams)

    def work(i):
        inc = _run_rejection(spec, plan.dt, counts[i] * k, gens[i], ratio)
        return inc.values.reshape(counts[i], k).sum(axis=1), inc.proposals_used

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(n_streams)))
    else:
        parts = [work(i) for i in range(n_streams)]
    values = np.concatenate([v for v, _ in parts])
    return SampleBatch(int(seed), values, sum(u for _, u in parts), int(n))


# --------------------------------------------------------------------------
# compound Poisson big jumps
# --------------------------------------------------------------------------


class JumpSampler:
    """Inverse-cdf sampler for the normalized big-jump law rho_1.

    Each direction's radial density is tabulated on a 4096-point log grid and
    treated as a power law inside every cell, so both the cell masses and the
    within-cell inverse are closed form.  Mass below the first and above the
    last node is carried by power-law end cells.
    """

    def __init__(self, spec, n_nodes=4096, r_lo=1e-30, r_hi=1e30):
        if not math.isfinite(spec.eta):
            raise DivergentEta("big-jump measure has infinite mass")
        self.spec = spec
        self.eta = spec.eta
        rho = big_jump_measure(spec)
        self.rho = rho
        self.tables = {}
        masses = {}
        for xi in DIRECTIONS:
            if rho.sigma(xi) == 0.0 or rho.mass(xi) == 0.0:
                continue
            table = self._table(rho, xi, n_nodes, r_lo, r_hi)
            self.tables[xi] = table
            masses[xi] = table["total"]
        total = sum(masses.values())
        self.p_plus = masses.get(1, 0.0) / total if total > 0 else 0.0

    @staticmethod
    def _table(rho, xi, n_nodes, r_lo, r_hi):
        r = np.geomspace(r_lo, r_hi, n_nodes)
        g = rho.density(r, xi)
        lg = np.log(np.maximum(g, 1e-300))
        lr = np.log(r)
        k = np.diff(lg) / np.diff(lr)
        ratio = r[1:] / r[:-1]
        kp1 = k + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            cell = np.where(np.abs(kp1) > 1e-12,
                            g[:-1] * r[:-1] * (ratio**kp1 - 1.0) / kp1,
                            g[:-1] * r[:-1] * np.log(ratio))
        cell = np.where(g[:-1] > 0, cell, 0.0)
        # end cells: g ~ g0 (r/r0)^k0 below r0, ~ gN (r/rN)^kN above rN
        k0, kn = k[0], k[-1]
        low = g[0] * r[0] / (k0 + 1.0) if k0 > -1.0 else 0.0
        high = -g[-1] * r[-1] / (kn + 1.0) if kn < -1.0 else 0.0
        cum = np.concatenate([[0.0, low], low + np.cumsum(cell)])
        total = cum[-1] + high
        return dict(r=r, g=g, k=k, cum=cum, total=total, low=low, high=high, k0=k0, kn=kn)

    def _radius(self, table, u):
        """Invert the tabulated cdf at probabilities u (relative to the direction mass)."""
        m = u * table["total"]
        r, g, k, cum = table["r"], table["g"], table["k"], table["cum"]
        out = np.empty(m.shape)
        low, high = table["low"], table["high"]
        below = m < low
        if below.any():
            kp1 = table["k0"] + 1.0
            out[below] = r[0] * (m[below] / low) ** (1.0 / kp1)
        above = m >= cum[-1]
        if above.any():
            kp1 = table["kn"] + 1.0
            rest = np.maximum(table["total"] - m[above], 1e-300)
            out[above] = r[-1] * (rest / high) ** (1.0 / kp1)
        mid = ~(below | above)
        if mid.any():
            mm = m[mid]
            j = np.clip(np.searchsorted(cum, mm, side="right") - 2, 0, len(r) - 2)
            extra = mm - cum[j + 1]
            kp1 = k[j] + 1.0
            base = g[j] * r[j]
            with np.errstate(divide="ignore", invalid="ignore"):
                pw = r[j] * (1.0 + extra * kp1 / base) ** (1.0 / kp1)
                lg = r[j] * np.exp(extra / base)
            out[mid] = np.where(np.abs(kp1) > 1e-12, pw, lg)
        return out

    def sample(self, n, gen):
        """n iid jumps from rho_1; direction first, then radius."""
        if n == 0:
            return np.empty(0)
        d = gen.random(n)
        u = gen.random(n)
        signs = np.where(d < self.p_plus, 1.0, -1.0)
        out = np.empty(n)
        for xi in DIRECTIONS:
            sel = signs == xi
            if sel.any():
                out[sel] = xi * self._radius(self.tables[xi], u[sel])
        return out


@dataclass(frozen=True)
class CompoundPoissonDraw:
    n_jumps: int
    jumps: np.ndarray
    times: np.ndarray

    @property
    def total(self):
        return float(self.jumps.sum())

    def __iter__(self):
        return iter((self.n_jumps, self.jumps))


def compound_poisson_sample(spec, t, rng, jump_sampler=None):
    """One path of the big-jump process on [0, t]: N ~ Poisson(eta t), jumps iid rho_1."""
    gen = rngmod.make_rng(rng)
    if spec.eta == 0.0:
        return CompoundPoissonDraw(0, np.empty(0), np.empty(0))
    js = jump_sampler or JumpSampler(spec)
    n = int(gen.poisson(spec.eta * t))
    times = np.sort(gen.uniform(0.0, t, n))
    return CompoundPoissonDraw(n, js.sample(n, gen), times)


def compound_poisson_batch(spec, t, n, rng, jump_sampler=None):
    """(counts, totals) for n independent copies of V_t."""
    gen = rngmod.make_rng(rng)
    if spec.eta == 0.0:
        return np.zeros(n, dtype=int), np.zeros(n)
    js = jump_sampler or JumpSampler(spec)
    counts = gen.poisson(spec.eta * t, n)
    jumps = js.sample(int(counts.sum()), gen)
    owner = np.repeat(np.arange(n), counts)
    totals = np.bincount(owner, weights=jumps, minlength=n)
    return counts, totals


@dataclass(frozen=True)
class RecomposeResult:
    statistic: float
    critical_1pct: float
    zero_jump_fraction: float
    n: int


def recompose_check(spec, t, n, rng, grids=None, stable_cdf=None):
    """KS distance between X~_t + V_t (independent) and the stable law mu^t.

    Stream 0 drives the rejection sampler and stream 1 the big-jump process.
    ``stable_cdf`` defaults to a grid-interpolated inversion of mu^t.
    """
    from .density import build_grid
    from .stats import ks_statistic

    seed = rngmod.seed_of(rng) if not isinstance(rng, np.random.Generator) else int(rng.integers(2**63))
    g0, g1 = rngmod.substreams(seed, 2)
    xt = rejection_sample_tempered(spec, t, n, g0, grids).values
    counts, totals = compound_poisson_batch(spec, t, n, g1)
    if stable_cdf is None:
        stable_cdf = build_grid(stable_exponent(spec.stable), t, verify=False).cdf
    ks = ks_statistic(xt + totals, stable_cdf)
    return RecomposeResult(ks.statistic, ks.critical_1pct, float(np.mean(counts == 0)), int(n))


def inversion_sample(exponent, t, n, rng, grid):
    """n draws by applying the grid quantile function to uniforms."""
    gen = rngmod.make_rng(rng)
    u = gen.random(n)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    values = grid.quantile(u) if n else np.empty(0)
    return SampleBatch(rngmod.seed_of(rng), np.atleast_1d(values), int(n), int(n))
