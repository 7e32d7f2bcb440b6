"""Validation statistics: kernel density estimates, smoothed true densities,
Kolmogorov-Smirnov distances and acceptance-count summaries."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from . import rng as rngmod
from .density import batch_pdf_cdf
from .errors import EmptySample

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KdeResult:
    bandwidth: float
    eval_grid: np.ndarray
    density_estimates: np.ndarray


def kde(sample, bandwidth, grid):
    """Gaussian-kernel density estimate of ``sample`` evaluated on ``grid``."""
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise EmptySample("kde of an empty sample")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    grid = np.asarray(grid, dtype=float)
    est = np.zeros(grid.shape)
    flat = est.ravel()
    g = grid.ravel()
    for lo in range(0, sample.size, 4096):
        s = sample[lo:lo + 4096]
        z = (g[:, None] - s[None, :]) / bandwidth
        flat += np.exp(-0.5 * z * z).sum(axis=1)
    est = flat.reshape(grid.shape) / (sample.size * bandwidth * SQRT_2PI)
    return KdeResult(float(bandwidth), grid, est)


def silverman_bandwidth(sample):
    """0.9 min(sd, IQR / 1.34) n^(-1/5)."""
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise EmptySample("bandwidth of an empty sample")
    sd = sample.std(ddof=1) if sample.size > 1 else 0.0
    q75, q25 = np.percentile(sample, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) or sd or 1.0
    return 0.9 * spread * sample.size ** (-0.2)


def smooth_pdf(exponent, t, bandwidth, grid):
    """True density convolved with a N(0, h^2) kernel, via the damped characteristic function.

    The Gaussian factor exp(-(h z)^2 / 2) is folded into the exponent before
    inversion.
    """
    h2 = float(bandwidth) ** 2
    z_max = exponent.cutoff(t)
    base = exponent.tabulated(z_max)

    def func(z):
        z = np.asarray(z, dtype=float)
        return base(z) - 0.5 * h2 * z * z / t

    damped = replace(base, func=func, factor=1.0, base=None, cheap=True,
                     one_sided=False, label=base.label + " (smoothed)")
    return batch_pdf_cdf(damped, t, np.asarray(grid, dtype=float), want_cdf=False)[0]


def smooth_pdf_convolution(density_grid, bandwidth, grid, nodes=400, width=12.0):
    """Same target as ``smooth_pdf`` but by Gauss-Legendre quadrature of f * K_h in x."""
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    h = float(bandwidth)
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.shape)
    off = width * h * gx
    kern = np.exp(-0.5 * (off / h) ** 2) / (h * SQRT_2PI) * gw * width * h
    for i, x in enumerate(grid.flat):
        out.flat[i] = kern @ density_grid.pdf(x - off)
    return out


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    critical_5pct: float
    critical_1pct: float

    @property
    def passes_1pct(self):
        return self.statistic < self.critical_1pct


def ks_critical(n, level):
    """Asymptotic one-sample critical value K^{-1}(1 - level) / sqrt(n)."""
    return special.kolmogi(level) / math.sqrt(n)


def ks_statistic(sample, cdf_callable):
    """One-sample Kolmogorov-Smirnov distance sup |F_n - F|."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise EmptySample("KS statistic of an empty sample")
    F = np.asarray(cdf_callable(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    return KsResult(float(d), n, ks_critical(n, 0.05), ks_critical(n, 0.01))


def ks_2samp(a, b):
    """Two-sample KS distance with asymptotic critical values for sizes (n, m)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySample("two-sample KS needs two nonempty samples")
    both = np.concatenate([a, b])
    fa = np.searchsorted(a, both, side="right") / a.size
    fb = np.searchsorted(b, both, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return KsResult(d, int(round(n_eff)), ks_critical(n_eff, 0.05), ks_critical(n_eff, 0.01))


@dataclass(frozen=True)
class AcceptanceSummary:
    counts: np.ndarray
    proposals: int
    p_accept: float

    @property
    def mean(self):
        return float(self.counts.mean()) if self.counts.size else 0.0

    @property
    def sd(self):
        return float(self.counts.std(ddof=1)) if self.counts.size > 1 else 0.0

    @property
    def min(self):
        return int(self.counts.min()) if self.counts.size else 0

    @property
    def max(self):
        return int(self.counts.max()) if self.counts.size else 0

    @property
    def binomial_mean(self):
        return self.proposals * self.p_accept

    @property
    def binomial_sd(self):
        return math.sqrt(self.proposals * self.p_accept * (1.0 - self.p_accept))

    def as_tuple(self):
        return self.mean, self.sd, self.min, self.max

    def to_dict(self):
        return dict(replications=int(self.counts.size), proposals=self.proposals,
                    mean=self.mean, sd=self.sd, min=self.min, max=self.max,
                    binomial_mean=self.binomial_mean, binomial_sd=self.binomial_sd)


def acceptance_summary(replications, proposals, spec, t, rng, grids=None):
    """Accepted-count distribution over repeated runs of ``proposals`` rejection trials."""
    from .sampler import make_ratio, rejection_decisions

    p = math.exp(-spec.eta * t)
    if proposals == 0 or replications == 0:
        return AcceptanceSummary(np.zeros(replications, dtype=int), int(proposals), p)
    gen = rngmod.make_rng(rng)
    ratio = make_ratio(spec, t, grids)
    counts = np.empty(replications, dtype=int)
    for i in range(replications):
        counts[i] = int(rejection_decisions(spec, t, proposals, gen, ratio)[2].sum())
    return AcceptanceSummary(counts, int(proposals), p)


@dataclass(frozen=True)
class KdeEnvelope:
    grid: np.ndarray
    smoothed: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    null_sup: np.ndarray

    @property
    def sup_threshold(self):
        """Mean plus three standard deviations of the null sup-deviations."""
        return float(self.null_sup.mean() + 3.0 * self.null_sup.std(ddof=1))

    def check(self, estimate):
        dev = float(np.max(np.abs(estimate - self.smoothed)))
        return dev, dev <= self.sup_threshold


def kde_envelope(draw, n, bandwidth, grid, smoothed, replications=100, rng=0):
    """Monte-Carlo spread of the KDE under the true law.

    ``draw(n, gen)`` must return n exact draws (inversion sampling is used in
    practice, so the envelope does not depend on the sampler under test).
    """
    gen = rngmod.make_rng(rng)
    ests = np.empty((replications, np.size(grid)))
    for i in range(replications):
        ests[i] = kde(draw(n, gen), bandwidth, grid).density_estimates
    lo, hi = np.percentile(ests, [2.5, 97.5], axis=0)
    sup = np.max(np.abs(ests - smoothed), axis=1)
    return KdeEnvelope(np.asarray(grid), np.asarray(smoothed), lo, hi, sup)
