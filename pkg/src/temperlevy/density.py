"""Densities, distribution functions and quantiles by Fourier inversion.

Point queries integrate the inversion formulas with QUADPACK's
Chebyshev-moment routine for cos/sin weights.  Grids are filled in one pass
by composite Gauss-Legendre quadrature in z written as a matrix product, with
x split into blocks by magnitude so that each block only pays for the
oscillation it actually sees.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import interpolate, optimize, special

from . import quadrature
from .errors import BracketFailure, QuadratureFailure

NEGATIVE_PDF_TOLERANCE = 1e-12
_CHUNK_ELEMENTS = 2_000_000


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------


def _shift(exponent, t):
    return exponent.factor * exponent.drift * t


def _centered_phi(exponent, t):
    """phi(z)^t with the drift factored out, so the law is inverted at x - shift."""
    shift = _shift(exponent, t)

    def phi(z):
        z = np.asarray(z, dtype=float)
        return np.exp(t * exponent(z) - 1j * shift * z)

    return phi, shift


def bulk_scale(exponent, t):
    """1 / z* where t |Re C(z*)| = 1; the width of the central part of the law."""
    def g(v):
        return t * exponent(np.array([math.exp(v)]))[0].real + 1.0

    lo, hi = -40.0, 40.0
    if g(lo) <= 0 or g(hi) >= 0:
        return 1.0
    return math.exp(-optimize.brentq(g, lo, hi, xtol=1e-6))


# --------------------------------------------------------------------------
# point queries
# --------------------------------------------------------------------------


def _pdf_point(phi, z_max, y, symmetric):
    def re(z):
        return phi(np.array([z]))[0].real

    def im(z):
        return phi(np.array([z]))[0].imag

    if abs(y) * z_max < 1e-8:
        val = quadrature.adaptive(re, 0.0, z_max, epsabs=1e-13, epsrel=1e-11, what="pdf")[0]
    else:
        val = quadrature.oscillatory(re, 0.0, z_max, y, "cos", what="pdf")[0]
        if not symmetric:
            val += quadrature.oscillatory(im, 0.0, z_max, y, "sin", what="pdf")[0]
    return val / math.pi


def _cdf_point(phi, z_max, y, symmetric):
    def inner(z):
        p = phi(np.array([z]))[0]
        return (math.sin(z * y) * p.real - math.cos(z * y) * p.imag) / z

    if symmetric and y == 0.0:
        return 0.5
    z1 = z_max if y == 0.0 else min(z_max, 1.0 / abs(y))
    val = quadrature.adaptive(inner, 0.0, z1, epsabs=1e-13, epsrel=1e-11, what="cdf")[0]
    if z1 < z_max:
        val += quadrature.oscillatory(lambda z: phi(np.array([z]))[0].real / z,
                                      z1, z_max, y, "sin", what="cdf")[0]
        if not symmetric:
            val -= quadrature.oscillatory(lambda z: phi(np.array([z]))[0].imag / z,
                                          z1, z_max, y, "cos", what="cdf")[0]
    return 0.5 + val / math.pi


def pdf(exponent, t, x):
    """Density of the law with exponent ``exponent`` at time t, at x (scalar or array).

    Accuracy target is 1e-8 absolute.  Raises IntegrabilityUnverified when
    |phi|^t cannot be shown to decay.
    """
    z_max = exponent.cutoff(t)
    phi, shift = _centered_phi(exponent, t)
    lower = exponent.lower_support(t)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for i, xv in enumerate(xs.flat):
        if xv < lower:
            out.flat[i] = 0.0
            continue
        out.flat[i] = _pdf_point(phi, z_max, xv - shift, exponent.is_real_symmetric)
    out = _clamp_pdf(out)
    return out if np.ndim(x) else float(out[0])


def cdf(exponent, t, x):
    """Distribution function at x (scalar or array), clamped to [0, 1]."""
    z_max = exponent.cutoff(t)
    phi, shift = _centered_phi(exponent, t)
    lower = exponent.lower_support(t)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for i, xv in enumerate(xs.flat):
        if xv <= lower:
            out.flat[i] = 0.0
            continue
        out.flat[i] = _cdf_point(phi, z_max, xv - shift, exponent.is_real_symmetric)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(x) else float(out[0])


def quantile(exponent, t, u, grid=None, tol=1e-10):
    """Solve cdf(x) = u; uses ``grid`` when supplied, otherwise point queries."""
    if grid is not None:
        return grid.quantile(u)
    u = float(u)
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1)")
    shift = _shift(exponent, t)
    scale = bulk_scale(exponent, t)
    lower = exponent.lower_support(t)
    lo, hi = shift - scale, shift + scale
    if math.isfinite(lower):
        lo = lower
    f_lo, f_hi = cdf(exponent, t, lo), cdf(exponent, t, hi)
    for _ in range(80):
        if f_lo <= u <= f_hi:
            break
        if f_lo > u:
            lo = shift - 4.0 * (shift - lo)
            f_lo = cdf(exponent, t, lo)
        if f_hi < u:
            hi = shift + 4.0 * (hi - shift)
            f_hi = cdf(exponent, t, hi)
    else:
        raise BracketFailure(f"could not bracket u={u}")
    return optimize.brentq(lambda v: cdf(exponent, t, v) - u, lo, hi, xtol=1e-13, rtol=tol)


def _clamp_pdf(values):
    if np.any(values < -NEGATIVE_PDF_TOLERANCE):
        worst = float(values.min())
        raise QuadratureFailure("density quadrature returned a negative value", {"min": worst})
    return np.maximum(values, 0.0)


# --------------------------------------------------------------------------
# batch evaluation
# --------------------------------------------------------------------------


def batch_pdf_cdf(exponent, t, x, z_max=None, want_cdf=True, order=10):
    """pdf and cdf at many points by composite Gauss-Legendre inversion.

    Points are grouped by |x - shift| in doubling blocks; each block uses panels
    no wider than half an oscillation period for its largest |x|.
    """
    if z_max is None:
        z_max = exponent.cutoff(t)
    exponent = exponent.tabulated(z_max)
    phi, shift = _centered_phi(exponent, t)
    symmetric = exponent.is_real_symmetric
    xs = np.asarray(x, dtype=float)
    y = xs.ravel() - shift
    ay = np.abs(y)
    f = np.empty(y.shape)
    F = np.empty(y.shape)
    x0 = 64.0 * math.pi / z_max
    edges = [0.0, x0]
    while edges[-1] < ay.max(initial=0.0):
        edges.append(edges[-1] * 2.0)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = np.nonzero((ay >= lo) & (ay <= hi) if lo == 0.0 else (ay > lo) & (ay <= hi))[0]
        if sel.size == 0:
            continue
        z, w = quadrature.fourier_nodes(z_max, max(hi, 1e-300), order=order)
        p = phi(z)
        wr, wi = w * p.real, w * p.imag
        rows = max(1, _CHUNK_ELEMENTS // z.size)
        for k in range(0, sel.size, rows):
            idx = sel[k:k + rows]
            arg = np.outer(y[idx], z)
            c, s = np.cos(arg), np.sin(arg)
            f[idx] = c @ wr if symmetric else c @ wr + s @ wi
            if want_cdf:
                F[idx] = s @ (wr / z) if symmetric else s @ (wr / z) - c @ (wi / z)
    f = _clamp_pdf(f / math.pi).reshape(xs.shape)
    F = np.clip(0.5 + F / math.pi, 0.0, 1.0).reshape(xs.shape)
    lower = exponent.lower_support(t)
    if math.isfinite(lower):
        below = xs <= lower
        f[below] = 0.0
        F[below] = 0.0
    return f, F


# --------------------------------------------------------------------------
# tails
# --------------------------------------------------------------------------


def upper_gamma(a, x):
    """Upper incomplete gamma Gamma(a, x) for x > 0 and any real a."""
    if a > 0:
        return special.gammaincc(a, x) * special.gamma(a)
    # Gamma(a, x) = (Gamma(a + 1, x) - x^a e^(-x)) / a, stepping a up past 0
    if a == 0.0:
        return special.exp1(x)
    k = int(math.ceil(-a))
    top = a + k
    val = special.exp1(x) if top == 0.0 else special.gammaincc(top, x) * special.gamma(top)
    for j in range(k, 0, -1):
        aj = a + j - 1
        val = (val - x**aj * math.exp(-x)) / aj
    return val


@dataclass(frozen=True)
class Tail:
    """Density tail f(edge) (y/d)^(-power) exp(-rate (y - d)), y = |x - center|.

    The shape is fitted to the Levy density at d, 2d and 4d, which the density
    tail follows asymptotically.  ``survival`` is the grid probability beyond
    the edge, used to keep the cdf continuous.
    """

    edge: float
    distance: float
    f_edge: float
    power: float
    rate: float
    survival: float

    def _mass_from(self, y):
        # int_y^inf (s/d)^(-p) exp(-rate (s - d)) ds, relative to f_edge
        d, p, lam = self.distance, self.power, self.rate
        if lam == 0.0:
            return d * (y / d) ** (1.0 - p) / (p - 1.0)
        x = lam * y
        return d**p * math.exp(lam * d) * lam ** (p - 1.0) * upper_gamma(1.0 - p, x)

    @property
    def mass(self):
        return self.f_edge * self._mass_from(self.distance)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        d = self.distance
        return self.f_edge * (y / d) ** (-self.power) * np.exp(-self.rate * (y - d))

    def survival_at(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.rate == 0.0:
            ratio = (y / self.distance) ** (1.0 - self.power)
        else:
            m0 = self._mass_from(self.distance)
            ratio = np.array([self._mass_from(v) / m0 for v in y])
        return self.survival * ratio

    def inverse_survival(self, s):
        """Distance y beyond the edge at which survival_at(y) = s."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        d = self.distance
        if self.rate == 0.0:
            return d * (self.survival / s) ** (1.0 / (self.power - 1.0))
        out = np.empty(s.shape)
        for i, sv in enumerate(s):
            hi = 2.0 * d
            while self.survival_at(hi)[0] > sv:
                hi *= 2.0
            out[i] = optimize.brentq(lambda v: self.survival_at(v)[0] - sv, d, hi, rtol=1e-12)
        return out

    def to_dict(self):
        return dict(edge=self.edge, distance=self.distance, f_edge=self.f_edge,
                    power=self.power, rate=self.rate, survival=self.survival)


def fit_tail(exponent, center, edge, f_edge, survival, side):
    """Tail beyond ``edge``: exponential rate from the Levy density, power from the mass.

    The rate comes from the Levy density at d, 2d and 4d (zero for power-law
    tails).  The power is then chosen so the tail integrates to the grid's
    survival probability, which keeps pdf, cdf and total mass consistent even
    when the edge is short of the asymptotic regime.
    """
    d = abs(edge - center)
    if f_edge <= 0.0:
        return None
    nu = exponent.levy(side * d * np.array([1.0, 2.0, 4.0]))
    rate = 0.0
    if np.all(nu > 0):
        l1, l2, l4 = np.log(nu)
        rate = max(0.0, ((l2 - l4) - (l1 - l2)) / d)
        if rate * d < 0.1:
            # curvature this small is pre-asymptotic power-law bending, not an exponential
            rate = 0.0
    if rate == 0.0:
        power = 1.0 + f_edge * d / survival if survival > 0 else 1.0 + 2.0 * exponent.alpha
        return Tail(float(edge), float(d), float(f_edge), float(power), 0.0, float(survival))
    probe = Tail(float(edge), float(d), float(f_edge), 0.0, float(rate), float(survival))
    if survival > 0:
        def excess(p):
            return Tail(probe.edge, d, f_edge, p, rate, survival).mass - survival

        lo, hi = -10.0, 20.0
        if excess(lo) > 0 > excess(hi):
            power = optimize.brentq(excess, lo, hi, xtol=1e-12)
        else:
            power = 1.0 + exponent.alpha
    else:
        power = 1.0 + exponent.alpha
    return Tail(float(edge), float(d), float(f_edge), float(power), float(rate), float(survival))


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Tabulated pdf/cdf of the law at time t on x = center + scale sinh(u)."""

    t: float
    x_grid: np.ndarray
    pdf_values: np.ndarray
    cdf_values: np.ndarray
    tail_params: dict
    tolerance: float
    center: float
    scale: float
    lower_support: float = -math.inf
    model_hash: str = ""
    label: str = ""
    _interp: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        u = self.u_of(self.x_grid)
        self._interp["u"] = u
        self._interp["pdf"] = interpolate.CubicSpline(u, self.pdf_values)
        self._interp["cdf"] = interpolate.PchipInterpolator(u, self.cdf_values)

    @property
    def x_range(self):
        return float(self.x_grid[0]), float(self.x_grid[-1])

    @property
    def right_tail(self):
        return self.tail_params.get("right")

    @property
    def left_tail(self):
        return self.tail_params.get("left")

    def u_of(self, x):
        return np.arcsinh((np.asarray(x, dtype=float) - self.center) / self.scale)

    def tail_mass(self):
        return sum(t.mass for t in (self.left_tail, self.right_tail) if t is not None)

    def total_mass(self):
        """Trapezoid integral of the grid pdf plus the analytic tail masses."""
        return float(np.trapezoid(self.pdf_values, self.x_grid)) + self.tail_mass()

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.atleast_1d(x)
        lo, hi = self.x_range
        out = np.zeros(xs.shape)
        inside = (xs >= lo) & (xs <= hi)
        out[inside] = np.maximum(self._interp["pdf"](self.u_of(xs[inside])), 0.0)
        right, left = self.right_tail, self.left_tail
        m = xs > hi
        if m.any() and right is not None:
            out[m] = right.density(xs[m] - self.center)
        m = xs < lo
        if m.any() and left is not None:
            out[m] = left.density(self.center - xs[m])
        out[xs < self.lower_support] = 0.0
        return out if x.ndim else float(out[0])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.atleast_1d(x)
        lo, hi = self.x_range
        out = np.empty(xs.shape)
        inside = (xs >= lo) & (xs <= hi)
        out[inside] = np.clip(self._interp["cdf"](self.u_of(xs[inside])), 0.0, 1.0)
        m = xs > hi
        if m.any():
            right = self.right_tail
            out[m] = 1.0 - right.survival_at(xs[m] - self.center) if right else 1.0
        m = xs < lo
        if m.any():
            left = self.left_tail
            out[m] = left.survival_at(self.center - xs[m]) if left else 0.0
        return out if x.ndim else float(out[0])

    def quantile(self, u):
        """Inverse of the interpolated cdf (vectorized), with tail inversion beyond the grid."""
        u = np.asarray(u, dtype=float)
        us = np.atleast_1d(u)
        if np.any((us <= 0.0) | (us >= 1.0)):
            raise ValueError("u must lie in (0, 1)")
        out = np.empty(us.shape)
        cv = self.cdf_values
        lo_mask = us < cv[0]
        hi_mask = us > cv[-1]
        mid = ~(lo_mask | hi_mask)
        if lo_mask.any():
            left = self.left_tail
            if left is None:
                out[lo_mask] = self.x_grid[0]
            else:
                out[lo_mask] = self.center - left.inverse_survival(us[lo_mask])
        if hi_mask.any():
            right = self.right_tail
            if right is None:
                out[hi_mask] = self.x_grid[-1]
            else:
                out[hi_mask] = self.center + right.inverse_survival(1.0 - us[hi_mask])
        if mid.any():
            out[mid] = self._invert_inside(us[mid])
        return out if u.ndim else float(out[0])

    def _invert_inside(self, target):
        ug = self._interp["u"]
        spline = self._interp["cdf"]
        cv = self.cdf_values
        j = np.clip(np.searchsorted(cv, target, side="right") - 1, 0, len(cv) - 2)
        a, b = ug[j].copy(), ug[j + 1].copy()
        # the interpolant is monotone on each cell, so bisection is safe
        for _ in range(52):
            m = 0.5 * (a + b)
            below = spline(m) < target
            a = np.where(below, m, a)
            b = np.where(below, b, m)
        return self.center + self.scale * np.sinh(0.5 * (a + b))

    # --- persistence --------------------------------------------------------

    def header(self):
        return {
            "model_hash": self.model_hash,
            "t": self.t,
            "x_range": list(self.x_range),
            "n_points": int(self.x_grid.size),
            "tolerance": self.tolerance,
            "center": self.center,
            "scale": self.scale,
            "lower_support": None if not math.isfinite(self.lower_support) else self.lower_support,
            "label": self.label,
            "tails": {k: v.to_dict() for k, v in self.tail_params.items() if v is not None},
        }

    def save(self, path):
        """Write ``path`` (float64 x, pdf, cdf columns) and ``path.json`` sidecar."""
        path = Path(path)
        np.stack([self.x_grid, self.pdf_values, self.cdf_values]).astype("<f8").tofile(path)
        Path(str(path) + ".json").write_text(json.dumps(self.header(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path, expected_hash=None):
        path = Path(path)
        head = json.loads(Path(str(path) + ".json").read_text())
        if expected_hash is not None and head["model_hash"] != expected_hash:
            raise ValueError("grid cache belongs to a different model")
        data = np.fromfile(path, dtype="<f8").reshape(3, head["n_points"])
        tails = {k: Tail(**v) for k, v in head["tails"].items()}
        lower = head["lower_support"]
        return cls(head["t"], data[0], data[1], data[2], tails, head["tolerance"],
                   head["center"], head["scale"], -math.inf if lower is None else lower,
                   head["model_hash"], head["label"])


def default_range(exponent, t, mass=1e-6, max_product=2.5e5):
    """(lo, hi) holding all but ``mass`` of the law, capped so (hi - lo) z_max stays bounded."""
    z_max = exponent.cutoff(t)
    shift = _shift(exponent, t)
    scale = bulk_scale(exponent, t)
    cap = max(max_product / z_max, 40.0 * scale)
    target = 0.5 * mass

    def reach(side):
        def beyond(d):
            v = cdf(exponent, t, shift + side * d)
            return 1.0 - v if side > 0 else v

        d = 10.0 * scale
        while beyond(d) > target:
            if d >= cap:
                return cap
            d = min(2.0 * d, cap)
        lo = d / 2.0
        for _ in range(12):
            mid = math.sqrt(lo * d)
            if beyond(mid) > target:
                lo = mid
            else:
                d = mid
        return d

    hi = shift + reach(1)
    lower = exponent.lower_support(t)
    lo = lower if math.isfinite(lower) else shift - reach(-1)
    return lo, hi


def sinh_nodes(x_range, center, scale, n_points):
    lo, hi = x_range
    u = np.linspace(np.arcsinh((lo - center) / scale), np.arcsinh((hi - center) / scale), n_points)
    x = center + scale * np.sinh(u)
    x[0], x[-1] = lo, hi
    return x


def build_grid(exponent, t, x_range=None, n_points=2049, center=None, scale=None,
               model_hash="", verify=True):
    """Tabulate pdf and cdf at time t on a sinh-spaced grid.

    ``tolerance`` is the largest pdf difference against independent point
    queries at a handful of nodes (when ``verify``).
    """
    if n_points < 16:
        raise ValueError("n_points must be at least 16")
    z_max = exponent.cutoff(t)
    if center is None:
        center = _shift(exponent, t)
    if scale is None:
        scale = bulk_scale(exponent, t)
    if x_range is None:
        x_range = default_range(exponent, t)
    x = sinh_nodes(x_range, center, scale, n_points)
    f, F = batch_pdf_cdf(exponent, t, x, z_max)
    F = np.maximum.accumulate(F)
    lower = exponent.lower_support(t)
    tolerance = 0.0
    if verify:
        probe_idx = np.unique(np.linspace(0, n_points - 1, 7).round().astype(int))
        probe_idx = probe_idx[x[probe_idx] > lower]
        if probe_idx.size:
            tolerance = float(np.max(np.abs(pdf(exponent, t, x[probe_idx]) - f[probe_idx])))
    tails = {
        "right": fit_tail(exponent, center, x[-1], f[-1], 1.0 - F[-1], 1),
        "left": None if math.isfinite(lower) else fit_tail(exponent, center, x[0], f[0], F[0], -1),
    }
    return DensityGrid(float(t), x, f, F, tails, tolerance, float(center), float(scale),
                       lower, model_hash, exponent.label)


def grid_pair(spec, t, n_points=2049, x_range=None, verify=True):
    """Stable and tempered grids at time t on one shared set of nodes."""
    from .charfn import stable_exponent, tempered_exponent

    c_st = stable_exponent(spec.stable)
    c_te = tempered_exponent(spec)
    center = _shift(c_st, t)
    scale = bulk_scale(c_st, t)
    if x_range is None:
        x_range = default_range(c_te, t)
    h = spec.spec_hash() if _serializable(spec) else ""
    g_st = build_grid(c_st, t, x_range, n_points, center, scale, h, verify)
    g_te = build_grid(c_te, t, x_range, n_points, center, scale, h, verify)
    return g_st, g_te


def _serializable(spec):
    try:
        spec.to_dict()
    except ValueError:
        return False
    return True


def density_bound_check(spec, t, n_points=512, grids=None):
    """max over grid nodes of f~_t / (e^(t eta) f_t) - 1 (nonpositive when the bound holds)."""
    g_st, g_te = grids if grids is not None else grid_pair(spec, t, n_points)
    bound = math.exp(t * spec.eta) * g_st.pdf_values
    ok = bound > 0
    excess = g_te.pdf_values[ok] / bound[ok] - 1.0
    worst_zero = float(np.max(g_te.pdf_values[~ok], initial=0.0))
    return float(np.max(excess, initial=-1.0)), worst_zero
