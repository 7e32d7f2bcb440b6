"""Parameter families for one-dimensional tempered stable laws.

A tempered stable law is described by a stable base (alpha, sigma(+1),
sigma(-1), drift b) and a radial tempering function q(r, xi) in [0, 1] that
multiplies the stable Levy density sigma(xi) r^(-1-alpha).  The removed part
sigma(xi) r^(-1-alpha) (1 - q(r, xi)) is the big-jump measure; its total mass
eta sets the acceptance rate exp(-eta t) of the rejection sampler.

Three tempering families are supported:

``TweedieExp``
    one-sided exponential tempering q(r) = exp(-c r) (classical tempered
    stable subordinator).
``PowerLawRosinski``
    symmetric p-tempered family whose Rosinski measure has density
    C (1 + |x|)^(-2 - alpha - ell).
``UserRadial``
    an arbitrary user-supplied q(r, xi) with explicit sigma masses.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from . import quadrature
from .errors import DivergentEta, DivergentSigma, QuadratureFailure

PROBE_GRID = np.logspace(-6, 6, 64)
DIRECTIONS = (1, -1)


@dataclass(frozen=True)
class StableParams:
    """Stable law S_alpha(sigma, b) on the real line.

    ``sigma_plus`` and ``sigma_minus`` are the masses sigma({+1}) and
    sigma({-1}) of the spectral measure, so the Levy density is
    sigma_plus r^(-1-alpha) on (0, inf) and sigma_minus |r|^(-1-alpha) on
    (-inf, 0). ``b`` is the shift under the h-function h_alpha (0 for alpha<1,
    1 for alpha>1), which for alpha < 1 is the true drift.
    """

    alpha: float
    sigma_plus: float
    sigma_minus: float
    b: float = 0.0

    @property
    def total(self):
        return self.sigma_plus + self.sigma_minus

    @property
    def beta(self):
        """Skewness in the usual (alpha, beta, gamma, delta) convention."""
        return (self.sigma_plus - self.sigma_minus) / self.total

    @property
    def is_symmetric(self):
        return self.sigma_plus == self.sigma_minus and self.b == 0.0

    @property
    def is_one_sided(self):
        return self.alpha < 1 and self.sigma_minus == 0.0 and self.sigma_plus > 0


@dataclass(frozen=True)
class RosinskiMeasure:
    """A finite measure on the real line given by atoms or by a density.

    ``atoms`` is a tuple of (location, weight) pairs.  ``density`` is an
    integrable callable; when ``total_mass`` is known analytically it is used
    instead of quadrature.
    """

    atoms: tuple = ()
    density: Optional[Callable] = None
    total_mass: Optional[float] = None

    def mass(self):
        if self.total_mass is not None:
            return self.total_mass
        total = sum(w for _, w in self.atoms)
        if self.density is not None:
            f = self.density
            for a, b in ((-math.inf, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, math.inf)):
                total += quadrature.adaptive(f, a, b, what="Rosinski mass")[0]
        return total


# --------------------------------------------------------------------------
# tempering families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TweedieExp:
    """One-sided exponential tempering: sigma({1}) = a, Q_1 = point mass at c."""

    a: float
    c: float
    alpha: float
    family = "tweedie"

    @property
    def p(self):
        return 1.0

    def sigma(self):
        return self.a, 0.0

    def rosinski_measure(self):
        return RosinskiMeasure(atoms=((1.0 / self.c, self.a * self.c**self.alpha),))

    def q(self, r, xi):
        r = np.asarray(r, dtype=float)
        if xi < 0:
            return np.ones_like(r)
        return np.exp(-self.c * r)

    def one_minus_q(self, r, xi):
        r = np.asarray(r, dtype=float)
        if xi < 0:
            return np.zeros_like(r)
        return -np.expm1(-self.c * r)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha, "a": self.a, "c": self.c}


@dataclass(frozen=True)
class PowerLawRosinski:
    """Symmetric p-tempered alpha-stable law with Rosinski density C (1+|x|)^(-2-alpha-ell).

    C = 0.5 (alpha + ell + 1) alpha / Gamma(1 - alpha/p), times ``scale``; with
    scale = 1 the big-jump mass eta equals 1.
    """

    alpha: float
    p: float = 1.0
    ell: float = 1.0
    scale: float = 1.0
    family = "power_law_rosinski"

    @property
    def constant(self):
        g = special.gamma(1.0 - self.alpha / self.p)
        return self.scale * 0.5 * (self.alpha + self.ell + 1.0) * self.alpha / g

    @property
    def tail_index(self):
        """Density tails decay like |x|^(-1 - tail_index)."""
        return 1.0 + self.alpha + self.ell

    def rosinski_density(self, x):
        x = np.asarray(x, dtype=float)
        return self.constant * (1.0 + np.abs(x)) ** (-2.0 - self.alpha - self.ell)

    def rosinski_measure(self):
        total = 2.0 * self.constant / (1.0 + self.alpha + self.ell)
        return RosinskiMeasure(density=lambda x: float(self.rosinski_density(x)), total_mass=total)

    def q_density(self, u):
        """Density of Q on (0, inf) (same on the negative half-line by symmetry).

        The map x -> x / |x|^(1 + 1/p) sends Q to R with weight |x|^(alpha/p).
        Inverting it on a half-line, y = u^(-1/p), dy = (1/p) u^(-1-1/p) du,
        gives q_Q(u) = R(u^(-1/p)) u^(-alpha/p) u^(-1-1/p) / p.  For p = 1 this
        is C u^ell (1 + u)^(-2 - alpha - ell).  Its total mass is sigma({+1}).
        """
        u = np.asarray(u, dtype=float)
        p, a = self.p, self.alpha
        if p == 1.0:
            return self.constant * u**self.ell * (1.0 + u) ** (-2.0 - a - self.ell)
        y = u ** (-1.0 / p)
        return self.rosinski_density(y) * u ** (-a / p - 1.0 - 1.0 / p) / p

    def sigma(self):
        s = self.constant * special.beta(self.alpha + 1.0, self.ell + 1.0)
        return s, s

    def _window(self, w_min, w_max):
        # log(u) range where u * q_Q(u) and the Laplace kernel are non-negligible
        p, a, ell = self.p, self.alpha, self.ell
        lo_pad = 45.0 * max(1.0, p / (1.0 + ell))
        hi_pad = 45.0 * max(1.0, p / (1.0 + a))
        v_small, v_big = -math.log(w_max), -math.log(w_min)
        return min(0.0, v_small) - lo_pad, max(0.0, v_big) + hi_pad

    def laplace(self, w, complement=False, h=None):
        """int e^{-u w} Q_1(du) / sigma (or 1 minus it) by trapezoid rule in log u."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        out = np.empty(w.shape)
        if w.size == 0:
            return out
        s = self.sigma()[0]
        if h is None:
            h = 0.2 * min(1.0, self.p)
        flat_w, flat_out = w.ravel(), out.ravel()
        order = np.argsort(flat_w)
        # chunks of similar magnitude share one node window
        for chunk in np.array_split(order, max(1, flat_w.size // 256)):
            wc = flat_w[chunk]
            positive = wc > 0
            vals = np.zeros(wc.shape) if complement else np.ones(wc.shape)
            if positive.any():
                wp = wc[positive]
                v_lo, v_hi = self._window(wp.min(), wp.max())
                u, weights = quadrature.log_trapezoid(v_lo, v_hi, h)
                wq = weights * self.q_density(u) / s
                prod = np.outer(wp, u)
                kern = -np.expm1(-prod) if complement else np.exp(-prod)
                vals[positive] = kern @ wq
            flat_out[chunk] = vals
        return out

    def q(self, r, xi):
        r = np.asarray(r, dtype=float)
        return self.laplace(r**self.p).reshape(r.shape)

    def one_minus_q(self, r, xi):
        r = np.asarray(r, dtype=float)
        return self.laplace(r**self.p, complement=True).reshape(r.shape)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha, "p": self.p,
                "ell": self.ell, "scale": self.scale}


_Q_NAMESPACE = {
    name: getattr(np, name)
    for name in ("exp", "expm1", "log", "log1p", "sqrt", "abs", "minimum", "maximum",
                 "where", "power", "tanh", "arctan", "sin", "cos", "pi", "inf")
}


def compile_q(expression):
    """Turn a numpy expression in ``r`` and ``xi`` into a q(r, xi) callable."""
    code = compile(expression, "<q expression>", "eval")

    def q(r, xi):
        r = np.asarray(r, dtype=float)
        value = eval(code, {"__builtins__": {}}, dict(_Q_NAMESPACE, r=r, xi=xi))
        return np.broadcast_to(np.asarray(value, dtype=float), r.shape).copy()

    return q


@dataclass(frozen=True)
class UserRadial:
    """User-supplied tempering function q(r, xi) with explicit spectral masses."""

    q_func: Callable = field(compare=False)
    alpha: float
    sigma_plus: float
    sigma_minus: float
    p: float = 1.0
    expression: Optional[str] = None
    family = "user_radial"

    @classmethod
    def from_expression(cls, expression, alpha, sigma_plus, sigma_minus, p=1.0):
        return cls(compile_q(expression), alpha, sigma_plus, sigma_minus, p, expression)

    @property
    def is_untempered(self):
        return self.expression is not None and self.expression.strip() in ("1", "1.0")

    def sigma(self):
        return self.sigma_plus, self.sigma_minus

    def q(self, r, xi):
        return np.asarray(self.q_func(np.asarray(r, dtype=float), xi), dtype=float)

    def one_minus_q(self, r, xi):
        return 1.0 - self.q(r, xi)

    def to_dict(self):
        if self.expression is None:
            raise ValueError("UserRadial built from a callable cannot be serialized")
        return {"family": self.family, "alpha": self.alpha, "p": self.p, "q": self.expression,
                "sigma_plus": self.sigma_plus, "sigma_minus": self.sigma_minus}


ROSINSKI_FAMILIES = (TweedieExp, PowerLawRosinski)


# --------------------------------------------------------------------------
# model spec
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Stable base law plus tempering.

    ``eta`` is cached at construction (``inf`` when the big-jump measure is
    not finite) and ``tilde_b`` is the drift of the tempered law.
    """

    stable: StableParams
    tempering: object
    eta: float
    tilde_b: float

    @classmethod
    def build(cls, tempering, b=0.0):
        sp, sm = tempering.sigma()
        stable = StableParams(tempering.alpha, float(sp), float(sm), float(b))
        spec = cls(stable, tempering, math.inf, float(b))
        try:
            e = eta(spec)
        except DivergentEta:
            e = math.inf
        return cls(stable, tempering, e, _tilde_b(spec) if math.isfinite(e) else float(b))

    @property
    def alpha(self):
        return self.stable.alpha

    @property
    def levy_symmetric(self):
        """True when the tempered Levy measure is invariant under x -> -x."""
        t = self.tempering
        if isinstance(t, PowerLawRosinski):
            return True
        if isinstance(t, UserRadial) and t.sigma_plus == t.sigma_minus:
            return t.expression is not None and "xi" not in t.expression
        return False

    @property
    def is_symmetric(self):
        """Symmetric law: symmetric Levy measure and zero drift."""
        return self.levy_symmetric and self.stable.b == 0.0

    def to_dict(self):
        d = dict(self.tempering.to_dict())
        d["b"] = self.stable.b
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        family = d.pop("family")
        b = float(d.pop("b", 0.0))
        if family == "power_law_rosinski":
            t = PowerLawRosinski(float(d["alpha"]), float(d.get("p", 1.0)),
                                 float(d.get("ell", 1.0)), float(d.get("scale", 1.0)))
        elif family == "tweedie":
            t = TweedieExp(float(d["a"]), float(d["c"]), float(d["alpha"]))
        elif family == "user_radial":
            t = UserRadial.from_expression(str(d.get("q", "1")), float(d["alpha"]),
                                           float(d.get("sigma_plus", 1.0)),
                                           float(d.get("sigma_minus", 1.0)), float(d.get("p", 1.0)))
        else:
            raise ValueError(f"unknown tempering family {family!r}")
        return cls.build(t, b)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def spec_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def reference_model(alpha=0.75, ell=1.0, p=1.0, scale=1.0):
    """Symmetric power-law model (alpha=.75, ell=1, eta=1) used as the default."""
    return ModelSpec.build(PowerLawRosinski(alpha, p, ell, scale))


# --------------------------------------------------------------------------
# measure-level operations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def validate(spec, probes=PROBE_GRID):
    """Check conditions B1 (0 <= q <= 1), B2 (finite eta), B3 (nonzero sigma) and parameter ranges; returns violations."""
    out = []
    t = spec.tempering
    a = spec.alpha
    if not 0.0 < a < 2.0:
        out.append(Violation("param", f"alpha={a} outside (0, 2)"))
    if isinstance(t, TweedieExp):
        if not 0.0 < a < 1.0:
            out.append(Violation("param", "Tweedie requires alpha in (0, 1)"))
        if t.a <= 0 or t.c <= 0:
            out.append(Violation("param", "Tweedie requires a > 0 and c > 0"))
    elif isinstance(t, PowerLawRosinski):
        if t.ell <= 0 or t.scale <= 0 or t.p <= 0:
            out.append(Violation("param", "power-law Rosinski requires ell, scale, p > 0"))
    sp, sm = spec.stable.sigma_plus, spec.stable.sigma_minus
    if a == 1.0 and sp != sm:
        out.append(Violation("param", "alpha = 1 with asymmetric sigma is not supported"))

    for xi in DIRECTIONS:
        try:
            qv = t.q(probes, xi)
        except Exception as exc:  # user callables can fail arbitrarily
            out.append(Violation("B1", f"q(r, {xi:+d}) raised {exc!r}"))
            continue
        bad = ~((qv >= 0.0) & (qv <= 1.0))
        if bad.any():
            r_bad = probes[bad][0]
            out.append(Violation("B1", f"q(r={r_bad:.3g}, xi={xi:+d}) = {qv[bad][0]:.6g} not in [0, 1]"))

    rosinski_divergent = isinstance(t, ROSINSKI_FAMILIES) and not 0.0 < a < t.p
    if rosinski_divergent:
        # the normalizing constant is undefined, so sigma carries no information
        pass
    elif not (np.isfinite(sp) and np.isfinite(sm)) or sp < 0 or sm < 0:
        out.append(Violation("B3", f"spectral masses must be nonnegative, got ({sp}, {sm})"))
    elif sp + sm <= 0:
        out.append(Violation("B3", "sigma is the zero measure"))

    try:
        eta(spec)
    except DivergentEta as exc:
        out.append(Violation("B2", str(exc)))
    return out


def eta(spec):
    """Total mass of the big-jump measure.

    Rosinski-form families use Gamma(1 - alpha/p) / alpha * R(R); user
    tempering functions are integrated directly.
    """
    t = spec.tempering
    a = spec.alpha
    if isinstance(t, ROSINSKI_FAMILIES):
        if not 0.0 < a < t.p:
            raise DivergentEta(f"eta is infinite: need 0 < alpha < p, got alpha={a}, p={t.p}")
        mass = t.rosinski_measure().mass()
        if not math.isfinite(mass):
            raise DivergentEta("Rosinski measure is not finite")
        return math.gamma(1.0 - a / t.p) / a * mass
    return eta_quadrature(spec)


def eta_direction_quadrature(spec, xi):
    """int_0^inf r^(-1-alpha) (1 - q(r, xi)) dr, computed with u = r^p."""
    t = spec.tempering
    a = spec.alpha
    p = getattr(t, "p", 1.0)
    if isinstance(t, UserRadial) and t.is_untempered:
        return 0.0

    def g(w):
        return w ** (-1.0 - a / p) * float(t.one_minus_q(w ** (1.0 / p), xi)) / p

    _check_small_jump_limit(t, a, xi)
    try:
        inner = quadrature.adaptive(g, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, what="eta")[0]
        outer = quadrature.adaptive(g, 1.0, math.inf, epsabs=1e-13, epsrel=1e-11, what="eta")[0]
    except QuadratureFailure as exc:
        raise DivergentEta(f"eta quadrature failed in direction {xi:+d}: {exc}") from exc
    return inner + outer


def _check_small_jump_limit(t, a, xi):
    # r^-alpha (1 - q) ~ r^k near 0 must have k > 0, otherwise the integral diverges
    r = np.array([1e-6, 1e-12])
    m = r ** (-a) * np.abs(t.one_minus_q(r, xi))
    if not np.all(np.isfinite(m)):
        raise DivergentEta("1 - q is not finite near r = 0")
    if m[0] > 0 and (m[1] <= 0 or math.log(m[0] / m[1]) / math.log(1e6) < 1e-3):
        raise DivergentEta(f"q(r, {xi:+d}) does not tend to 1 fast enough as r -> 0")


def eta_quadrature(spec):
    """Direct double integral int sigma(dxi) int r^(-1-alpha)(1 - q) dr."""
    sig = {1: spec.stable.sigma_plus, -1: spec.stable.sigma_minus}
    total = 0.0
    for xi in DIRECTIONS:
        if sig[xi] != 0.0:
            total += sig[xi] * eta_direction_quadrature(spec, xi)
    return total


def sigma_from_rosinski(R, alpha):
    """Recover (sigma({+1}), sigma({-1})) as the |x|^alpha moments of R."""
    plus = sum(w * abs(x) ** alpha for x, w in R.atoms if x > 0)
    minus = sum(w * abs(x) ** alpha for x, w in R.atoms if x < 0)
    if R.density is not None:
        f = R.density

        def pos(x):
            return x**alpha * f(x)

        def neg(x):
            return x**alpha * f(-x)

        # x^(1+alpha) f(x) ~ x^-k at infinity needs k > 0 for a finite moment
        far = np.array([1e6, 1e12])
        for g in (pos, neg):
            m = np.array([x * g(x) for x in far])
            if m[1] > 0 and math.log(m[0] / m[1]) / math.log(1e6) < 1e-3:
                raise DivergentSigma(f"|x|^{alpha} moment of R diverges at infinity")
        try:
            for lo, hi in ((0.0, 1.0), (1.0, math.inf)):
                plus += quadrature.adaptive(pos, lo, hi, epsabs=1e-14, epsrel=1e-12, what="sigma")[0]
                minus += quadrature.adaptive(neg, lo, hi, epsabs=1e-14, epsrel=1e-12, what="sigma")[0]
        except QuadratureFailure as exc:
            raise DivergentSigma(f"|x|^{alpha} moment of R diverges: {exc}") from exc
    if not (math.isfinite(plus) and math.isfinite(minus)):
        raise DivergentSigma("|x|^alpha moment of R is infinite")
    return plus, minus


def q_radial(spec, r, xi):
    """Tempering function q(r, xi); vectorized over r."""
    return spec.tempering.q(r, xi)


def tilde_b_shift(spec):
    return spec.tilde_b - spec.stable.b


def _tilde_b(spec):
    # with h = 0 (alpha < 1) the shift integral vanishes, and for a symmetric
    # Levy measure the two directions cancel
    a = spec.alpha
    b = spec.stable.b
    if a < 1.0 or spec.levy_symmetric:
        return b
    t = spec.tempering
    shift = 0.0
    for xi, s in ((1, spec.stable.sigma_plus), (-1, spec.stable.sigma_minus)):
        if s == 0.0:
            continue

        def g(r, xi=xi):
            return r ** (-a) * float(t.one_minus_q(r, xi))

        val = (quadrature.adaptive(g, 0.0, 1.0, what="b~")[0]
               + quadrature.adaptive(g, 1.0, math.inf, what="b~")[0])
        shift += xi * s * val
    return b - shift


@dataclass(frozen=True)
class RadialDensity:
    """Per-direction unnormalized big-jump density sigma(xi) r^(-1-alpha)(1 - q(r, xi))."""

    alpha: float
    sigma_plus: float
    sigma_minus: float
    one_minus_q: Callable
    mass_plus: float
    mass_minus: float

    @property
    def total(self):
        return self.mass_plus + self.mass_minus

    def sigma(self, xi):
        return self.sigma_plus if xi > 0 else self.sigma_minus

    def mass(self, xi):
        return self.mass_plus if xi > 0 else self.mass_minus

    def density(self, r, xi):
        r = np.asarray(r, dtype=float)
        s = self.sigma(xi)
        if s == 0.0:
            return np.zeros_like(r)
        return s * r ** (-1.0 - self.alpha) * self.one_minus_q(r, xi)


def big_jump_measure(spec):
    """Radial description of rho(dx) = (1 - g(x)) L(dx), masses by direct quadrature."""
    if not math.isfinite(spec.eta):
        raise DivergentEta("big-jump measure has infinite mass")
    sp, sm = spec.stable.sigma_plus, spec.stable.sigma_minus
    mp = sp * eta_direction_quadrature(spec, 1) if sp else 0.0
    mm = sm * eta_direction_quadrature(spec, -1) if sm else 0.0
    return RadialDensity(spec.alpha, sp, sm, spec.tempering.one_minus_q, mp, mm)
