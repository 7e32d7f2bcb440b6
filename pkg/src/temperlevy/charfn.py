"""Characteristic exponents C(z) = log E exp(i z X_1) of stable and tempered laws."""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import interpolate, special

from . import quadrature
from .errors import IntegrabilityUnverified, QuadratureFailure, UnsupportedAlpha
from .model import DIRECTIONS, PowerLawRosinski, TweedieExp, UserRadial, big_jump_measure

# |phi(z)|^t below exp(-CUTOFF_LEVEL) is treated as zero by the inversion code
CUTOFF_LEVEL = 42.0


@dataclass(frozen=True)
class Exponent:
    """A characteristic exponent plus the metadata needed to invert it.

    ``func`` maps a real array z to complex C(z).  ``levy_density`` maps signed
    x to the Levy density, which fixes the power-law or exponential shape of
    the density tails.  ``base`` (optional) is a cheap exponent that differs
    from ``func`` by a smooth bounded term; it enables tabulation.
    """

    func: Callable
    alpha: float
    is_real_symmetric: bool
    levy_density: Callable
    drift: float = 0.0
    one_sided: bool = False
    label: str = "exponent"
    base: Optional["Exponent"] = field(default=None, repr=False)
    factor: float = 1.0
    cheap: bool = True

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return self.factor * np.asarray(self.func(z), dtype=complex)

    def scaled(self, k):
        """Exponent of the law at time k (k C(z))."""
        k = float(k)
        base = self.base.scaled(k) if self.base is not None else None
        return replace(self, factor=self.factor * k, base=base)

    def levy(self, x):
        return self.factor * self.levy_density(np.asarray(x, dtype=float))

    def lower_support(self, t=1.0):
        """Left end of the support of the law at time t (-inf unless one-sided)."""
        return self.factor * self.drift * t if self.one_sided else -math.inf

    def cutoff(self, t=1.0, level=CUTOFF_LEVEL):
        """Smallest z (on a log grid) with t Re C(w) <= -level for all w >= z.

        Raises IntegrabilityUnverified if |phi|^t does not decay to that level
        before z = 1e15.
        """
        z = 1.0
        while t * self(np.array([z]))[0].real > -level:
            z *= 2.0
            if z > 1e15:
                raise IntegrabilityUnverified(f"{self.label}: |phi|^t does not decay")
        lo, hi = z / 2.0, z
        for _ in range(40):
            mid = math.sqrt(lo * hi)
            if t * self(np.array([mid]))[0].real > -level:
                lo = mid
            else:
                hi = mid
        checks = hi * np.array([1.5, 3.0, 10.0, 100.0])
        if np.any(t * self(checks).real > -level):
            raise IntegrabilityUnverified(f"{self.label}: Re C is not eventually decreasing")
        return hi

    def tabulated(self, z_max, n_nodes=1600):
        """Spline-backed copy accurate to about 1e-11 on 1e-9 <= |z| <= z_max (exact elsewhere)."""
        if self.cheap or self.base is None:
            return self
        base = self.base
        z_lo = 1e-9
        nodes = np.geomspace(z_lo, max(z_max, 1.0) * 1.01, n_nodes)
        diff = self(nodes) - base(nodes)
        v = np.log(nodes)
        spl_re = interpolate.CubicSpline(v, diff.real)
        spl_im = interpolate.CubicSpline(v, diff.imag)
        exact = self
        z_top = nodes[-1]

        def func(z):
            z = np.asarray(z, dtype=float)
            a = np.abs(z)
            out = np.asarray(base(z), dtype=complex).copy()
            small = a < z_lo
            mid = (a >= z_lo) & (a <= z_top)
            big = a > z_top
            if mid.any():
                va = np.log(a[mid])
                d = spl_re(va) + 1j * np.sign(z[mid]) * spl_im(va)
                out[mid] += d
            outside = small | big
            if outside.any():
                out[outside] = exact(z[outside])
            return out

        return replace(self, func=func, factor=1.0, base=None, cheap=True,
                       label=self.label + " (tabulated)")


# --------------------------------------------------------------------------
# stable
# --------------------------------------------------------------------------


@lru_cache(maxsize=64)
def stable_constant(alpha):
    """K(alpha) = int_0^inf (1 - cos u) u^(-1-alpha) du, by quadrature.

    The quadrature value is cross-checked against Gamma(1-alpha) cos(pi alpha/2)
    / alpha (pi/2 at alpha = 1) and must agree to 1e-9 relative.
    """
    a = float(alpha)
    numeric = -quadrature.radial_fourier(lambda u: u ** (-1.0 - a), 1.0, "cos", what="K(alpha)")
    analytic = math.pi / 2.0 if a == 1.0 else math.gamma(1.0 - a) * math.cos(math.pi * a / 2.0) / a
    if abs(numeric - analytic) > 1e-9 * abs(analytic):
        raise QuadratureFailure("K(alpha) quadrature disagrees with closed form",
                                {"numeric": numeric, "analytic": analytic})
    return numeric


def stable_exponent(params):
    """C(z) = -(s+ + s-) K |z|^a (1 - i beta tan(pi a/2) sign z) + i b z."""
    a = params.alpha
    if not 0.0 < a < 2.0:
        raise UnsupportedAlpha(f"alpha={a} outside (0, 2)")
    sym = params.sigma_plus == params.sigma_minus
    if a == 1.0 and not sym:
        raise UnsupportedAlpha("alpha = 1 with asymmetric sigma is not supported")
    k = stable_constant(a)
    total = params.total
    skew = 0.0 if sym else params.beta * math.tan(math.pi * a / 2.0)
    b = params.b
    sp, sm = params.sigma_plus, params.sigma_minus

    def func(z):
        az = np.abs(z) ** a
        return -total * k * az * (1.0 - 1j * skew * np.sign(z)) + 1j * b * z

    def levy(x):
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, sp, sm) * ax ** (-1.0 - a)

    return Exponent(func, a, sym and b == 0.0, levy, drift=b,
                    one_sided=params.is_one_sided, label=f"stable(alpha={a})")


def cms_bridge(params, t=1.0):
    """(alpha, beta, gamma, delta) of mu^t in the S1 form used by the CMS method.

    gamma^alpha = t (s+ + s-) K(alpha), beta = (s+ - s-)/(s+ + s-), delta = b t.
    """
    a = params.alpha
    gamma = (t * params.total * stable_constant(a)) ** (1.0 / a)
    return a, params.beta, gamma, params.b * t


def s1_exponent(alpha, beta, gamma, delta):
    """Exponent of the S1-parameterized stable law (alpha != 1)."""
    tan = math.tan(math.pi * alpha / 2.0)

    def func(z):
        z = np.asarray(z, dtype=float)
        return -(gamma * np.abs(z)) ** alpha * (1.0 - 1j * beta * tan * np.sign(z)) + 1j * delta * z

    return func


# --------------------------------------------------------------------------
# tempered
# --------------------------------------------------------------------------


def _tempered_levy(spec):
    t = spec.tempering
    a = spec.alpha
    sp, sm = spec.stable.sigma_plus, spec.stable.sigma_minus

    def levy(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        out = np.zeros(x.shape)
        for xi, s in ((1, sp), (-1, sm)):
            m = (np.sign(x) == xi) & (ax > 0)
            if s and m.any():
                out[m] = s * ax[m] ** (-1.0 - a) * t.q(ax[m], xi)
        return out

    return levy


def _tweedie_func(spec):
    t = spec.tempering
    a, c = t.alpha, t.c
    g = special.gamma(-a)
    b = spec.tilde_b

    def func(z):
        z = np.asarray(z, dtype=float)
        return t.a * g * ((c - 1j * z) ** a - c**a) + 1j * b * z

    return func


def _rosinski_p1_func(spec, h=0.2, v_lo=-60.0, v_hi=60.0):
    # Fubini over Q: each e^{-u r} slice contributes Gamma(-a)((u - iz)^a - u^a),
    # and the two symmetric directions keep only the real part.
    t = spec.tempering
    a = spec.alpha
    u, w = quadrature.log_trapezoid(v_lo, v_hi, h)
    wq = 2.0 * special.gamma(-a) * w * t.q_density(u)
    ua = u**a

    def func(z):
        z = np.asarray(z, dtype=float)
        flat = np.abs(z.ravel())
        out = np.empty(flat.shape)
        for lo in range(0, flat.size, 2048):
            zc = flat[lo:lo + 2048, None]
            re = np.hypot(u, zc) ** a * np.cos(a * np.arctan2(zc, u)) - ua
            out[lo:lo + 2048] = re @ wq
        return out.reshape(z.shape).astype(complex)

    return func


def _radial_quadrature_func(spec):
    t = spec.tempering
    a = spec.alpha
    sig = {1: spec.stable.sigma_plus, -1: spec.stable.sigma_minus}
    if a >= 1.0 and not spec.levy_symmetric:
        raise UnsupportedAlpha("alpha >= 1 is only supported for symmetric tempering")
    b = spec.tilde_b

    def one(z):
        if z == 0.0:
            return 0.0j
        total = 0.0j
        for xi in DIRECTIONS:
            if not sig[xi]:
                continue

            def g(r, xi=xi):
                return r ** (-1.0 - a) * float(t.q(np.array([r]), xi)[0])

            re = quadrature.radial_fourier(g, z, "cos", what="tempered exponent")
            im = 0.0
            if a < 1.0:
                im = xi * quadrature.radial_fourier(g, z, "sin", what="tempered exponent")
            elif not spec.levy_symmetric:
                raise UnsupportedAlpha("alpha >= 1 with asymmetric tempering")
            total += sig[xi] * (re + 1j * im)
        return total + 1j * b * z

    def func(z):
        z = np.asarray(z, dtype=float)
        return np.array([one(float(v)) for v in z.ravel()], dtype=complex).reshape(z.shape)

    return func


def tempered_exponent(spec, method="auto"):
    """Exponent of the tempered law mu~.

    method='auto' picks a closed form (Tweedie), the mixture-over-Q
    representation (power-law Rosinski family, p = 1), or direct radial
    quadrature (everything else).  method='quadrature' forces the radial route.
    """
    a = spec.alpha
    t = spec.tempering
    base = stable_exponent(spec.stable)
    if isinstance(t, UserRadial) and t.is_untempered:
        return replace(base, label="tempered(untempered)")
    if method == "auto" and isinstance(t, TweedieExp):
        func, cheap = _tweedie_func(spec), True
    elif method == "auto" and isinstance(t, PowerLawRosinski) and t.p == 1.0 and a < 1.0:
        func, cheap = _rosinski_p1_func(spec), False
    elif method in ("auto", "quadrature"):
        func, cheap = _radial_quadrature_func(spec), False
    else:
        raise ValueError(f"unknown method {method!r}")
    stable_base = replace(base, drift=spec.tilde_b) if spec.tilde_b != spec.stable.b else base
    return Exponent(func, a, spec.is_symmetric, _tempered_levy(spec), drift=spec.tilde_b,
                    one_sided=spec.stable.is_one_sided, label=f"tempered({t.family})",
                    base=stable_base, cheap=cheap)


def big_jump_exponent(spec, z):
    """rho^(z) = int (e^{izx} - 1) rho(dx) by oscillatory radial quadrature."""
    rho = big_jump_measure(spec)
    z = float(z)
    total = 0.0j
    for xi in DIRECTIONS:
        if rho.sigma(xi) == 0.0:
            continue

        def g(r, xi=xi):
            return float(rho.density(np.array([r]), xi)[0])

        re = quadrature.radial_fourier(g, z, "cos", what="big-jump exponent")
        im = quadrature.radial_fourier(g, z, "sin", what="big-jump exponent")
        total += re + 1j * xi * im
    return total


@dataclass(frozen=True)
class IdentityRow:
    z: float
    stable: complex
    tempered: complex
    big_jump: complex

    @property
    def defect(self):
        return abs(self.stable - self.tempered - self.big_jump)


def exponent_identity_rows(spec, z_probes):
    """Per-probe values of C, C~ and rho^ for the decomposition C = C~ + rho^."""
    c = stable_exponent(spec.stable)
    ct = tempered_exponent(spec)
    rows = []
    for z in z_probes:
        zz = np.array([float(z)])
        rows.append(IdentityRow(float(z), complex(c(zz)[0]), complex(ct(zz)[0]),
                                big_jump_exponent(spec, z)))
    return rows


def exponent_identity_check(spec, z_probes=(0.5, 1.0, 2.0, 5.0)):
    """max_z |C(z) - C~(z) - rho^(z)| over the probes."""
    return max((r.defect for r in exponent_identity_rows(spec, z_probes)), default=0.0)
