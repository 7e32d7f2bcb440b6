"""Quadrature building blocks shared by the model, exponent and density code.

Two families live here:

* thin wrappers over QUADPACK (``scipy.integrate.quad``) that turn silent
  accuracy problems into :class:`QuadratureFailure`;
* fixed node/weight rules that can be evaluated for many integrands at once
  (log-spaced trapezoid for Laplace-type integrals on (0, inf), composite
  Gauss-Legendre panels for Fourier inversion).
"""

import math
import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure

EPSABS = 1e-10
EPSREL = 1e-8


def adaptive(f, a, b, epsabs=EPSABS, epsrel=EPSREL, limit=2000, points=None, what="integral"):
    """Gauss-Kronrod adaptive quadrature of ``f`` over [a, b].

    Raises QuadratureFailure when QUADPACK reports anything other than a clean
    exit; the QUADPACK error code and estimate are attached as diagnostics.
    """
    kwargs = dict(epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    if points is not None and math.isfinite(a) and math.isfinite(b):
        kwargs["points"] = points
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, **kwargs)
    value, abserr = out[0], out[1]
    ier = 0 if len(out) == 3 else 1
    if ier or not math.isfinite(value):
        if abserr <= max(epsabs, epsrel * abs(value)) * 10 and math.isfinite(value):
            return value, abserr
        raise QuadratureFailure(
            f"{what}: quadrature over [{a}, {b}] did not converge",
            {"value": value, "abserr": abserr, "message": out[-1] if ier else ""},
        )
    return value, abserr


def oscillatory(f, a, b, omega, kind, epsabs=1e-12, epsrel=1e-10, limit=5000, what="integral"):
    """Integrate ``f(x) * cos(omega x)`` (kind='cos') or ``* sin`` on [a, b].

    ``b`` may be ``inf``; QUADPACK then integrates cycle by cycle and
    extrapolates the resulting alternating series (QAWF).
    """
    if kind not in ("cos", "sin"):
        raise ValueError("kind must be 'cos' or 'sin'")
    kwargs = dict(weight=kind, wvar=omega, full_output=1)
    if math.isinf(b):
        kwargs["epsabs"] = epsabs
        kwargs["limlst"] = 200
    else:
        kwargs.update(epsabs=epsabs, epsrel=epsrel, limit=limit)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, **kwargs)
    value, abserr = out[0], out[1]
    ier = 0 if len(out) == 3 else 1
    if not math.isfinite(value) or (ier and abserr > max(epsabs, epsrel * abs(value)) * 100):
        raise QuadratureFailure(
            f"{what}: oscillatory quadrature over [{a}, {b}] failed (omega={omega})",
            {"value": value, "abserr": abserr},
        )
    return value, abserr


def log_trapezoid(v_lo, v_hi, h=0.2):
    """Nodes and weights for int_0^inf g(u) du after u = exp(v).

    The trapezoid rule in v converges geometrically for integrands analytic in a
    strip around the real v axis, which covers every Laplace-type integral used
    here.
    """
    v = np.arange(v_lo, v_hi + 0.5 * h, h)
    u = np.exp(v)
    return u, h * u


@lru_cache(maxsize=None)
def _legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_panels(edges, order=10):
    """Composite Gauss-Legendre rule on consecutive panels given by ``edges``."""
    edges = np.asarray(edges, dtype=float)
    gx, gw = _legendre(order)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (half[:, None] * (gx + 1.0) + a[:, None]).ravel()
    weights = (half[:, None] * gw).ravel()
    return nodes, weights


def fourier_nodes(z_max, x_max, order=10, levels=60):
    """Quadrature on [0, z_max] accurate for cos(z x) g(z) with |x| <= x_max.

    Panels have width at most pi / x_max (half a period of the fastest
    oscillation). The first panel is split geometrically toward 0 so that
    |z|^alpha type behaviour at the origin is resolved.
    """
    width = min(math.pi / x_max, z_max / 64.0)
    m = max(1, int(math.ceil((z_max - width) / width)))
    uniform = np.linspace(width, z_max, m + 1)
    graded = width * 0.5 ** np.arange(levels, 0, -1)
    edges = np.concatenate([[0.0], graded, uniform])
    return gauss_panels(edges, order)


def radial_fourier(g, z, kind, r_split=1.0, what="radial integral"):
    """Oscillatory radial integrals against a Levy-type radial density g.

    kind='cos' returns int_0^inf (cos(z r) - 1) g(r) dr,
    kind='sin' returns int_0^inf sin(z r) g(r) dr.

    g may be as singular as r^(-1-alpha) at 0 (alpha < 2 for 'cos', alpha < 1
    for 'sin') and must be integrable at infinity. The inner piece is done by
    plain adaptive quadrature on [0, r1] with r1 = min(r_split, pi/(2|z|)); the
    outer piece uses the cycle-by-cycle QAWF scheme with the constant term
    integrated separately.
    """
    z = float(z)
    if z == 0.0:
        return 0.0
    sign = 1.0
    if z < 0:
        z = -z
        sign = -1.0 if kind == "sin" else 1.0
    r1 = min(r_split, math.pi / (2.0 * z))
    if kind == "cos":
        inner = adaptive(lambda r: -2.0 * math.sin(0.5 * z * r) ** 2 * g(r), 0.0, r1,
                         epsabs=1e-13, epsrel=1e-11, what=what)[0]
        osc = oscillatory(g, r1, math.inf, z, "cos", epsabs=1e-13, what=what)[0]
        mass = _tail_mass(g, r1, what)
        return sign * (inner + osc - mass)
    inner = adaptive(lambda r: math.sin(z * r) * g(r), 0.0, r1,
                     epsabs=1e-13, epsrel=1e-11, what=what)[0]
    osc = oscillatory(g, r1, math.inf, z, "sin", epsabs=1e-13, what=what)[0]
    return sign * (inner + osc)


def _tail_mass(g, r1, what):
    total = 0.0
    if r1 < 1.0:
        total += adaptive(g, r1, 1.0, epsabs=1e-14, epsrel=1e-12, what=what)[0]
    total += adaptive(g, max(r1, 1.0), math.inf, epsabs=1e-14, epsrel=1e-12, what=what)[0]
    return total
