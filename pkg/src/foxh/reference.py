"""Independent oracles for the classical functions the package must match.

Everything here is computed from defining series, elementary closed
forms, or adaptive quadrature of textbook integrands.  Nothing imports
the kernel-evaluation machinery, so agreement between these values and
the residue-series / contour paths is evidence, not tautology.

LT-type oracles (Kummer, Gauss, Mittag-Leffler families) follow the
convention value(x) = f(-x): the argument is the Laplace variable s and
the defining series is evaluated at -s.
"""

from __future__ import annotations

import math
import re
from math import fsum

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NoConvergenceError, UnknownFixtureError

SERIES_TOL = 1e-15
SERIES_CAP = 10_000

_EULER_GAMMA = 0.5772156649015328606


def _sum_series(term_iter, tol=SERIES_TOL, cap=SERIES_CAP):
    """Sum terms until three consecutive terms are below tol relative to
    the running sum; exact accumulation via fsum at the end."""
    terms = []
    small = 0
    running = 0.0
    for k, t in enumerate(term_iter):
        terms.append(t)
        running += t
        if abs(t) <= tol * max(1.0, abs(running)):
            small += 1
            if small >= 3:
                return fsum(terms)
        else:
            small = 0
        if k >= cap:
            raise NoConvergenceError(f"series did not settle in {cap} terms")
    return fsum(terms)


# -- elementary / closed forms ------------------------------------------------

def exp_density(x: float) -> float:
    return math.exp(-x)


def stretched_gamma_density(x: float, e: float, eta: float) -> float:
    """x^(e/eta) exp(-x^(1/eta)) / (eta Gamma(e+eta)) on (0, inf)."""
    return (
        x ** (e / eta)
        * math.exp(-(x ** (1.0 / eta)))
        / (eta * math.gamma(e + eta))
    )


def bessel_k_half_density(x: float) -> float:
    """4 K_{1/2}(2x) / (Gamma(1/4) Gamma(3/4)) reduced via the elementary
    K_{1/2}(z) = sqrt(pi/(2z)) e^{-z}: equals sqrt(2/pi) x^{-1/2} e^{-2x}."""
    return math.sqrt(2.0 / math.pi) * math.exp(-2.0 * x) / math.sqrt(x)


def bessel_k_density(x: float, nu: float) -> float:
    """4 K_nu(2x) / (Gamma((1-nu)/2) Gamma((1+nu)/2)) for |nu| < 1."""
    return (
        4.0 * special.kv(nu, 2.0 * x)
        / (math.gamma((1.0 - nu) / 2.0) * math.gamma((1.0 + nu) / 2.0))
    )


def beta_type_density(x: float, e: float, eta: float, b: float) -> float:
    """Power-stretched beta density: Gamma(e+eta+b)/Gamma(e+eta) *
    x^(e/eta) (1-x^(1/eta))^(b-1) / (eta Gamma(b)) on (0,1), 0 beyond."""
    if x >= 1.0:
        return 0.0
    u = x ** (1.0 / eta)
    return (
        math.gamma(e + eta + b) / math.gamma(e + eta)
        * x ** (e / eta) * (1.0 - u) ** (b - 1.0)
        / (eta * math.gamma(b))
    )


def log_form_density(x: float) -> float:
    """log((1 + sqrt(1-x))/sqrt(x)) on (0,1); integrates to 1."""
    if x >= 1.0:
        return 0.0
    return math.log((1.0 + math.sqrt(1.0 - x)) / math.sqrt(x))


def arccos_density(x: float) -> float:
    """(4/pi) arccos(sqrt(x)) on (0,1); the 4/pi factor normalizes
    integral arccos(sqrt x) dx = pi/4."""
    if x >= 1.0:
        return 0.0
    return 4.0 / math.pi * math.acos(math.sqrt(x))


def product_exp_exp_density(x: float) -> float:
    """Density of the product of two unit exponentials: 2 K_0(2 sqrt x)."""
    return 2.0 * special.k0(2.0 * math.sqrt(x))


# -- defining series ----------------------------------------------------------

def airy_ai(z: float) -> float:
    """Ai(z) from the two Maclaurin series Ai = c1 f - c2 g."""
    c1 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
    c2 = 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)
    z3 = z ** 3

    def f_terms():
        t = 1.0
        k = 0
        while True:
            yield t
            t *= 3.0 * (1.0 / 3.0 + k) * z3 / ((3 * k + 1) * (3 * k + 2) * (3 * k + 3))
            k += 1

    def g_terms():
        t = z
        k = 0
        while True:
            yield t
            t *= 3.0 * (2.0 / 3.0 + k) * z3 / ((3 * k + 2) * (3 * k + 3) * (3 * k + 4))
            k += 1

    return c1 * _sum_series(f_terms()) - c2 * _sum_series(g_terms())


def airy_density(x: float) -> float:
    """2 pi 3^(1/6) Ai((9x)^(1/3)) / Gamma(4/3) on (0, inf)."""
    z = (9.0 * x) ** (1.0 / 3.0)
    return 2.0 * math.pi * 3.0 ** (1.0 / 6.0) * airy_ai(z) / math.gamma(4.0 / 3.0)


def exp_integral_density(x: float) -> float:
    """E_1(x) = -Ei(-x) by the alternating series
    -euler_gamma - ln x - sum_k (-x)^k/(k k!); cancellation-limited, so
    the domain is capped where double precision still returns ~1e-12."""
    if x > 8.0:
        raise DomainError("series oracle for E_1 limited to x <= 8")

    def terms():
        yield -_EULER_GAMMA
        yield -math.log(x)
        t = 1.0
        for k in range(1, SERIES_CAP):
            t *= -x / k
            yield -t / k

    return _sum_series(terms())


def incomplete_gamma_upper(rho: float, x: float) -> float:
    """Gamma(rho, x) = int_x^inf w^(rho-1) e^-w dw by adaptive quadrature."""
    val, err = integrate.quad(
        lambda w: w ** (rho - 1.0) * math.exp(-w), x, np.inf,
        epsabs=1e-13, epsrel=1e-13, limit=200,
    )
    return val


def kummer_1f1(a: float, b: float, z: float) -> float:
    """1F1(a; b; z) by the defining series with term recurrence."""

    def terms():
        t = 1.0
        k = 0
        while True:
            yield t
            t *= (a + k) * z / ((b + k) * (k + 1))
            k += 1

    return _sum_series(terms())


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """2F1(a, b; c; z) for z < 1: defining series on [0, 1), Pfaff
    transform (1-z)^(-a) 2F1(a, c-b; c; z/(z-1)) for z < 0."""
    if z >= 1.0:
        raise DomainError("2F1 series oracle needs z < 1")
    if z < 0.0:
        w = z / (z - 1.0)
        return (1.0 - z) ** (-a) * gauss_2f1(a, c - b, c, w)

    def terms():
        t = 1.0
        k = 0
        while True:
            yield t
            t *= (a + k) * (b + k) * z / ((c + k) * (k + 1))
            k += 1

    return _sum_series(terms())


def mittag_leffler(beta: float, s: float) -> float:
    """E_beta(-s).  beta=1 is exp(-s); beta=1/2 is the scaled
    complementary error function erfcx(s); other beta use the defining
    series (adequate for moderate |s|)."""
    if beta == 1.0:
        return math.exp(-s)
    if beta == 0.5:
        return special.erfcx(s)
    if abs(s) > 5.0:
        raise DomainError("generic Mittag-Leffler series oracle needs |s| <= 5")

    def terms():
        for k in range(SERIES_CAP + 2):
            yield (-s) ** k / math.gamma(beta * k + 1.0)

    return _sum_series(terms())


def mittag_leffler3(a: float, b: float, c: float, s: float) -> float:
    """Three-parameter Mittag-Leffler E^c_{a,b}(-s) =
    sum_k (c)_k (-s)^k / (k! Gamma(a k + b))."""
    if abs(s) > 5.0:
        raise DomainError("three-parameter Mittag-Leffler oracle needs |s| <= 5")

    def terms():
        poch = 1.0
        power = 1.0
        for k in range(SERIES_CAP + 2):
            yield poch * power / math.gamma(a * k + b)
            poch *= (c + k) / (k + 1.0)
            power *= -s

    return _sum_series(terms())


def mwright(beta: float, x: float) -> float:
    """M-Wright M_beta(x) = sum_k (-x)^k / (k! Gamma(1 - beta - beta k));
    beta=1/2 uses the elementary exp(-x^2/4)/sqrt(pi)."""
    if beta == 0.5:
        return math.exp(-x * x / 4.0) / math.sqrt(math.pi)
    if x > 6.0:
        raise DomainError("M-Wright series oracle limited to x <= 6")

    def terms():
        fact = 1.0
        power = 1.0
        for k in range(SERIES_CAP + 2):
            yield power / fact * special.rgamma(1.0 - beta - beta * k)
            fact *= k + 1.0
            power *= -x

    return _sum_series(terms())


# -- named registry -----------------------------------------------------------

# base name -> (callable(x, **params), required param keys, domain check)
_FIXTURES = {
    "exp": (lambda x: exp_density(x), (), lambda x: x >= 0),
    "stretched_gamma": (
        lambda x, e, eta: stretched_gamma_density(x, e, eta),
        ("e", "eta"), lambda x: x > 0),
    "bessel_k_half": (lambda x: bessel_k_half_density(x), (), lambda x: x > 0),
    "airy": (lambda x: airy_density(x), (), lambda x: x > 0),
    "beta": (
        lambda x, e, eta, b: beta_type_density(x, e, eta, b),
        ("e", "eta", "b"), lambda x: x > 0),
    "log_form": (lambda x: log_form_density(x), (), lambda x: x > 0),
    "arccos": (lambda x: arccos_density(x), (), lambda x: x > 0),
    "product_exp_exp": (
        lambda x: product_exp_exp_density(x), (), lambda x: x > 0),
    "exp_integral": (lambda x: exp_integral_density(x), (), lambda x: x > 0),
    "incomplete_gamma": (
        lambda x, rho: incomplete_gamma_upper(rho, x), ("rho",),
        lambda x: x >= 0),
    "kummer_1f1": (
        lambda x, a, b: kummer_1f1(a, b, -x), ("a", "b"), lambda x: True),
    "gauss_2f1": (
        lambda x, a, b, c: gauss_2f1(a, b, c, -x), ("a", "b", "c"),
        lambda x: x > -1),
    "mittag_leffler": (
        lambda x, beta: mittag_leffler(beta, x), ("beta",), lambda x: True),
    "mittag_leffler3": (
        lambda x, a, b, c: mittag_leffler3(a, b, c, x), ("a", "b", "c"),
        lambda x: True),
    "mwright": (lambda x, beta: mwright(beta, x), ("beta",), lambda x: x >= 0),
}

# accepted spellings for parameter keys inside name[...]
_KEY_ALIASES = {
    "ρ": "rho", "β": "beta", "η": "eta", "α": "a",
    "γ": "c",
}

_NAME_RE = re.compile(r"^([a-z0-9_]+)(?:\[(.*)\])?$")


def parse_fixture_name(name: str):
    """Split 'base[k=v,...]' into (base, {k: float})."""
    m = _NAME_RE.match(name.strip())
    if not m:
        raise UnknownFixtureError(f"cannot parse fixture name {name!r}")
    base, params_text = m.group(1), m.group(2)
    params = {}
    if params_text:
        for item in params_text.split(","):
            key, _, val = item.partition("=")
            key = key.strip()
            key = _KEY_ALIASES.get(key, key)
            try:
                params[key] = float(val)
            except ValueError as exc:
                raise UnknownFixtureError(
                    f"bad parameter {item!r} in {name!r}") from exc
    return base, params


def reference_eval(name: str, x: float) -> float:
    """Evaluate a named classical fixture at x, independently of the
    Fox-H evaluation paths."""
    base, params = parse_fixture_name(name)
    if base not in _FIXTURES:
        raise UnknownFixtureError(f"unknown fixture {base!r}")
    fn, required, domain_ok = _FIXTURES[base]
    missing = [k for k in required if k not in params]
    if missing:
        raise UnknownFixtureError(
            f"fixture {base!r} missing parameters {missing}")
    extra = [k for k in params if k not in required]
    if extra:
        raise UnknownFixtureError(f"fixture {base!r} got unknown keys {extra}")
    if not domain_ok(x):
        raise DomainError(f"x={x} outside domain of fixture {base!r}")
    return fn(x, **params)
