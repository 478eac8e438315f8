"""Evaluation paths for Fox-H kernels.

Three routes compute values, deliberately kept independent so they can
cross-check each other:

* ``eval_residue_series`` -- sum of residues over the left pole lattice;
  the primary path whenever the continuation theorem applies (delta > 0,
  a* > 0) and, inside the convergence radius, on the delta = 0 boundary.
* ``eval_mellin_barnes`` -- trapezoid quadrature of the vertical-contour
  integral; the oracle path, with truncation budgeted from the circle
  asymptotics.
* ``eval_wright_series`` -- the generalized Wright power series used by
  the Laplace-transform layer.

``circle_estimate`` and ``tail_behavior`` expose the asymptotic constants
themselves.
"""

from __future__ import annotations

import cmath
import math
import os
from dataclasses import dataclass
from math import fsum

import numpy as np

from .core import (SEPARATION_HORIZON, FoxHSpec, derive_params, poles,
                   validate_separation)
from .errors import (
    BadContourError,
    DivergentError,
    DomainError,
    MultiplePolesError,
    NoConvergenceError,
    SeriesDomainError,
    ShapeError,
    ThetaZeroError,
    TruncationError,
)
from .gammafn import log_gamma_complex, log_gamma_sign

TERM_CAP = 10_000
NODE_CAP = 2_000_000

_LOG_2PI = math.log(2.0 * math.pi)
_TINY = 1e-300


def _term_cap() -> int:
    env = os.environ.get("FOXH_MAX_TERMS")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return TERM_CAP


class EvalReport(float):
    """A float that carries its evaluation diagnostics.

    Instances behave as plain reals (the evaluated value) while exposing
    method, terms_used, nodes_used, tail_bound, imag_residual and
    peak_log for reporting.  peak_log is the log of the largest term
    magnitude a series summed; exp(peak_log) * eps estimates the
    cancellation noise floor of the result.
    """

    method: str
    terms_used: int
    nodes_used: int
    tail_bound: float
    imag_residual: float
    peak_log: float

    def __new__(cls, value, method, terms_used=0, nodes_used=0,
                tail_bound=0.0, imag_residual=0.0, peak_log=-math.inf):
        obj = super().__new__(cls, value)
        obj.method = method
        obj.terms_used = int(terms_used)
        obj.nodes_used = int(nodes_used)
        obj.tail_bound = float(tail_bound)
        obj.imag_residual = float(imag_residual)
        obj.peak_log = float(peak_log)
        return obj

    @property
    def value(self) -> float:
        return float(self)

    def __repr__(self):
        return (f"EvalReport({float(self)!r}, method={self.method!r}, "
                f"terms_used={self.terms_used}, nodes_used={self.nodes_used}, "
                f"tail_bound={self.tail_bound:.3e}, "
                f"imag_residual={self.imag_residual:.3e})")


# -- kernel -------------------------------------------------------------------

def kernel_log(spec: FoxHSpec, s):
    """Complex log of the gamma-ratio kernel at s (scalar or ndarray)."""
    s_arr = np.asarray(s, dtype=complex)
    total = np.zeros(s_arr.shape, dtype=complex)
    for pair in spec.lower_front:
        total = total + log_gamma_complex(pair.coeff + pair.scale * s_arr)
    for pair in spec.upper_front:
        total = total + log_gamma_complex(1.0 - pair.coeff - pair.scale * s_arr)
    for pair in spec.upper_back:
        total = total - log_gamma_complex(pair.coeff + pair.scale * s_arr)
    for pair in spec.lower_back:
        total = total - log_gamma_complex(1.0 - pair.coeff - pair.scale * s_arr)
    if np.ndim(s) == 0:
        return complex(total[()])
    return total


def kernel_log_sign(spec: FoxHSpec, s: float):
    """(log|kernel(s)|, sign) for real s, via one fsum over all factors.

    A pole in a numerator gamma yields (+inf, 0.0); a pole in a
    denominator gamma yields (-inf, 0.0) (the kernel value is zero).
    """
    logs = []
    sign = 1.0
    for pair in spec.lower_front:
        la, sg = log_gamma_sign(pair.coeff + pair.scale * s)
        if sg == 0.0:
            return math.inf, 0.0
        logs.append(la)
        sign *= sg
    for pair in spec.upper_front:
        la, sg = log_gamma_sign(1.0 - pair.coeff - pair.scale * s)
        if sg == 0.0:
            return math.inf, 0.0
        logs.append(la)
        sign *= sg
    for pair in spec.upper_back:
        la, sg = log_gamma_sign(pair.coeff + pair.scale * s)
        if sg == 0.0:
            return -math.inf, 0.0
        logs.append(-la)
        sign *= sg
    for pair in spec.lower_back:
        la, sg = log_gamma_sign(1.0 - pair.coeff - pair.scale * s)
        if sg == 0.0:
            return -math.inf, 0.0
        logs.append(-la)
        sign *= sg
    return fsum(logs), sign


# -- residue series -----------------------------------------------------------

def _residue_coefficient(spec: FoxHSpec, j: int, l: int):
    """Signed log-magnitude of the residue coefficient at the l-th pole of
    the j-th front gamma, excluding the x power.

    Returns (s_pole, log_mag, sign); sign 0.0 marks a term annihilated by
    a denominator pole.  A numerator pole means the pole lattice is not
    simple after all."""
    lf = spec.lower_front
    s_pole = (lf[j].coeff + l) / lf[j].scale
    logs = []
    sign = -1.0 if l % 2 else 1.0
    for k, pair in enumerate(lf):
        if k == j:
            continue
        la, sg = log_gamma_sign(pair.coeff - pair.scale * s_pole)
        if sg == 0.0:
            raise MultiplePolesError(
                "coincident front poles: residue weights are not simple",
                j=j, l=l, k=k)
        logs.append(la)
        sign *= sg
    for pair in spec.upper_front:
        la, sg = log_gamma_sign(1.0 - pair.coeff + pair.scale * s_pole)
        if sg == 0.0:
            raise MultiplePolesError(
                "front pole collides with an upper-front pole", j=j, l=l)
        logs.append(la)
        sign *= sg
    for pair in spec.upper_back:
        la, sg = log_gamma_sign(pair.coeff - pair.scale * s_pole)
        if sg == 0.0:
            return s_pole, -math.inf, 0.0
        logs.append(-la)
        sign *= sg
    for pair in spec.lower_back:
        la, sg = log_gamma_sign(1.0 - pair.coeff + pair.scale * s_pole)
        if sg == 0.0:
            return s_pole, -math.inf, 0.0
        logs.append(-la)
        sign *= sg
    logs.append(-log_gamma_sign(l + 1.0)[0])
    logs.append(-math.log(lf[j].scale))
    return s_pole, fsum(logs), sign


def eval_residue_series(spec: FoxHSpec, x: float, tol: float = 1e-12) -> EvalReport:
    """Sum the left-pole residue series of H at argument c*x.

    Valid for delta > 0 with a* > 0 (analytic continuation to all of
    (0, inf)); on the delta = 0 boundary the same series is the power
    series of H with convergence radius equal to the little-delta
    constant, so arguments inside that radius are accepted as well.
    """
    if not x > 0:
        raise DomainError("residue series requires x > 0")
    d = derive_params(spec)
    z = spec.c * x
    if d.delta_cap > 0 and d.a_star > 0:
        pass
    elif d.delta_cap == 0.0 and z < d.delta_small:
        pass
    else:
        raise SeriesDomainError(
            "residue series needs delta > 0 and a* > 0, or delta = 0 with "
            "the argument inside the convergence radius",
            delta=d.delta_cap, a_star=d.a_star, argument=z)
    if not poles(spec, SEPARATION_HORIZON, SEPARATION_HORIZON).simple:
        raise MultiplePolesError("front pole lattice is not simple")
    validate_separation(spec)

    m = spec.m
    log_z = math.log(z)
    cap = _term_cap()
    terms = []
    running = 0.0
    round_mags = []
    peak = -math.inf
    consecutive_small = 0
    l = 0
    while l * max(m, 1) < cap:
        round_mag = 0.0
        for j in range(m):
            s_pole, log_mag, sign = _residue_coefficient(spec, j, l)
            if sign == 0.0:
                continue
            term_log = log_mag + s_pole * log_z
            peak = max(peak, term_log)
            t = sign * math.exp(term_log)
            terms.append(t)
            running += t
            round_mag = max(round_mag, abs(t))
        round_mags.append(round_mag)
        if round_mag > 1e280:
            raise NoConvergenceError(
                "residue terms overflow before decaying", x=x, round=l)
        if l >= 8 and round_mag <= tol * max(abs(running), _TINY):
            consecutive_small += 1
            if consecutive_small >= 3:
                prev = round_mags[-2]
                ratio = round_mag / prev if prev > 0 else 0.0
                if round_mag == 0.0:
                    tail = 0.0
                elif ratio < 0.9:
                    tail = round_mag * ratio / (1.0 - ratio)
                else:
                    consecutive_small = 0
                    l += 1
                    continue
                if tail <= tol * max(abs(running), _TINY):
                    return EvalReport(
                        fsum(terms), "residue_series",
                        terms_used=len(terms), tail_bound=tail,
                        peak_log=peak)
        else:
            consecutive_small = 0
        l += 1
    raise NoConvergenceError(
        "residue series did not meet tolerance within the term cap",
        cap=cap, x=x)


# -- circle asymptotics and contour quadrature --------------------------------

@dataclass(frozen=True)
class CircleEstimate:
    """Constants of the kernel magnitude estimate on |s - gamma| = R."""
    upsilon1: float
    upsilon2: float
    upsilon3: float
    theta_cap: float
    c_const: float
    log_bound: float


def _log_c_const(spec: FoxHSpec, abs_z: float, gamma_abscissa: float) -> float:
    parts = [-gamma_abscissa * math.log(abs_z),
             (spec.m + spec.n - (spec.p + spec.q) / 2.0) * _LOG_2PI]
    for pair in spec.lower:
        parts.append(
            (pair.coeff + pair.scale * gamma_abscissa - 0.5) * math.log(pair.scale))
    for pair in spec.upper:
        parts.append(
            -(pair.coeff + pair.scale * gamma_abscissa - 0.5) * math.log(pair.scale))
    return fsum(parts)


def circle_estimate(spec: FoxHSpec, z: complex, gamma_abscissa: float,
                    theta: float, radius: float) -> CircleEstimate:
    """Assemble the magnitude estimate of |kernel(s) z^-s| at
    s = gamma + R e^(i theta)."""
    if z == 0:
        raise DomainError("circle estimate needs z != 0")
    theta = float(theta)
    if theta == 0.0 or abs(theta) >= math.pi:
        raise ThetaZeroError(
            "estimate is defined for theta in (-pi, pi) excluding 0",
            theta=theta)
    d = derive_params(spec)
    abs_z = abs(z)
    arg_z = cmath.phase(complex(z))
    theta_cap = (d.a1_star * theta
                 - d.a2_star * math.copysign(1.0, theta) * (abs(theta) - math.pi)
                 + arg_z)
    ups1 = math.cos(theta) * d.delta_cap
    ups2 = (math.cos(theta) * math.log(math.exp(d.delta_cap) * abs_z / d.delta_small)
            + math.sin(theta) * theta_cap)
    ups3 = d.mu + gamma_abscissa * d.delta_cap
    log_c = _log_c_const(spec, abs_z, gamma_abscissa)
    r = float(radius)
    log_bound = log_c + ups1 * r * math.log(r) - ups2 * r + ups3 * math.log(r)
    return CircleEstimate(
        upsilon1=ups1, upsilon2=ups2, upsilon3=ups3,
        theta_cap=theta_cap, c_const=math.exp(log_c), log_bound=log_bound)


def _contour_strip(spec: FoxHSpec):
    """(rightmost front b-pole, leftmost front a-pole); infinities when a
    side has no poles."""
    right_b = -math.inf
    for pair in spec.lower_front:
        right_b = max(right_b, -pair.coeff / pair.scale)
    left_a = math.inf
    for pair in spec.upper_front:
        left_a = min(left_a, (1.0 - pair.coeff) / pair.scale)
    return right_b, left_a


def default_abscissa(spec: FoxHSpec) -> float:
    """Midpoint of the pole-free vertical strip, with half-unit fallbacks
    when one side is empty."""
    right_b, left_a = _contour_strip(spec)
    if math.isinf(right_b) and math.isinf(left_a):
        return 0.0
    if math.isinf(left_a):
        return right_b + 0.5
    if math.isinf(right_b):
        return left_a - 0.5
    return (right_b + left_a) / 2.0


def _line_tail_bound(spec: FoxHSpec, abs_z: float, gamma_abscissa: float,
                     a_star: float, nu: float, t: float) -> float:
    """Upper estimate of the contour tail integral_T^inf of the kernel
    magnitude envelope C t^nu exp(-kappa t) (both half-lines)."""
    kappa = a_star * math.pi / 2.0
    log_c = _log_c_const(spec, abs_z, gamma_abscissa)
    log_main = log_c + nu * math.log(t) - kappa * t - math.log(kappa)
    factor = 1.0
    if nu > 0:
        if kappa * t <= 2.0 * nu:
            return math.inf
        factor = 1.0 / (1.0 - nu / (kappa * t))
    # two symmetric half-lines and the 1/(2 pi) prefactor
    return 2.0 * factor * math.exp(log_main) / (2.0 * math.pi)


def eval_mellin_barnes(spec: FoxHSpec, x: float, gamma_abscissa: float | None = None,
                       half_length: float | None = None, nodes: int | None = None,
                       tol: float = 1e-10) -> EvalReport:
    """Trapezoid quadrature of the vertical-contour integral at c*x.

    With half_length or nodes omitted, the truncation T is grown until
    the envelope tail is below tol/10 and the node count is doubled until
    two successive refinements agree within tol."""
    if not x > 0:
        raise DomainError("contour evaluation requires x > 0")
    d = derive_params(spec)
    if d.a_star <= 0:
        raise BadContourError(
            "vertical contour does not decay: a* <= 0", a_star=d.a_star)
    z = spec.c * x

    right_b, left_a = _contour_strip(spec)
    if right_b >= left_a:
        raise BadContourError(
            "no vertical line separates the pole families",
            right_b=right_b, left_a=left_a)
    if gamma_abscissa is None:
        gamma_abscissa = default_abscissa(spec)
    else:
        gamma_abscissa = float(gamma_abscissa)
        if gamma_abscissa <= right_b or gamma_abscissa >= left_a:
            raise BadContourError(
                "abscissa fails to separate the pole families",
                gamma_abscissa=gamma_abscissa, right_b=right_b, left_a=left_a)

    nu = d.mu + gamma_abscissa * d.delta_cap
    if half_length is None:
        t_half = max(4.0, 4.0 * (nu + 2.0) / d.a_star)
        tail = _line_tail_bound(spec, z, gamma_abscissa, d.a_star, nu, t_half)
        while tail > tol / 10.0:
            t_half *= 2.0
            tail = _line_tail_bound(spec, z, gamma_abscissa, d.a_star, nu, t_half)
            if t_half > 1e6:
                raise TruncationError(
                    "envelope tail does not reach tolerance at any "
                    "practical truncation", half_length=t_half, tail=tail)
    else:
        t_half = float(half_length)
        tail = _line_tail_bound(spec, z, gamma_abscissa, d.a_star, nu, t_half)
        if tail > tol:
            raise TruncationError(
                "envelope tail at the requested truncation exceeds the "
                "tolerance", half_length=t_half, tail=tail)

    log_zv = math.log(z)

    def quadrature(n: int) -> complex:
        t = np.linspace(-t_half, t_half, n)
        s = gamma_abscissa + 1j * t
        log_vals = kernel_log(spec, s) - s * log_zv
        shift = float(np.max(log_vals.real))
        vals = np.exp(log_vals - shift)
        w = np.full(n, t[1] - t[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        return complex(np.sum(w * vals)) * math.exp(shift) / (2.0 * math.pi)

    if nodes is not None:
        n = int(nodes)
        total = quadrature(n)
        return EvalReport(
            total.real, "mellin_barnes", nodes_used=n, tail_bound=tail,
            imag_residual=abs(total.imag) / max(1.0, abs(total.real)))

    # resolve the oscillation scale, then refine until stable
    freq = (1.0 + abs(d.delta_cap) * (1.0 + math.log1p(t_half))
            + abs(log_zv))
    n = 2 * int(t_half * freq) + 65
    total = quadrature(n)
    while True:
        if 2 * n - 1 > NODE_CAP:
            raise NoConvergenceError(
                "node cap reached before quadrature stabilized",
                nodes=n, cap=NODE_CAP)
        n = 2 * n - 1
        refined = quadrature(n)
        if abs(refined - total) <= tol * (1.0 + abs(refined)):
            total = refined
            break
        total = refined
    return EvalReport(
        total.real, "mellin_barnes", nodes_used=n, tail_bound=tail,
        imag_residual=abs(total.imag) / max(1.0, abs(total.real)))


# -- generalized Wright series ------------------------------------------------

def _pair_values(pairs):
    out = []
    for p in pairs:
        if isinstance(p, (tuple, list)):
            coeff, scale = float(p[0]), float(p[1])
        else:
            coeff, scale = p.coeff, p.scale
        if scale <= 0:
            raise DomainError("Wright series scales must be positive")
        out.append((coeff, scale))
    return out


def wright_delta(upper, lower) -> float:
    """Convergence index of the generalized Wright series: sum of lower
    scales minus sum of upper scales."""
    return fsum([s for _, s in _pair_values(lower)]
                + [-s for _, s in _pair_values(upper)])


def wright_radius(upper, lower) -> float:
    """Convergence radius of the series on the index = -1 boundary
    (prod of lower scale**scale over prod of upper scale**scale); the
    series is entire for index > -1 and has radius 0 below the boundary."""
    return math.exp(fsum(
        [s * math.log(s) for _, s in _pair_values(lower)]
        + [-s * math.log(s) for _, s in _pair_values(upper)]))


def eval_wright_series(upper, lower, z: float, tol: float = 1e-12) -> EvalReport:
    """Generalized Wright sum_k prod Gamma(A + alpha k) / prod
    Gamma(B + beta k) * z^k / k! for real z.

    Entire for convergence index > -1; on the index = -1 boundary the
    sum converges inside wright_radius (same latitude as the residue
    series on its delta = 0 boundary).
    """
    up = _pair_values(upper)
    lo = _pair_values(lower)

    def term_log(k: int):
        logs = [-log_gamma_sign(k + 1.0)[0]]
        sign = 1.0
        for coeff, scale in up:
            la, sg = log_gamma_sign(coeff + scale * k)
            if sg == 0.0:
                raise DomainError(
                    "upper Wright parameter hits a gamma pole", k=k,
                    coeff=coeff, scale=scale)
            logs.append(la)
            sign *= sg
        for coeff, scale in lo:
            la, sg = log_gamma_sign(coeff + scale * k)
            if sg == 0.0:
                return -math.inf, 0.0
            logs.append(-la)
            sign *= sg
        return fsum(logs), sign

    if z == 0.0:
        # The value at the origin is the k = 0 coefficient whatever the
        # convergence index.
        log0, sign0 = term_log(0)
        return EvalReport(sign0 * math.exp(log0), "wright_series",
                          terms_used=1, peak_log=log0)
    delta_psi = wright_delta(up, lo)
    if delta_psi < -1.0 or (delta_psi == -1.0
                            and abs(z) >= wright_radius(up, lo)):
        raise DivergentError(
            "Wright series diverges at this argument",
            delta_psi=delta_psi, z=z)

    log_abs_z = math.log(abs(z))
    z_sign = 1.0 if z > 0 else -1.0
    cap = _term_cap()
    terms = []
    running = 0.0
    peak = -math.inf
    prev_mag = None
    consecutive_small = 0
    for k in range(cap):
        lt, sign = term_log(k)
        full_log = lt + k * log_abs_z
        peak = max(peak, full_log)
        mag = math.exp(full_log) if lt > -math.inf else 0.0
        t = sign * mag
        if z_sign < 0 and k % 2 == 1:
            t = -t
        terms.append(t)
        running += t
        if k >= 4 and mag <= tol * max(abs(running), _TINY):
            consecutive_small += 1
            if consecutive_small >= 3:
                ratio = mag / prev_mag if prev_mag else 0.0
                if mag == 0.0:
                    tail = 0.0
                elif ratio < 0.98:
                    # On the radius boundary the ratio approaches
                    # |z|/radius, so admit slow geometric tails.
                    tail = mag * ratio / (1.0 - ratio)
                else:
                    consecutive_small = 0
                    prev_mag = mag
                    continue
                if tail <= tol * max(abs(running), _TINY):
                    return EvalReport(
                        fsum(terms), "wright_series",
                        terms_used=len(terms), tail_bound=tail,
                        peak_log=peak)
        else:
            consecutive_small = 0
        prev_mag = mag
    raise NoConvergenceError(
        "Wright series did not meet tolerance within the term cap",
        cap=cap, z=z)


# -- density tail constants ----------------------------------------------------

@dataclass(frozen=True)
class TailBehavior:
    """Constants of the density asymptotics at 0+ and at infinity."""
    infinity_exponent: float
    infinity_rate: float
    infinity_power: float
    zero_exponent: float
    argmin_indices: tuple


def tail_behavior(spec: FoxHSpec) -> TailBehavior:
    """Asymptotic profile of a density-shaped spec: power/rate constants
    of the stretched-exponential decay and the zero-side exponent."""
    if not spec.is_density_shaped():
        raise ShapeError(
            "tail constants are defined for n = 0, m = q kernels",
            m=spec.m, n=spec.n, q=spec.q)
    d = derive_params(spec)
    if d.delta_cap <= 0:
        raise SeriesDomainError(
            "infinity-side constants need delta > 0", delta=d.delta_cap)
    ratios = [pair.coeff / pair.scale for pair in spec.lower_front]
    rho = min(ratios)
    tol = 1e-12 * max(1.0, abs(rho))
    argmin = tuple(j for j, r in enumerate(ratios) if r - rho <= tol)
    return TailBehavior(
        infinity_exponent=(d.mu + 0.5) / d.delta_cap,
        infinity_rate=d.delta_cap * d.delta_small ** (-1.0 / d.delta_cap),
        infinity_power=1.0 / d.delta_cap,
        zero_exponent=rho,
        argmin_indices=argmin)


# -- routing ------------------------------------------------------------------

def eval_auto(spec: FoxHSpec, x: float, tol: float = 1e-10) -> EvalReport:
    """Evaluate H at c*x by the residue series when its hypotheses hold,
    falling back to contour quadrature."""
    d = derive_params(spec)
    z = spec.c * x
    series_ok = (d.delta_cap > 0 and d.a_star > 0) or (
        d.delta_cap == 0.0 and 0 < z < d.delta_small)
    if series_ok and poles(spec, SEPARATION_HORIZON, SEPARATION_HORIZON).simple:
        try:
            return eval_residue_series(spec, x, tol=min(tol, 1e-12))
        except (MultiplePolesError, NoConvergenceError):
            if d.a_star <= 0:
                raise
    return eval_mellin_barnes(spec, x, tol=tol)
