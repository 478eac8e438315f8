"""The eight closed classes of Fox-H probability densities.

Each class is a finite product of independent factors of three kinds:
power-of-gamma factors (parameters e, eta), power-of-beta factors
(e, eta, b), and generalized M-Wright factors (a, alpha, beta, gamma).
A ClassSpec records the factor blocks; build_class assembles the
corresponding H^{m,0}_{p,m} parameter record together with the
normalizing constant K = kernel(1).  On top of that sit the density and
moment evaluators, the Laplace transform (a generalized Wright series,
with a contour-integral fallback outside the series' reach), the
closed-form transform parameters (a*, Delta, delta, mu of the transform
spec), and a finite-difference complete-monotonicity checker.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from math import fsum
from typing import Callable, Optional, Sequence

from .core import DerivedParams, FoxHSpec, lt_spec
from .errors import (
    DomainError,
    DivergentError,
    InvalidClassParamsError,
    NoConvergenceError,
)
from .evaluate import (
    eval_auto,
    eval_mellin_barnes,
    eval_wright_series,
    kernel_log_sign,
    wright_delta,
    wright_radius,
)

_EPS = 2.220446049250313e-16

# Which factor blocks each class tag must carry (exactly these, nonempty).
_BLOCKS_BY_TAG = {
    "C0": (),
    "C1": ("gamma",),
    "C2": ("beta",),
    "C3": ("gamma", "beta"),
    "C4": ("wright",),
    "C5": ("gamma", "wright"),
    "C6": ("beta", "wright"),
    "C7": ("gamma", "beta", "wright"),
}


class MonotonicityGuaranteeWarning(UserWarning):
    """Complete monotonicity of the transform is only guaranteed when the
    beta exponents sum above one; the value itself is still correct."""


@dataclass(frozen=True)
class GammaTerm:
    """One power-of-gamma factor G**eta with G ~ Gamma(e + eta, 1)."""

    e: float
    eta: float


@dataclass(frozen=True)
class BetaTerm:
    """One power-of-beta factor B**eta with B ~ Beta(e + eta, b)."""

    e: float
    eta: float
    b: float


@dataclass(frozen=True)
class WrightTerm:
    """One generalized M-Wright factor with parameters (a, alpha, beta,
    gamma); its kernel pair uses c = a - alpha*gamma + alpha."""

    a: float
    alpha: float
    beta: float
    gamma: float

    @property
    def c(self) -> float:
        return self.a - self.alpha * self.gamma + self.alpha


def _coerce(block, cls, n_fields):
    out = []
    for item in block:
        if isinstance(item, cls):
            out.append(item)
        else:
            vals = tuple(float(v) for v in item)
            if len(vals) != n_fields:
                raise InvalidClassParamsError(
                    f"{cls.__name__} needs {n_fields} values, got {len(vals)}"
                )
            out.append(cls(*vals))
    return tuple(out)


@dataclass(frozen=True)
class ClassSpec:
    """Factor blocks of one class member, validated eagerly."""

    tag: str
    gamma_block: Sequence[GammaTerm] = ()
    beta_block: Sequence[BetaTerm] = ()
    wright_block: Sequence[WrightTerm] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "gamma_block", _coerce(self.gamma_block, GammaTerm, 2))
        object.__setattr__(
            self, "beta_block", _coerce(self.beta_block, BetaTerm, 3))
        object.__setattr__(
            self, "wright_block", _coerce(self.wright_block, WrightTerm, 4))
        if self.tag not in _BLOCKS_BY_TAG:
            raise InvalidClassParamsError(
                f"unknown class tag {self.tag!r}", tag=self.tag)
        present = {
            "gamma": bool(self.gamma_block),
            "beta": bool(self.beta_block),
            "wright": bool(self.wright_block),
        }
        required = _BLOCKS_BY_TAG[self.tag]
        for kind, has in present.items():
            if has and kind not in required:
                raise InvalidClassParamsError(
                    f"class {self.tag} admits no {kind} block", tag=self.tag)
            if not has and kind in required:
                raise InvalidClassParamsError(
                    f"class {self.tag} needs a nonempty {kind} block",
                    tag=self.tag)
        for i, t in enumerate(self.gamma_block):
            if not t.eta > 0:
                raise InvalidClassParamsError(
                    f"gamma_block[{i}]: eta must be > 0, got {t.eta}")
            if not t.e + t.eta > 0:
                raise InvalidClassParamsError(
                    f"gamma_block[{i}]: e + eta must be > 0, got {t.e + t.eta}")
        for i, t in enumerate(self.beta_block):
            if not t.eta > 0:
                raise InvalidClassParamsError(
                    f"beta_block[{i}]: eta must be > 0, got {t.eta}")
            if not t.e + t.eta > 0:
                raise InvalidClassParamsError(
                    f"beta_block[{i}]: e + eta must be > 0, got {t.e + t.eta}")
            if not t.b > 0:
                raise InvalidClassParamsError(
                    f"beta_block[{i}]: b must be > 0, got {t.b}")
        for k, t in enumerate(self.wright_block):
            if not t.alpha > 0:
                raise InvalidClassParamsError(
                    f"wright_block[{k}]: alpha must be > 0, got {t.alpha}")
            if not 0.0 < t.beta < 1.0:
                raise InvalidClassParamsError(
                    f"wright_block[{k}]: beta must lie in (0, 1), got {t.beta}")
            if not t.gamma > 0:
                raise InvalidClassParamsError(
                    f"wright_block[{k}]: gamma must be > 0, got {t.gamma}")
            if not t.a + t.alpha > 0:
                raise InvalidClassParamsError(
                    f"wright_block[{k}]: a + alpha must be > 0, "
                    f"got {t.a + t.alpha}")


@dataclass(frozen=True)
class Normalization:
    """The constant K dividing the kernel to make it a density; equals the
    kernel value at s = 1."""

    k_value: float

    def __post_init__(self):
        if not self.k_value > 0:
            raise InvalidClassParamsError(
                f"normalization must be positive, got {self.k_value}")


def build_class(cs: ClassSpec) -> tuple:
    """Assemble the (FoxHSpec, Normalization) pair of a class member.

    Pair layout: upper rows come from beta factors (e+b, eta) then wright
    factors (1 - beta + beta*c, alpha*beta*gamma); lower rows from beta
    (e, eta), then gamma (e, eta), then wright (c, alpha*gamma).
    """
    upper = [(t.e + t.b, t.eta) for t in cs.beta_block]
    upper += [
        (1.0 - t.beta + t.beta * t.c, t.alpha * t.beta * t.gamma)
        for t in cs.wright_block
    ]
    lower = [(t.e, t.eta) for t in cs.beta_block]
    lower += [(t.e, t.eta) for t in cs.gamma_block]
    lower += [(t.c, t.alpha * t.gamma) for t in cs.wright_block]
    spec = FoxHSpec(
        m=len(lower), n=0, p=len(upper), q=len(lower),
        upper=upper, lower=lower,
    )
    log_k, sign = kernel_log_sign(spec, 1.0)
    if sign <= 0:
        raise InvalidClassParamsError(
            "kernel at s = 1 is not positive", sign=sign)
    return spec, Normalization(k_value=math.exp(log_k))


def class_support(cs: ClassSpec) -> tuple:
    """Support interval of the class density.

    Only the pure beta product lives on (0, 1); every class containing a
    gamma or wright factor has full support (0, inf).  The empty class is
    the unit point mass.
    """
    if cs.tag == "C0":
        return (1.0, 1.0)
    if cs.tag == "C2":
        return (0.0, 1.0)
    return (0.0, math.inf)


def density_eval(cs: ClassSpec, x: float, tol: float = 1e-10) -> float:
    """Density value (1/K) H(x) at x > 0; exactly 0 outside the support.

    The residue series is the primary route; members with repeated rows
    have a degenerate pole lattice, for which the contour route takes
    over (same fallback order as eval_auto).
    """
    x = float(x)
    if not x > 0:
        raise DomainError("density argument must be positive", x=x)
    if cs.tag == "C0":
        # Unit point mass: no density function; 0 away from the atom.
        return math.inf if x == 1.0 else 0.0
    if cs.tag == "C2" and x >= 1.0:
        return 0.0
    spec, norm = build_class(cs)
    value = eval_auto(spec, x, tol=tol) / norm.k_value
    # The class theorem fixes the sign; far-tail series noise may not.
    return value if value > 0.0 else 0.0


def moment(cs: ClassSpec, order: int) -> float:
    """Moment of the class density: kernel(order + 1) / kernel(1).

    Both kernel values go through the same log route, so moment(cs, 0)
    is exactly 1.0 and large orders cannot overflow prematurely.
    """
    if order < 0:
        raise DomainError(f"moment order must be >= 0, got {order}")
    spec, _ = build_class(cs)
    log_num, sign_num = kernel_log_sign(spec, float(order) + 1.0)
    log_den, sign_den = kernel_log_sign(spec, 1.0)
    return (sign_num * sign_den) * math.exp(log_num - log_den)


def class_lt_pairs(cs: ClassSpec) -> tuple:
    """Wright-series pair lists of the class Laplace transform.

    Every lower kernel row (t, tau) contributes an upper series pair
    (t + tau, tau) and every upper row a lower pair; the empty class
    yields the bare exponential series.
    """
    spec, _ = build_class(cs)
    upper_pairs = [(pp.coeff + pp.scale, pp.scale) for pp in spec.lower]
    lower_pairs = [(pp.coeff + pp.scale, pp.scale) for pp in spec.upper]
    return upper_pairs, lower_pairs


def laplace_transform(cs: ClassSpec, s: float, tol: float = 1e-10) -> float:
    """Laplace transform of the class density at real s.

    Routed through the generalized Wright series whenever it converges
    (always for series index > -1; inside the radius on the index = -1
    boundary) and otherwise through contour quadrature of the transform
    spec, which needs s > 0.  Outside both routes the transform integral
    itself diverges.
    """
    s = float(s)
    spec, norm = build_class(cs)
    if cs.beta_block and fsum(t.b for t in cs.beta_block) <= 1.0:
        warnings.warn(
            "beta exponents sum to <= 1: complete monotonicity of the "
            "transform is not guaranteed on this parameter range",
            MonotonicityGuaranteeWarning, stacklevel=2)
    upper_pairs, lower_pairs = class_lt_pairs(cs)
    index = wright_delta(upper_pairs, lower_pairs)
    in_series_reach = s == 0.0 or index > -1.0 or (
        index == -1.0 and abs(s) < wright_radius(upper_pairs, lower_pairs))
    if in_series_reach:
        try:
            value = eval_wright_series(
                upper_pairs, lower_pairs, -s, tol=min(tol, 1e-12))
            return value / norm.k_value
        except NoConvergenceError:
            # Slow convergence just inside the radius; the contour
            # route below covers s > 0.
            if s <= 0:
                raise
    if s <= 0:
        raise DivergentError(
            "Laplace transform diverges for this argument",
            s=s, index=index)
    transform = lt_spec(spec)
    value = eval_mellin_barnes(transform, s, tol=tol)
    return value / norm.k_value


def class_lt_params(cs: ClassSpec) -> DerivedParams:
    """Closed-form derived parameters of the class Laplace transform.

    Evaluates the per-class formulas directly from the factor blocks:
    a* and Delta pick up eta from gamma factors and alpha*gamma*(1-beta)
    from wright factors around the base value 1; mu adds e + eta per
    gamma factor, -b per beta factor, (1-beta)(a+alpha-1) per wright
    factor to -(len(gamma_block)+1)/2; delta collects eta**-eta and the
    wright factors' scale powers.  Cross-checked elsewhere against the
    generic derived parameters of the transform spec.
    """
    aux = [t.eta for t in cs.gamma_block]
    aux += [t.alpha * t.gamma * (1.0 - t.beta) for t in cs.wright_block]
    mu_parts = [t.e + t.eta for t in cs.gamma_block]
    mu_parts += [-t.b for t in cs.beta_block]
    mu_parts += [
        (1.0 - t.beta) * (t.a + t.alpha - 1.0) for t in cs.wright_block
    ]
    mu_parts.append(-(len(cs.gamma_block) + 1) / 2.0)
    log_delta = [-t.eta * math.log(t.eta) for t in cs.gamma_block]
    log_delta += [
        t.alpha * t.gamma * (t.beta - 1.0) * math.log(t.alpha * t.gamma)
        + t.alpha * t.beta * t.gamma * math.log(t.beta)
        for t in cs.wright_block
    ]
    return DerivedParams(
        a_star=fsum([1.0] + aux),
        a1_star=1.0,
        a2_star=fsum(aux),
        delta_cap=fsum([1.0] + [-v for v in aux]),
        delta_small=math.exp(fsum(log_delta)),
        mu=fsum(mu_parts),
    )


# -- complete monotonicity --------------------------------------------------


@dataclass(frozen=True)
class MonotonicityViolation:
    s: float
    order: int
    estimate: float
    tolerance: float


@dataclass(frozen=True)
class MonotonicityReport:
    max_order: int
    points: tuple
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def _single_route_probe(cs: ClassSpec) -> Callable[[float], tuple]:
    """Transform probe pinned to one evaluation route, reporting noise.

    Finite differences amplify any route-switching discontinuity by
    h**-order, so the probe never mixes series and contour values.  It
    returns (value, noise) where noise is an absolute accuracy estimate:
    eps times the series' peak term (alternating sums lose exactly that
    much to cancellation), or quadrature tolerance plus truncation tail
    for the contour route.
    """
    spec, norm = build_class(cs)
    upper_pairs, lower_pairs = class_lt_pairs(cs)
    if wright_delta(upper_pairs, lower_pairs) > -1.0:
        def probe(s: float) -> tuple:
            rpt = eval_wright_series(upper_pairs, lower_pairs, -s, tol=1e-14)
            # Terms are assembled in log space, so each carries a
            # relative error of a few ulp of its log magnitude.
            peak = math.exp(rpt.peak_log) * (2.0 + abs(rpt.peak_log))
            noise = _EPS * (peak + abs(rpt))
            return rpt / norm.k_value, noise / norm.k_value
        return probe
    transform = lt_spec(spec)
    mb_tol = 1e-12

    def probe(s: float) -> tuple:
        rpt = eval_mellin_barnes(transform, s, tol=mb_tol)
        noise = mb_tol * (1.0 + abs(rpt)) + rpt.tail_bound
        return rpt / norm.k_value, noise / norm.k_value

    return probe


def check_complete_monotonicity(
    cs: ClassSpec,
    grid: Sequence[float],
    max_order: int = 6,
    phi: Optional[Callable[[float], float]] = None,
    probe_accuracy: Optional[float] = None,
) -> MonotonicityReport:
    """Flag sign violations of (-1)**k phi^(k) on the grid, k <= max_order.

    Derivatives come from central differences with step h = max(1e-3,
    1e-2 s). Each order's tolerance combines the scheme's truncation
    error, estimated from the (order+2) difference on the same stencil,
    with the roundoff amplification 2**order * noise / h**order, where
    noise is the probe's own accuracy estimate.  phi overrides the
    probed function (the harness self-test corrupts a series term
    through it); probe_accuracy overrides the noise floor of an
    override.
    """
    points = tuple(float(s) for s in grid)
    if any(b <= a for a, b in zip(points, points[1:])):
        raise DomainError("grid must be strictly increasing")
    if not 0 <= max_order <= 8:
        raise DomainError(f"max_order must lie in 0..8, got {max_order}")
    if phi is None:
        probe = _single_route_probe(cs)
    else:
        floor = 4.0 * _EPS if probe_accuracy is None else float(probe_accuracy)

        def probe(s: float) -> tuple:
            value = phi(s)
            return value, floor * (1.0 + abs(value))

    violations = []
    for s in points:
        h = max(1e-3, 1e-2 * s)
        half = h / 2.0
        # One lattice of half-steps serves every order: the k-th central
        # difference reads f at s + (k - 2i) * h/2, i = 0..k.
        reach = max_order + 2
        probed = {j: probe(s + j * half) for j in range(-reach, reach + 1)}
        values = {j: v for j, (v, _) in probed.items()}
        noise = max(n for _, n in probed.values())
        noise = max(noise, 4.0 * _EPS * (1.0 + max(map(abs, values.values()))))
        for k in range(max_order + 1):
            diff = fsum(
                (-1.0) ** i * math.comb(k, i) * values[k - 2 * i]
                for i in range(k + 1)
            )
            estimate = diff / h**k
            curvature = fsum(
                (-1.0) ** i * math.comb(k + 2, i) * values[k + 2 - 2 * i]
                for i in range(k + 3)
            ) / h ** (k + 2)
            truncation = abs(curvature) * k * h * h / 24.0
            roundoff = 4.0 * noise * 2.0**k / h**k
            tolerance = truncation + roundoff
            if (-1.0) ** k * estimate < -tolerance:
                violations.append(MonotonicityViolation(
                    s=s, order=k, estimate=estimate, tolerance=tolerance))
    return MonotonicityReport(
        max_order=max_order, points=points, violations=tuple(violations))


def generalized_mwright(a: float, alpha: float, beta: float) -> ClassSpec:
    """Single-factor wright class member with unit gamma exponent.

    Builds the H^{1,0}_{1,1} record with upper row (1 - beta + beta*a,
    beta*alpha) and lower row (a, alpha); a = 0, alpha = 1 gives the
    plain M-Wright density of index beta.
    """
    return ClassSpec(
        tag="C4",
        wright_block=[WrightTerm(float(a), float(alpha), float(beta), 1.0)],
    )


# -- JSON form ---------------------------------------------------------------

_JSON_FIELDS = {
    "gamma_block": (GammaTerm, ("e", "eta")),
    "beta_block": (BetaTerm, ("e", "eta", "b")),
    "wright_block": (WrightTerm, ("a", "alpha", "beta", "gamma")),
}


def classspec_to_json(cs: ClassSpec) -> dict:
    out = {"class": cs.tag}
    for name, (_, keys) in _JSON_FIELDS.items():
        block = getattr(cs, name)
        if block:
            out[name] = [
                {key: getattr(term, key) for key in keys} for term in block
            ]
    return out


def classspec_from_json(obj) -> ClassSpec:
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "class" not in obj:
        raise InvalidClassParamsError("class document needs a 'class' tag")
    blocks = {}
    for key, value in obj.items():
        if key == "class":
            continue
        if key not in _JSON_FIELDS:
            raise InvalidClassParamsError(f"unknown field {key!r}")
        cls, names = _JSON_FIELDS[key]
        terms = []
        for entry in value:
            try:
                terms.append(cls(*(float(entry[nm]) for nm in names)))
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidClassParamsError(
                    f"malformed {key} entry: {exc}") from exc
        blocks[key] = terms
    return ClassSpec(tag=str(obj["class"]), **blocks)
