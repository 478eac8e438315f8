"""Decomposition procedures and grid certification of non-negativity.

A Fox-H function whose upper rows admit an affine rewriting
(a_i, alpha_i) = (c_i + eta*gamma_i, sigma*gamma_i) factors as a nested
Mellin-style integral of two simpler functions, and the split can be
repeated on all-lower and all-upper pieces.  The leaves of the
resulting tree are one-sided records (atomic), square records peeled
off by the repeat steps (auxiliary), or whole factor densities (for
trees built from a ClassSpec's product structure).  Since each edge is
an integral against a positive weight, pointwise non-negativity of
every leaf certifies non-negativity of the root; certification
evaluates the leaves on a grid, treating values inside the evaluation
noise floor as zeros, and relies on the strictly positive leading
asymptotic for full-support density-shaped leaves beyond the range
where the residue series is trustworthy in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .classes import ClassSpec, build_class
from .core import FoxHSpec, derive_params
from .errors import (
    BadMatchingError,
    BudgetError,
    DomainError,
    FoxHError,
    ShapeError,
    ValidationError,
)
from .evaluate import eval_auto

_EPS = 2.220446049250313e-16

MATCHING_TOL = 1e-12
BUDGET_TOL = 1e-12

# The residue series of a delta > 0 record is trusted while
# rate * x**(1/delta) stays below this cap (noise ~ eps * exp(cap)).
_CANCEL_CAP = 14.0

CERTIFIED = "CERTIFIED"
INCONCLUSIVE = "INCONCLUSIVE"
REFUTED = "REFUTED"


# -- matchings ------------------------------------------------------------------

@dataclass(frozen=True)
class StepAssignment:
    """Affine rewriting of a block of pairs: pair_i = (base_i + eta *
    scale_i, sigma * scale_i).  The scales become a factor's own pair
    scales, so they must be positive, as must sigma."""

    bases: tuple
    scales: tuple
    eta: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(float(b) for b in self.bases))
        object.__setattr__(
            self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "sigma", float(self.sigma))
        if len(self.bases) != len(self.scales):
            raise ValidationError(
                "bases and scales must have equal length",
                bases=len(self.bases), scales=len(self.scales))
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        if any(not s > 0 for s in self.scales):
            raise ValidationError("assignment scales must all be > 0")

    def reproduces(self, pairs) -> float:
        """Largest residual against the given parameter pairs."""
        worst = 0.0
        for pp, base, scale in zip(pairs, self.bases, self.scales):
            worst = max(worst, abs(pp.coeff - (base + self.eta * scale)))
            worst = max(worst, abs(pp.scale - self.sigma * scale))
        return worst


@dataclass(frozen=True)
class Matching:
    """Assignments for the decomposition steps; unused steps stay None.

    step1 rewrites the upper rows (the first split), step2 the leading
    lower-front rows of the all-lower piece, step3 the leading
    upper-front rows of the all-upper piece (for procedure B, step3
    addresses the second all-lower piece instead).
    """

    step1: Optional[StepAssignment] = None
    step2: Optional[StepAssignment] = None
    step3: Optional[StepAssignment] = None


# -- decomposition trees --------------------------------------------------------

@dataclass(frozen=True)
class DecompNode:
    """One node of the nested-integral tree.

    Composite nodes satisfy spec(x) = integral of t**(eta-1) *
    kernel(x * t**(arg_sign * sigma)) * measure(t) dt over (0, inf);
    leaves carry a kind tag instead of children.
    """

    spec: FoxHSpec
    kind: str  # "atomic" | "auxiliary" | "density" | "composite"
    eta: float = 0.0
    sigma: float = 1.0
    arg_sign: int = -1
    kernel: Optional["DecompNode"] = None
    measure: Optional["DecompNode"] = None
    budget_note: str = ""

    def leaves(self) -> tuple:
        if self.kernel is None:
            return (self,)
        return self.kernel.leaves() + self.measure.leaves()

    def to_json(self) -> dict:
        doc = {"spec": self.spec.to_json(), "kind": self.kind}
        if self.kernel is not None:
            doc["eta"] = self.eta
            doc["sigma"] = self.sigma
            doc["arg_sign"] = self.arg_sign
            doc["kernel"] = self.kernel.to_json()
            doc["measure"] = self.measure.to_json()
        if self.budget_note:
            doc["budget_note"] = self.budget_note
        return doc


@dataclass(frozen=True)
class Decomposition:
    root: DecompNode

    @property
    def structure(self) -> DecompNode:
        return self.root

    def leaves(self) -> tuple:
        return self.root.leaves()

    @property
    def atomic(self) -> tuple:
        return tuple(
            n.spec for n in self.leaves() if n.kind in ("atomic", "density"))

    @property
    def auxiliary(self) -> tuple:
        return tuple(n.spec for n in self.leaves() if n.kind == "auxiliary")

    def budget_notes(self) -> tuple:
        def walk(node):
            notes = [node.budget_note] if node.budget_note else []
            if node.kernel is not None:
                notes += walk(node.kernel) + walk(node.measure)
            return notes
        return tuple(walk(self.root))

    def to_json(self) -> dict:
        return {"root": self.root.to_json()}


def _a_star(spec: FoxHSpec) -> float:
    return derive_params(spec).a_star


def _check_budget(parent, kernel_spec, measure_spec, sigma, where,
                  lenient=False) -> str:
    """Exact bookkeeping plus per-part positivity, returning flag notes.

    Parts with a* = 0 are admitted when mu < -1 (flagged), and always
    when lenient (class product edges, where the parts are normalized
    densities and the identity holds outright); any other shortfall is
    a budget violation.
    """
    pa = _a_star(parent)
    ka = _a_star(kernel_spec)
    ma = _a_star(measure_spec)
    drift = abs(pa - (ka + sigma * ma))
    if drift > BUDGET_TOL:
        raise BudgetError(
            f"{where}: a* bookkeeping drift {drift:.3e}",
            parent=pa, kernel=ka, measure=ma, sigma=sigma)
    notes = []
    for name, spc, a in (("kernel", kernel_spec, ka),
                         ("measure", measure_spec, ma)):
        if a > BUDGET_TOL:
            continue
        mu = derive_params(spc).mu
        if abs(a) <= BUDGET_TOL and mu < -1.0:
            notes.append(f"{where} {name}: a*=0, mu={mu:.6g}")
        elif lenient and abs(a) <= BUDGET_TOL:
            notes.append(
                f"{where} {name}: a*=0, mu={mu:.6g}, admitted as a density")
        else:
            raise BudgetError(
                f"{where}: {name} needs a* > 0 (or a*=0 with mu < -1), "
                f"got a*={a:.6g}, mu={mu:.6g}",
                part=name)
    return "; ".join(notes)


def _leaf(spec: FoxHSpec, kind: str) -> DecompNode:
    return DecompNode(spec=spec, kind=kind)


def _split_lower(spec: FoxHSpec, assignment, where: str) -> DecompNode:
    """Repeat step on an all-lower record: peel the first h front rows
    into a square auxiliary factor, h being q mod m."""
    if assignment is None:
        return _leaf(spec, "atomic")
    m, q = spec.m, spec.q
    if m < 2:
        raise ShapeError(
            f"{where}: repeat step needs m >= 2, got m={m}", m=m, q=q)
    h = q % m
    if h == 0:
        raise ShapeError(
            f"{where}: q must not be an exact multiple of m", m=m, q=q)
    if len(assignment.bases) != h:
        raise BadMatchingError(
            f"{where}: assignment covers {len(assignment.bases)} rows, "
            f"step peels {h}", h=h)
    residual = assignment.reproduces(spec.lower[:h])
    if residual > MATCHING_TOL:
        raise BadMatchingError(
            f"{where}: assignment residual {residual:.3e}", residual=residual)
    child = FoxHSpec(m=m - h, n=0, p=0, q=q - h,
                     upper=(), lower=spec.lower[h:], c=spec.c)
    factor = FoxHSpec(m=h, n=0, p=0, q=h, upper=(),
                      lower=list(zip(assignment.bases, assignment.scales)))
    note = _check_budget(spec, child, factor, assignment.sigma, where)
    return DecompNode(
        spec=spec, kind="composite",
        eta=assignment.eta, sigma=assignment.sigma, arg_sign=-1,
        kernel=_leaf(child, "atomic"), measure=_leaf(factor, "auxiliary"),
        budget_note=note)


def _split_upper(spec: FoxHSpec, assignment, where: str) -> DecompNode:
    """Repeat step on an all-upper record: peel the first g front rows
    into a square auxiliary factor, g being p mod n."""
    if assignment is None:
        return _leaf(spec, "atomic")
    n, p = spec.n, spec.p
    if n < 2:
        raise ShapeError(
            f"{where}: repeat step needs n >= 2, got n={n}", n=n, p=p)
    g = p % n
    if g == 0:
        raise ShapeError(
            f"{where}: p must not be an exact multiple of n", n=n, p=p)
    if len(assignment.bases) != g:
        raise BadMatchingError(
            f"{where}: assignment covers {len(assignment.bases)} rows, "
            f"step peels {g}", g=g)
    residual = assignment.reproduces(spec.upper[:g])
    if residual > MATCHING_TOL:
        raise BadMatchingError(
            f"{where}: assignment residual {residual:.3e}", residual=residual)
    child = FoxHSpec(m=0, n=n - g, p=p - g, q=0,
                     upper=spec.upper[g:], lower=(), c=spec.c)
    factor = FoxHSpec(m=0, n=g, p=g, q=0,
                      upper=list(zip(assignment.bases, assignment.scales)),
                      lower=())
    note = _check_budget(spec, child, factor, assignment.sigma, where)
    return DecompNode(
        spec=spec, kind="composite",
        eta=assignment.eta, sigma=assignment.sigma, arg_sign=-1,
        kernel=_leaf(child, "atomic"), measure=_leaf(factor, "auxiliary"),
        budget_note=note)


def decompose_A(spec: FoxHSpec, matching: Matching) -> Decomposition:
    """First procedure: move all upper rows into an all-upper measure
    factor, then optionally repeat-split both pieces.

    With no upper rows the record is already all-lower and only the
    repeat step applies (a single atomic leaf when step2 is absent).
    """
    if spec.p == 0:
        return Decomposition(root=_split_lower(spec, matching.step2, "step2"))
    if matching.step1 is None:
        raise BadMatchingError("step1 assignment required when p > 0")
    a1 = matching.step1
    if len(a1.bases) != spec.p:
        raise BadMatchingError(
            f"step1 assignment covers {len(a1.bases)} rows, spec has "
            f"p={spec.p}")
    residual = a1.reproduces(spec.upper)
    if residual > MATCHING_TOL:
        raise BadMatchingError(
            f"step1 assignment residual {residual:.3e}", residual=residual)
    child = FoxHSpec(m=spec.m, n=0, p=0, q=spec.q,
                     upper=(), lower=spec.lower, c=spec.c)
    factor = FoxHSpec(m=0, n=spec.n, p=spec.p, q=0,
                      upper=list(zip(a1.bases, a1.scales)), lower=())
    note = _check_budget(spec, child, factor, a1.sigma, "step1")
    kernel = _split_lower(child, matching.step2, "step2")
    measure = _split_upper(factor, matching.step3, "step3")
    root = DecompNode(
        spec=spec, kind="composite",
        eta=a1.eta, sigma=a1.sigma, arg_sign=-1,
        kernel=kernel, measure=measure, budget_note=note)
    return Decomposition(root=root)


def decompose_B(spec: FoxHSpec, matching: Matching) -> Decomposition:
    """Second procedure: rewrite the upper rows by their one-complement,
    (a_i, alpha_i) = (1 - d_i - eta*delta_i, sigma*delta_i), producing
    an all-lower measure factor and a kernel whose argument carries
    t**(+sigma).  step2/step3 repeat-split the kernel/measure pieces.
    """
    if spec.p == 0:
        return Decomposition(root=_split_lower(spec, matching.step2, "step2"))
    if matching.step1 is None:
        raise BadMatchingError("step1 assignment required when p > 0")
    a1 = matching.step1
    if len(a1.bases) != spec.p:
        raise BadMatchingError(
            f"step1 assignment covers {len(a1.bases)} rows, spec has "
            f"p={spec.p}")
    complemented = [
        type(pp)(1.0 - pp.coeff, pp.scale) for pp in spec.upper]
    residual = a1.reproduces(complemented)
    if residual > MATCHING_TOL:
        raise BadMatchingError(
            f"step1 assignment residual {residual:.3e}", residual=residual)
    child = FoxHSpec(m=spec.m, n=0, p=0, q=spec.q,
                     upper=(), lower=spec.lower, c=spec.c)
    factor = FoxHSpec(m=spec.n, n=0, p=0, q=spec.p, upper=(),
                      lower=list(zip(a1.bases, a1.scales)))
    note = _check_budget(spec, child, factor, a1.sigma, "step1")
    kernel = _split_lower(child, matching.step2, "step2")
    measure = _split_lower(factor, matching.step3, "step3")
    root = DecompNode(
        spec=spec, kind="composite",
        eta=a1.eta, sigma=a1.sigma, arg_sign=+1,
        kernel=kernel, measure=measure, budget_note=note)
    return Decomposition(root=root)


def class_decomposition(cs: ClassSpec) -> Decomposition:
    """Product-structure tree of a class member: one leaf per factor
    density, joined by Mellin-convolution edges (eta = 0, sigma = 1).

    The identity H_parent(x) = integral of t**-1 H_a(x/t) H_b(t) dt
    holds for the unnormalized records because the normalizers
    multiply.  Pure beta factors have a* = 0 and mu = -b; edges outside
    the mu < -1 window are flagged rather than rejected since the
    factors are densities and the convolution needs no contour swap.
    """
    factor_specs = []
    for term in cs.beta_block:
        factor_specs.append(FoxHSpec(
            m=1, n=0, p=1, q=1,
            upper=[(term.e + term.b, term.eta)],
            lower=[(term.e, term.eta)]))
    for term in cs.gamma_block:
        factor_specs.append(FoxHSpec(
            m=1, n=0, p=0, q=1, upper=(), lower=[(term.e, term.eta)]))
    for term in cs.wright_block:
        factor_specs.append(FoxHSpec(
            m=1, n=0, p=1, q=1,
            upper=[(1.0 - term.beta + term.beta * term.c,
                    term.alpha * term.beta * term.gamma)],
            lower=[(term.c, term.alpha * term.gamma)]))
    if not factor_specs:
        raise DomainError("the empty class has no density to decompose")

    def leaf_node(spc):
        kind = "atomic" if spc.p == 0 else "density"
        return _leaf(spc, kind)

    node = leaf_node(factor_specs[0])
    for spc in factor_specs[1:]:
        merged = FoxHSpec(
            m=node.spec.m + spc.m, n=0,
            p=node.spec.p + spc.p, q=node.spec.q + spc.q,
            upper=node.spec.upper + spc.upper,
            lower=node.spec.lower + spc.lower)
        note = _check_budget(merged, node.spec, spc, 1.0, "product",
                             lenient=True)
        node = DecompNode(
            spec=merged, kind="composite", eta=0.0, sigma=1.0, arg_sign=-1,
            kernel=node, measure=leaf_node(spc), budget_note=note)
    return Decomposition(root=node)


# -- leaf evaluation ------------------------------------------------------------

def _invert(spec: FoxHSpec) -> FoxHSpec:
    """Reflected record: H(x) of the original equals H(1/x) of the
    reflection, with every pair replaced by its one-complement and the
    front/back roles of upper and lower swapped."""
    return FoxHSpec(
        m=spec.n, n=spec.m, p=spec.q, q=spec.p,
        upper=[(1.0 - pp.coeff, pp.scale) for pp in spec.lower],
        lower=[(1.0 - pp.coeff, pp.scale) for pp in spec.upper],
        c=1.0 / spec.c)


class _LeafEvaluator:
    """Evaluate one leaf with noise tracking and domain handling.

    All-upper leaves are reflected so the residue series applies.  For
    delta > 0 the series is used up to the double-precision
    cancellation cap and the calibrated leading asymptotic beyond it
    (density-shaped leaves only; others report the point as skipped).
    delta = 0 leaves vanish beyond their support radius, with a local
    power-law extension over the last sliver where the series is too
    slow.  Calls return (value, noise, mode).
    """

    def __init__(self, spec: FoxHSpec):
        self.inverted = spec.m == 0 and spec.n > 0
        self.spec = _invert(spec) if self.inverted else spec
        self.d = derive_params(self.spec)
        self.shaped = self.spec.is_density_shaped()
        self._gamma_form = self._single_gamma_form()
        delta = self.d.delta_cap
        if delta > 0:
            self.rate = delta * self.d.delta_small ** (-1.0 / delta)
            self.power = 1.0 / delta
            self.x_cut = (_CANCEL_CAP / self.rate) ** delta / self.spec.c
            self.tail_exponent = (self.d.mu + 0.5) / delta
            self._asym_scale = None
        elif delta == 0.0:
            self.x_edge = self.d.delta_small / self.spec.c
            self._beta_form = self._single_beta_form()
            # Fallback series stalls once the term ratio (x/edge)**(1/beta)
            # nears 1, so the power-law extension takes over early.
            beta_max = max(pp.scale for pp in self.spec.lower)
            self._sliver_frac = 0.89 ** beta_max
            self._edge_ref = None
        # Bounded-support records are exactly zero beyond the edge, so
        # their tail needs no asymptotic argument.
        self.tail_guaranteed = (self.shaped and delta > 0) or delta == 0.0

    def _single_gamma_form(self) -> Optional[Callable[[float], float]]:
        """Closed form of a one-row all-lower record: the kernel
        Gamma(e+eta*s) is the Mellin transform of z**(e/eta) *
        exp(-z**(1/eta)) / eta, valid on all of (0, inf)."""
        s = self.spec
        if (s.m, s.n, s.p, s.q) != (1, 0, 0, 1):
            return None
        (pair,) = s.lower
        e, eta = pair.coeff, pair.scale

        def form(z: float) -> float:
            return z ** (e / eta) * math.exp(-z ** (1.0 / eta)) / eta

        return form

    def _single_beta_form(self) -> Optional[Callable[[float], float]]:
        """Closed form of a one-factor beta record, which is where the
        near-edge series stalls: the kernel Gamma(e+eta*s)/Gamma(e+b+eta*s)
        is the Mellin transform of z**(e/eta) (1-z**(1/eta))**(b-1) /
        (eta*Gamma(b)) on (0, 1)."""
        s = self.spec
        if (s.m, s.n, s.p, s.q) != (1, 0, 1, 1):
            return None
        (top,), (bot,) = s.upper, s.lower
        if abs(top.scale - bot.scale) > 1e-14 or top.coeff <= bot.coeff:
            return None
        e, eta, b = bot.coeff, bot.scale, top.coeff - bot.coeff

        def form(z: float) -> float:
            return z ** (e / eta) * (1.0 - z ** (1.0 / eta)) ** (b - 1.0) \
                / (eta * math.gamma(b))

        return form

    def _eval(self, x: float):
        rpt = eval_auto(self.spec, x, tol=1e-11)
        noise = _EPS * (math.exp(rpt.peak_log) + abs(rpt)) + rpt.tail_bound
        return float(rpt), noise

    def _asymptotic(self, x: float) -> float:
        if self._asym_scale is None:
            v_cut, _ = self._eval(self.x_cut)
            z = self.spec.c * self.x_cut
            self._asym_scale = v_cut * z ** -self.tail_exponent * math.exp(
                self.rate * z ** self.power)
        z = self.spec.c * x
        return self._asym_scale * z ** self.tail_exponent * math.exp(
            -self.rate * z ** self.power)

    def __call__(self, x: float):
        if self.inverted:
            x = 1.0 / x
        if self._gamma_form is not None:
            value = self._gamma_form(self.spec.c * x)
            return value, 8.0 * _EPS * abs(value), "closed-form"
        if self.d.delta_cap > 0:
            if x <= self.x_cut:
                value, noise = self._eval(x)
                return value, noise, "series"
            if self.shaped:
                value = self._asymptotic(x)
                return value, abs(value), "asymptotic"
            return 0.0, math.inf, "skipped"
        if self.d.delta_cap == 0.0:
            if x >= self.x_edge:
                return 0.0, 0.0, "support-zero"
            if self._beta_form is not None:
                value = self._beta_form(self.spec.c * x)
                return value, 8.0 * _EPS * abs(value), "closed-form"
            sliver = self._sliver_frac * self.x_edge
            if x <= sliver:
                value, noise = self._eval(x)
                return value, noise, "series"
            # Edge behavior (x_edge - x)**(-mu - 1) up to a constant.
            if self._edge_ref is None:
                self._edge_ref = self._eval(sliver)[0]
            ratio = (self.x_edge - x) / (self.x_edge - sliver)
            value = self._edge_ref * ratio ** (-self.d.mu - 1.0)
            return value, abs(value) * 0.05, "edge-extension"
        value, noise = self._eval(x)
        return value, noise, "series"


# -- recomposition --------------------------------------------------------------

def recompose(node, x: float) -> float:
    """Numerically evaluate a decomposition tree at x by integrating
    the nested edges; the executable content of the procedures."""
    if isinstance(node, Decomposition):
        node = node.root
    x = float(x)
    if not x > 0:
        raise DomainError("recomposition argument must be positive", x=x)
    return _compile(node)(x)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)

# Recomposition tables extend past the sign-certification budget: at
# rate*z**(1/delta) = 23 the cancellation noise is still ~2e-6 relative
# and the truncated tail mass ~exp(-23) is negligible under quadrature.
_TABLE_CAP = 23.0


class _CompiledLeaf:
    """Vectorized leaf values for quadrature.

    Closed forms evaluate directly; series-route leaves tabulate their
    live range once on a log grid (composites above may request very
    many values), with the leading residue power continuing the table
    below its left end and the calibrated asymptotic (density-shaped)
    or zero (budget exhausted) beyond the right end.
    """

    def __init__(self, spec: FoxHSpec):
        self.evaluator = _LeafEvaluator(spec)
        ev = self.evaluator
        # Support boundaries where the value function loses smoothness.
        if not ev.inverted and ev.d.delta_cap == 0.0:
            self.edges = (ev.x_edge,)
        else:
            self.edges = ()
        self._interp = None
        self._window = None
        self._head = None
        s = ev.spec
        if ev._gamma_form is not None:
            (pair,) = s.lower
            self._kind = "gamma"
            self._e, self._eta = pair.coeff, pair.scale
        elif ev.d.delta_cap == 0.0 and ev._beta_form is not None:
            (pair,) = s.lower
            self._kind = "beta"
            self._e, self._eta = pair.coeff, pair.scale
            self._b = s.upper[0].coeff - pair.coeff
        elif ev.d.delta_cap > 0:
            self._kind = "series"
            x_hi = ev.x_cut if ev.shaped else \
                (_TABLE_CAP / ev.rate) ** ev.d.delta_cap / s.c
            self._window = (1e-9 * ev.x_cut, x_hi)
        elif ev.d.delta_cap == 0.0:
            self._kind = "series"
            self._window = (1e-9 * ev.x_edge, ev._sliver_frac * ev.x_edge)
        else:
            self._kind = "pointwise"

    def _table(self) -> PchipInterpolator:
        if self._interp is None:
            lo, hi = self._window
            xs = np.geomspace(lo, hi, 1200)
            ys = [self.evaluator._eval(float(x))[0] for x in xs]
            self._interp = PchipInterpolator(np.log(xs), ys)
            # Leading power law continues the table below its left end.
            y0, y1 = ys[0], ys[1]
            if y0 != 0.0 and y1 != 0.0:
                slope = (math.log(abs(y1)) - math.log(abs(y0))) \
                    / (math.log(xs[1]) - math.log(xs[0]))
            else:
                slope = 0.0
            self._head = (xs[0], y0, slope)
        return self._interp

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        ev = self.evaluator
        xi = 1.0 / xs if ev.inverted else xs
        z = ev.spec.c * xi
        if self._kind == "gamma":
            out = z ** (self._e / self._eta) \
                * np.exp(-z ** (1.0 / self._eta)) / self._eta
        elif self._kind == "beta":
            out = np.zeros_like(z)
            inside = z < 1.0
            zi = z[inside]
            out[inside] = zi ** (self._e / self._eta) \
                * (1.0 - zi ** (1.0 / self._eta)) ** (self._b - 1.0) \
                / (self._eta * math.gamma(self._b))
        elif self._kind == "series":
            table = self._table()
            lo, hi = self._window
            out = np.zeros_like(xi)
            mid = (xi >= lo) & (xi <= hi)
            out[mid] = table(np.log(xi[mid]))
            head = xi < lo
            if np.any(head):
                x0, y0, slope = self._head
                out[head] = y0 * (xi[head] / x0) ** slope
            past = xi > hi
            if np.any(past):
                if ev.d.delta_cap > 0 and ev.shaped:
                    zp = ev.spec.c * xi[past]
                    if ev._asym_scale is None:
                        ev._asymptotic(ev.x_cut)
                    out[past] = ev._asym_scale * zp ** ev.tail_exponent \
                        * np.exp(-ev.rate * zp ** ev.power)
                elif ev.d.delta_cap == 0.0:
                    edge = np.clip(
                        (ev.x_edge - xi[past]) / (ev.x_edge - hi), 0.0, None)
                    ref = self._edge_ref(hi)
                    if ref != 0.0:
                        vals = np.zeros_like(edge)
                        pos = edge > 0.0
                        vals[pos] = ref * edge[pos] ** (-ev.d.mu - 1.0)
                        out[past] = vals
                # Otherwise the budget is exhausted: the envelope beyond
                # is below exp(-_TABLE_CAP) of scale, negligible here.
        else:
            out = np.array([self._pointwise(float(v)) for v in xs])
            return float(out[0]) if scalar else out
        return float(out[0]) if scalar else out

    def _edge_ref(self, sliver: float) -> float:
        if self.evaluator._edge_ref is None:
            self.evaluator._edge_ref = self.evaluator._eval(sliver)[0]
        return self.evaluator._edge_ref

    def _pointwise(self, x: float) -> float:
        value, _, mode = self.evaluator(x)
        return 0.0 if mode == "skipped" else value


class _CompiledComposite:
    """Nested-integral evaluation on fixed Gauss-Legendre panels in log t.

    A coarse scan locates the live window; panel boundaries snap to the
    support edges of leaf factors so each panel sees a smooth integrand.
    Fixed panels keep the error systematic and smooth in x, which lets
    composites nest without feeding noise into the level above.
    """

    edges = ()

    def __init__(self, kernel, measure, eta, sigma, arg_sign):
        self.kernel = kernel
        self.measure = measure
        self.eta = eta
        self.sigma = sigma
        self.arg_sign = arg_sign

    def _integrand(self, x: float, us: np.ndarray) -> np.ndarray:
        t_args = x * np.exp(self.arg_sign * self.sigma * us)
        return np.exp(self.eta * us) * self.kernel(t_args) \
            * self.measure(np.exp(us))

    def _breaks(self, x: float, lo: float, hi: float) -> list:
        breaks = []
        for edge in self.measure.edges:
            breaks.append(math.log(edge))
        for edge in self.kernel.edges:
            breaks.append(
                (math.log(edge) - math.log(x)) / (self.arg_sign * self.sigma))
        return sorted(b for b in breaks if lo < b < hi)

    def _scalar(self, x: float) -> float:
        # Wide scan: inverted all-upper factors decay only algebraically,
        # so the live window can stretch tens of log units.
        us = np.linspace(-40.0, 40.0, 321)
        vals = np.abs(self._integrand(x, us))
        peak = vals.max()
        if peak == 0.0:
            return 0.0
        alive = vals > peak * 1e-13
        first = int(np.argmax(alive))
        last = len(alive) - 1 - int(np.argmax(alive[::-1]))
        lo, hi = us[max(0, first - 1)], us[min(len(us) - 1, last + 1)]
        points = [lo] + self._breaks(x, lo, hi) + [hi]
        nodes = []
        weights = []
        for a, b in zip(points[:-1], points[1:]):
            panels = max(1, math.ceil((b - a) / 0.4))
            for k in range(panels):
                pa = a + (b - a) * k / panels
                pb = a + (b - a) * (k + 1) / panels
                mid, half = 0.5 * (pa + pb), 0.5 * (pb - pa)
                nodes.append(mid + half * _GL_NODES)
                weights.append(half * _GL_WEIGHTS)
        nodes = np.concatenate(nodes)
        weights = np.concatenate(weights)
        return float(np.dot(weights, self._integrand(x, nodes)))

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        if xs.ndim == 0:
            return self._scalar(float(xs))
        return np.array([self._scalar(float(v)) for v in xs])


def _compile(node: DecompNode):
    if node.kernel is None:
        return _CompiledLeaf(node.spec)
    return _CompiledComposite(
        _compile(node.kernel), _compile(node.measure),
        node.eta, node.sigma, node.arg_sign)


# -- certification --------------------------------------------------------------

def default_certification_grid() -> tuple:
    """64 log-spaced abscissas over [1e-3, 1e2]."""
    return tuple(float(x) for x in np.logspace(-3.0, 2.0, 64))


@dataclass(frozen=True)
class LeafFinding:
    spec: FoxHSpec
    kind: str
    min_value: float
    argmin: float
    evaluated: int
    skipped: int
    tail_guaranteed: bool
    errors: tuple = ()


@dataclass(frozen=True)
class CertificationReport:
    verdict: str
    findings: tuple
    grid_size: int
    budget_notes: tuple = ()


def certify_nonnegative(d: Decomposition, grid=None) -> CertificationReport:
    """Evaluate every leaf over the grid and aggregate the verdict.

    A value below -100 * tol at some point refutes; values in the gray
    band or evaluation failures leave the verdict inconclusive; clean
    leaves certify.  tol at each point is 1e-9 * (1 + |value|) plus
    eight times the evaluation noise floor, so cancellation-dominated
    values cannot refute, and points a density-shaped leaf cannot reach
    are covered by its positive leading asymptotic instead.
    """
    if grid is None:
        grid = default_certification_grid()
    grid = [float(x) for x in grid]
    if not grid or any(not x > 0 for x in grid):
        raise DomainError("certification grid must be positive and nonempty")
    findings = []
    refuted = False
    gray = False
    for leaf in d.leaves():
        evaluator = _LeafEvaluator(leaf.spec)
        min_value, argmin = math.inf, math.nan
        evaluated = skipped = 0
        errors = []
        for x in grid:
            try:
                value, noise, mode = evaluator(x)
            except FoxHError as err:
                errors.append(f"x={x:.6g}: {err.code}")
                gray = True
                continue
            if mode == "skipped":
                # No asymptotic sign guarantee covers this point.
                skipped += 1
                gray = True
                continue
            evaluated += 1
            if value < min_value:
                min_value, argmin = value, x
            tol = 1e-9 * (1.0 + abs(value)) + 8.0 * noise
            if value < -100.0 * tol:
                refuted = True
            elif value < -tol:
                gray = True
        findings.append(LeafFinding(
            spec=leaf.spec, kind=leaf.kind, min_value=min_value,
            argmin=argmin, evaluated=evaluated, skipped=skipped,
            tail_guaranteed=evaluator.tail_guaranteed,
            errors=tuple(errors)))
    if refuted:
        verdict = REFUTED
    elif gray:
        verdict = INCONCLUSIVE
    else:
        verdict = CERTIFIED
    return CertificationReport(
        verdict=verdict, findings=tuple(findings), grid_size=len(grid),
        budget_notes=d.budget_notes())


@dataclass(frozen=True)
class SignScanReport:
    min_value: float
    argmin: float
    dips: tuple

    @property
    def nonnegative(self) -> bool:
        return not self.dips


def scan_sign(spec: FoxHSpec, grid,
              value_fn: Optional[Callable[[float], float]] = None
              ) -> SignScanReport:
    """Min value and argmin over the grid, flagging dips below the
    noise-aware tolerance.  value_fn overrides the evaluator (used by
    the harness self-test with a deliberately sign-flipped series)."""
    grid = [float(x) for x in grid]
    if not grid or any(not x > 0 for x in grid):
        raise DomainError("scan grid must be positive and nonempty")
    evaluator = None if value_fn is not None else _LeafEvaluator(spec)
    min_value, argmin = math.inf, math.nan
    dips = []
    for x in grid:
        if value_fn is not None:
            value = float(value_fn(x))
            noise = 4.0 * _EPS * (1.0 + abs(value))
        else:
            value, noise, mode = evaluator(x)
            if mode == "skipped":
                continue
        if value < min_value:
            min_value, argmin = value, x
        if value < -(1e-9 * (1.0 + abs(value)) + 8.0 * noise):
            dips.append((x, value))
    return SignScanReport(
        min_value=min_value, argmin=argmin, dips=tuple(dips))
