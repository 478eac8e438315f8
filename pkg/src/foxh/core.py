"""Parameter records for Fox-H kernels and their derived quantities.

A Fox-H function H^{m,n}_{p,q}(z) is determined by two ordered lists of
(coefficient, scale) pairs plus the block splits m, n.  Everything the
numerical paths need downstream flows from these records:

* derived scalars (a*, a1*, a2*, Delta, delta, mu) controlling contour
  decay, series convergence, and asymptotics;
* the two pole lattices of the integrand's gamma factors;
* validity checks for treating H as a probability density on (0, inf);
* the parameter map sending a density spec to the spec of its Laplace
  transform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import fsum, log, exp
from typing import Iterable, Sequence

from .errors import (
    InvalidDensityError,
    PoleCollisionError,
    ShapeError,
    ValidationError,
)

# Two poles are treated as coincident when closer than this, relatively.
POLE_COINCIDENCE_TOL = 1e-12
# Default lattice horizon for the pole-separation scan; collisions are
# lattice-periodic so a modest horizon is decisive in practice.
SEPARATION_HORIZON = 64


@dataclass(frozen=True)
class ParamPair:
    """One (coefficient, scale) gamma-argument pair: Gamma(coeff + scale*s)."""

    coeff: float
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "scale", float(self.scale))
        if not self.scale > 0:
            raise ValidationError(
                f"scale must be > 0, got {self.scale}", coeff=self.coeff
            )


def _as_pairs(items: Iterable) -> tuple:
    out = []
    for it in items:
        if isinstance(it, ParamPair):
            out.append(it)
        else:
            c, s = it
            out.append(ParamPair(float(c), float(s)))
    return tuple(out)


@dataclass(frozen=True)
class FoxHSpec:
    """Parameter record of H^{m,n}_{p,q}(c x | upper; lower).

    upper holds the p pairs (a_i, alpha_i), lower the q pairs
    (b_j, beta_j).  The first n upper pairs and first m lower pairs are
    the "front" blocks whose gammas sit in the kernel numerator.  The
    argument scale c multiplies x; nothing else depends on it.
    """

    m: int
    n: int
    p: int
    q: int
    upper: Sequence[ParamPair]
    lower: Sequence[ParamPair]
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "upper", _as_pairs(self.upper))
        object.__setattr__(self, "lower", _as_pairs(self.lower))
        object.__setattr__(self, "c", float(self.c))
        if not (0 <= self.n <= self.p):
            raise ShapeError(f"need 0 <= n <= p, got n={self.n}, p={self.p}")
        if not (0 <= self.m <= self.q):
            raise ShapeError(f"need 0 <= m <= q, got m={self.m}, q={self.q}")
        if len(self.upper) != self.p:
            raise ShapeError(
                f"upper has {len(self.upper)} pairs, expected p={self.p}"
            )
        if len(self.lower) != self.q:
            raise ShapeError(
                f"lower has {len(self.lower)} pairs, expected q={self.q}"
            )
        if not self.c > 0:
            raise ValidationError(f"argument scale c must be > 0, got {self.c}")

    # -- JSON round trip ---------------------------------------------------

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "upper": [[pp.coeff, pp.scale] for pp in self.upper],
            "lower": [[pp.coeff, pp.scale] for pp in self.lower],
            "c": self.c,
        }

    @classmethod
    def from_json(cls, obj) -> "FoxHSpec":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        try:
            return cls(
                m=int(obj["m"]),
                n=int(obj["n"]),
                p=int(obj["p"]),
                q=int(obj["q"]),
                upper=[(float(a), float(al)) for a, al in obj["upper"]],
                lower=[(float(b), float(be)) for b, be in obj["lower"]],
                c=float(obj.get("c", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ShapeError(f"malformed spec document: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    # -- block views ---------------------------------------------------------

    @property
    def upper_front(self) -> tuple:
        """(a_i, alpha_i) for i <= n: numerator gammas Gamma(1-a_i-alpha_i s)."""
        return self.upper[: self.n]

    @property
    def upper_back(self) -> tuple:
        return self.upper[self.n:]

    @property
    def lower_front(self) -> tuple:
        """(b_j, beta_j) for j <= m: numerator gammas Gamma(b_j+beta_j s)."""
        return self.lower[: self.m]

    @property
    def lower_back(self) -> tuple:
        return self.lower[self.m:]

    def is_density_shaped(self) -> bool:
        """True when the spec has the m=q, n=0 shape used for densities."""
        return self.n == 0 and self.m == self.q


@dataclass(frozen=True)
class DerivedParams:
    """Contour/asymptotics scalars of a spec.

    a1_star and a2_star split a_star by the two pole families;
    delta_cap (Delta) orients the residue series (sum over the lower
    lattice converges for Delta > 0); delta_small scales the argument in
    every exponential estimate; mu drives the algebraic factor.
    """

    a_star: float
    a1_star: float
    a2_star: float
    delta_cap: float
    delta_small: float
    mu: float


def derive_params(spec: FoxHSpec) -> DerivedParams:
    """Compute (a*, a1*, a2*, Delta, delta, mu) from the parameter record.

    Sums use exact accumulation, so block-permutation invariance and the
    identities a* = a1* + a2*, Delta = a1* - a2* hold to the last ulp.
    """
    a1 = fsum(
        [pp.scale for pp in spec.lower_front]
        + [-pp.scale for pp in spec.upper_back]
    )
    a2 = fsum(
        [pp.scale for pp in spec.upper_front]
        + [-pp.scale for pp in spec.lower_back]
    )
    delta_small = exp(
        fsum(
            [pp.scale * log(pp.scale) for pp in spec.lower]
            + [-pp.scale * log(pp.scale) for pp in spec.upper]
        )
    )
    mu = fsum(
        [pp.coeff for pp in spec.lower]
        + [-pp.coeff for pp in spec.upper]
        + [(spec.p - spec.q) / 2.0]
    )
    return DerivedParams(
        a_star=a1 + a2,
        a1_star=a1,
        a2_star=a2,
        delta_cap=a1 - a2,
        delta_small=delta_small,
        mu=mu,
    )


@dataclass(frozen=True)
class PolePoint:
    """One pole of a kernel gamma factor: its location on the real axis,
    which parameter pair produced it, and the lattice index within that
    pair's arithmetic progression."""

    value: float
    source: int
    order: int


@dataclass(frozen=True)
class PoleSet:
    b_poles: tuple
    a_poles: tuple
    simple: bool


def _coincide(x: float, y: float) -> bool:
    return abs(x - y) <= POLE_COINCIDENCE_TOL * max(1.0, abs(x), abs(y))


def poles(spec: FoxHSpec, max_l: int, max_k: int) -> PoleSet:
    """Enumerate the two pole lattices.

    b-poles -(b_j+l)/beta_j for j < m, l = 0..max_l sit left of the
    contour; a-poles (1-a_i+k)/alpha_i for i < n, k = 0..max_k sit right.
    simple is True iff no two enumerated b-poles coincide (that is the
    flag the residue series cares about: coincident b-poles mean higher
    order residues).
    """
    if max_l < 0 or max_k < 0:
        raise ShapeError("pole horizons must be >= 0")
    b_poles = tuple(
        PolePoint(-(pp.coeff + l) / pp.scale, j, l)
        for j, pp in enumerate(spec.lower_front)
        for l in range(max_l + 1)
    )
    a_poles = tuple(
        PolePoint((1.0 - pp.coeff + k) / pp.scale, i, k)
        for i, pp in enumerate(spec.upper_front)
        for k in range(max_k + 1)
    )
    vals = sorted(pt.value for pt in b_poles)
    simple = all(
        not _coincide(vals[t], vals[t + 1]) for t in range(len(vals) - 1)
    )
    return PoleSet(b_poles=b_poles, a_poles=a_poles, simple=simple)


@dataclass(frozen=True)
class SeparationReport:
    ok: bool
    horizon: int


def validate_separation(
    spec: FoxHSpec, horizon: int = SEPARATION_HORIZON
) -> SeparationReport:
    """Check that no b-pole collides with an a-pole up to the horizon.

    Collision means alpha_i (b_j + l) = beta_j (a_i - k - 1) for some
    i < n, j < m and lattice indices k, l <= horizon, i.e. a pole of a
    numerator gamma of each family at the same point.  Raises
    POLE_COLLISION carrying the first violating (i, j, k, l).
    """
    for j, bp in enumerate(spec.lower_front):
        for i, ap in enumerate(spec.upper_front):
            for l in range(horizon + 1):
                b_val = -(bp.coeff + l) / bp.scale
                for k in range(horizon + 1):
                    a_val = (1.0 - ap.coeff + k) / ap.scale
                    if a_val > b_val and not _coincide(a_val, b_val):
                        break  # a_val grows with k; no later collision
                    if _coincide(a_val, b_val):
                        raise PoleCollisionError(
                            "pole families intersect",
                            i=i, j=j, k=k, l=l, value=b_val,
                        )
    return SeparationReport(ok=True, horizon=horizon)


@dataclass(frozen=True)
class DensityChecklist:
    """Per-assumption diagnostics for treating the spec as a density.

    upper_strip_ok: a_i + alpha_i < 1 on the front block, > 0 on the back
    block, and the front a-poles are simple.
    lower_strip_ok: b_j + beta_j > 0 on the front block, < 1 on the back.
    decay_ok: a* > 0, or a* = 0 with mu < -1.
    Non-negativity of the function itself is certified elsewhere.
    """

    upper_strip_ok: bool
    lower_strip_ok: bool
    decay_ok: bool
    notes: tuple = ()

    @property
    def ok(self) -> bool:
        return self.upper_strip_ok and self.lower_strip_ok and self.decay_ok


def validate_density_conditions(spec: FoxHSpec) -> DensityChecklist:
    notes = []

    upper_ok = True
    for i, pp in enumerate(spec.upper):
        s = pp.coeff + pp.scale
        if i < spec.n and not s < 1:
            upper_ok = False
            notes.append(f"upper[{i}]: a+alpha = {s} not < 1")
        if i >= spec.n and not s > 0:
            upper_ok = False
            notes.append(f"upper[{i}]: a+alpha = {s} not > 0")
    if spec.n > 0:
        front_a = poles(spec, 0, SEPARATION_HORIZON).a_poles
        vals = sorted(pt.value for pt in front_a)
        for t in range(len(vals) - 1):
            if _coincide(vals[t], vals[t + 1]):
                upper_ok = False
                notes.append(f"a-poles coincide near {vals[t]}")
                break

    lower_ok = True
    for j, pp in enumerate(spec.lower):
        s = pp.coeff + pp.scale
        if j < spec.m and not s > 0:
            lower_ok = False
            notes.append(f"lower[{j}]: b+beta = {s} not > 0")
        if j >= spec.m and not s < 1:
            lower_ok = False
            notes.append(f"lower[{j}]: b+beta = {s} not < 1")

    dp = derive_params(spec)
    decay_ok = dp.a_star > 0 or (dp.a_star == 0.0 and dp.mu < -1)
    if not decay_ok:
        notes.append(f"a* = {dp.a_star}, mu = {dp.mu}: no integrable decay")

    return DensityChecklist(
        upper_strip_ok=upper_ok,
        lower_strip_ok=lower_ok,
        decay_ok=decay_ok,
        notes=tuple(notes),
    )


def lt_spec(spec: FoxHSpec) -> FoxHSpec:
    """Parameter record of the Laplace transform of the density spec.

    The density H^{m,n}_{p,q}(x | (a,alpha); (b,beta)) maps to
    H^{n+1,m}_{q,p+1}(s | (1-b_j-beta_j, beta_j)_q ;
                          (0,1), (1-a_i-alpha_i, alpha_i)_p),
    up to the 1/K normalization handled by the caller.  The list order
    puts the new front blocks (first n+1 lower pairs, first m upper
    pairs) in the right place automatically.  An argument scale c maps to
    1/c since rescaling x by c divides s by c.
    """
    # The empty kernel is the unit point mass: no density conditions can
    # hold (there is no density), but its transform exp(-s) is exact.
    if spec.p > 0 or spec.q > 0:
        check = validate_density_conditions(spec)
        if not check.ok:
            raise InvalidDensityError(
                "spec fails density conditions", notes=check.notes
            )
    upper_new = [
        (1.0 - pp.coeff - pp.scale, pp.scale) for pp in spec.lower
    ]
    lower_new = [(0.0, 1.0)] + [
        (1.0 - pp.coeff - pp.scale, pp.scale) for pp in spec.upper
    ]
    return FoxHSpec(
        m=spec.n + 1,
        n=spec.m,
        p=spec.q,
        q=spec.p + 1,
        upper=upper_new,
        lower=lower_new,
        c=1.0 / spec.c,
    )
