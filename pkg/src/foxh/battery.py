"""Closed-form battery: named engine-vs-oracle cross-checks.

Each entry pins one classical identity to the evaluation machinery. The
engine side runs through the residue series, contour quadrature, the
Wright series, or a class-level transform; the oracle side is the
matching independent formula from `reference`. Entries carry their own
grid and tolerance so the battery is runnable as a single call from
tests and from the command line.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .classes import ClassSpec, build_class, density_eval, laplace_transform
from .core import FoxHSpec
from .errors import FoxHError, UnknownFixtureError
from .evaluate import (
    eval_auto,
    eval_mellin_barnes,
    eval_residue_series,
    eval_wright_series,
)
from .reference import reference_eval

__all__ = [
    "BatteryEntry",
    "BatteryResult",
    "CompareRow",
    "battery_entries",
    "oracle_compare",
    "run_battery",
]


@dataclass(frozen=True)
class BatteryEntry:
    name: str
    fixture: str
    route: str
    grid: tuple
    engine: Callable[[float], float]
    tol: float = 1e-6
    # optional direct spec route, used by oracle_compare; spec_scale
    # maps the raw evaluation onto the oracle's normalization
    spec: Optional[FoxHSpec] = None
    spec_scale: float = 1.0

    def oracle(self, x: float) -> float:
        return reference_eval(self.fixture, x)


@dataclass(frozen=True)
class BatteryResult:
    name: str
    route: str
    tol: float
    max_rel_err: float
    worst_x: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol


@dataclass(frozen=True)
class CompareRow:
    name: str
    x: float
    oracle: float
    series: float
    quadrature: float


def _log_grid(lo: float, hi: float, n: int) -> tuple:
    return tuple(float(x) for x in np.geomspace(lo, hi, n))


def _entries() -> tuple:
    exp_spec = FoxHSpec(m=1, n=0, p=0, q=1, upper=(), lower=[(0.0, 1.0)])

    sg_e, sg_eta = 0.7, 1.4
    sg_spec = FoxHSpec(m=1, n=0, p=0, q=1, upper=(), lower=[(sg_e, sg_eta)])
    sg_norm = math.gamma(sg_e + sg_eta)

    beta_cs = ClassSpec(tag="C2", beta_block=[(0.5, 1.0, 2.0)])
    beta_spec, beta_norm = build_class(beta_cs)

    bessel_spec = FoxHSpec(m=2, n=0, p=0, q=2, upper=(),
                           lower=[(-0.25, 0.5), (0.25, 0.5)])
    bessel_norm = math.gamma(0.25) * math.gamma(0.75)

    ig_rho = 0.3
    ig_spec = FoxHSpec(m=2, n=0, p=1, q=2, upper=[(1.0, 1.0)],
                       lower=[(0.0, 1.0), (ig_rho, 1.0)])
    ig_norm = math.gamma(ig_rho + 1.0)

    # two equal lower rows put a double pole at every nonpositive
    # integer, so only the contour route applies
    e1_spec = FoxHSpec(m=2, n=0, p=1, q=2, upper=[(1.0, 1.0)],
                       lower=[(0.0, 1.0), (0.0, 1.0)])

    mw_spec = FoxHSpec(m=1, n=0, p=1, q=1, upper=[(0.5, 0.5)],
                       lower=[(0.0, 1.0)])

    ku_a, ku_b = 1.5, 2.75
    ku_cs = ClassSpec(tag="C2", beta_block=[(ku_a - 1.0, 1.0, ku_b - ku_a)])
    ku_spec = FoxHSpec(m=1, n=1, p=1, q=2, upper=[(1.0 - ku_a, 1.0)],
                       lower=[(0.0, 1.0), (1.0 - ku_b, 1.0)])
    ku_scale = math.gamma(ku_b) / math.gamma(ku_a)

    gh_a, gh_b, gh_c = 0.8, 1.3, 2.1
    gh_spec = FoxHSpec(m=1, n=2, p=2, q=2,
                       upper=[(1.0 - gh_a, 1.0), (1.0 - gh_b, 1.0)],
                       lower=[(0.0, 1.0), (1.0 - gh_c, 1.0)])
    gh_scale = math.gamma(gh_c) / (math.gamma(gh_a) * math.gamma(gh_b))

    return (
        BatteryEntry(
            name="exp", fixture="exp", route="residue series",
            grid=_log_grid(0.01, 8.0, 9),
            engine=lambda x: float(eval_auto(exp_spec, x)),
            spec=exp_spec),
        BatteryEntry(
            name="stretched_gamma", route="residue series",
            fixture=f"stretched_gamma[e={sg_e},eta={sg_eta}]",
            grid=_log_grid(0.01, 8.0, 9),
            engine=lambda x: float(eval_auto(sg_spec, x)) / sg_norm,
            spec=sg_spec, spec_scale=1.0 / sg_norm),
        BatteryEntry(
            name="beta", fixture="beta[e=0.5,eta=1.0,b=2.0]",
            route="residue series",
            grid=tuple(float(x) for x in np.linspace(0.05, 0.85, 8)),
            engine=lambda x: density_eval(beta_cs, x),
            spec=beta_spec, spec_scale=1.0 / beta_norm.k_value),
        BatteryEntry(
            name="bessel_k_half", fixture="bessel_k_half",
            route="residue series", grid=_log_grid(0.02, 4.0, 8),
            engine=lambda x: float(eval_auto(bessel_spec, x)) / bessel_norm,
            spec=bessel_spec, spec_scale=1.0 / bessel_norm),
        BatteryEntry(
            name="incomplete_gamma",
            fixture=f"incomplete_gamma[rho={ig_rho}]",
            route="residue series", grid=_log_grid(0.01, 6.0, 8),
            engine=lambda x: float(eval_auto(ig_spec, x)),
            spec=ig_spec),
        BatteryEntry(
            name="exp_integral", fixture="exp_integral",
            route="contour quadrature", grid=_log_grid(0.1, 3.0, 6),
            engine=lambda x: float(eval_mellin_barnes(e1_spec, x)),
            spec=e1_spec),
        BatteryEntry(
            name="mittag_leffler_half", fixture="mittag_leffler[beta=0.5]",
            route="Wright series", grid=(0.1, 0.25, 0.5, 1.0, 2.0, 3.0),
            engine=lambda s: float(eval_wright_series(
                [(1.0, 1.0)], [(1.0, 0.5)], -s))),
        BatteryEntry(
            name="mittag_leffler_one", fixture="mittag_leffler[beta=1]",
            route="Wright series", grid=(0.1, 0.5, 1.0, 2.0, 5.0),
            engine=lambda s: float(eval_wright_series(
                [(1.0, 1.0)], [(1.0, 1.0)], -s))),
        BatteryEntry(
            name="mwright_half", fixture="mwright[beta=0.5]",
            route="residue series", grid=_log_grid(0.05, 4.0, 8),
            engine=lambda x: float(eval_auto(mw_spec, x)),
            spec=mw_spec),
        BatteryEntry(
            name="kummer_1f1", fixture=f"kummer_1f1[a={ku_a},b={ku_b}]",
            route="class transform", grid=(0.1, 0.3, 1.0, 2.0, 5.0),
            engine=lambda s: laplace_transform(ku_cs, s),
            spec=ku_spec, spec_scale=ku_scale),
        BatteryEntry(
            name="gauss_2f1",
            fixture=f"gauss_2f1[a={gh_a},b={gh_b},c={gh_c}]",
            route="residue series", grid=(0.05, 0.2, 0.4, 0.6, 0.8),
            engine=lambda s: float(eval_auto(gh_spec, s)) * gh_scale,
            spec=gh_spec, spec_scale=gh_scale),
    )


_BATTERY = _entries()


def battery_entries() -> tuple:
    """The registered battery, in fixed order."""
    return _BATTERY


def _lookup(name: str) -> BatteryEntry:
    for entry in _BATTERY:
        if entry.name == name:
            return entry
    known = ", ".join(e.name for e in _BATTERY)
    raise UnknownFixtureError(f"unknown battery entry {name!r} (known: "
                              f"{known})")


def run_battery(names=None) -> tuple:
    """Run the cross-checks and report the worst relative error of each
    entry over its grid."""
    entries = _BATTERY if names is None else tuple(_lookup(n) for n in names)
    results = []
    for entry in entries:
        worst, worst_x = 0.0, entry.grid[0]
        for x in entry.grid:
            expected = entry.oracle(x)
            rel = abs(entry.engine(x) - expected) / abs(expected)
            if rel > worst:
                worst, worst_x = rel, x
        results.append(BatteryResult(
            name=entry.name, route=entry.route, tol=entry.tol,
            max_rel_err=worst, worst_x=worst_x))
    return tuple(results)


def oracle_compare(name: str) -> tuple:
    """Evaluate one spec-backed entry by both direct routes next to its
    oracle; routes whose preconditions fail are reported as nan."""
    entry = _lookup(name)
    if entry.spec is None:
        raise UnknownFixtureError(
            f"battery entry {name!r} has no direct spec route")
    rows = []
    for x in entry.grid:
        values = []
        for fn in (eval_residue_series, eval_mellin_barnes):
            try:
                values.append(float(fn(entry.spec, x)) * entry.spec_scale)
            except FoxHError:
                values.append(math.nan)
        rows.append(CompareRow(name=entry.name, x=x, oracle=entry.oracle(x),
                               series=values[0], quadrature=values[1]))
    return tuple(rows)
