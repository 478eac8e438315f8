"""Command-line front end: JSON documents in, CSV tables and JSON
reports out.

One verb per invocation. Numeric CSV cells carry 17 significant digits
so doubles survive a round trip through the files; report verbs emit
sorted-key JSON. Identical command lines (and seeds) produce
byte-identical output.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .battery import battery_entries, oracle_compare, run_battery
from .classes import (
    ClassSpec,
    build_class,
    check_complete_monotonicity,
    class_lt_params,
    classspec_from_json,
    classspec_to_json,
    density_eval,
    laplace_transform,
    moment,
)
from .core import FoxHSpec, derive_params
from .errors import (
    DomainError,
    NumericalError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .evaluate import eval_auto, tail_behavior
from .positivity import (
    CERTIFIED,
    Decomposition,
    DecompNode,
    certify_nonnegative,
    class_decomposition,
    default_certification_grid,
)
from .variates import sample as draw_samples

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_EVAL = 4
EXIT_ACCEPTANCE = 5

VERBS = ("eval", "lt", "moments", "sample", "table", "tails", "check-cm",
         "certify", "oracle-compare", "fixtures")

_SPEC_KEYS = ("m", "n", "p", "q", "upper", "lower")
_CLASS_KEYS = ("class", "gamma_block", "beta_block", "wright_block")


def parse_spec(document: str):
    """Parse a JSON document into a FoxHSpec or a ClassSpec.

    Class documents are recognized by a "class" tag or any parameter
    block; spec documents by the m/n/p/q/upper/lower keys.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("document must be a JSON object")
    if any(k in obj for k in _CLASS_KEYS):
        try:
            return classspec_from_json(obj)
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"malformed class document: {exc}") from exc
    if any(k in obj for k in _SPEC_KEYS):
        missing = [k for k in _SPEC_KEYS if k not in obj]
        if missing:
            raise ParseError(f"spec document missing keys {missing}")
        return FoxHSpec.from_json(obj)
    raise ParseError(
        "document is neither a spec (m/n/p/q/upper/lower keys) nor a "
        "class (class/*_block keys)")


def serialize_spec(parsed) -> str:
    """Inverse of parse_spec, normalized key order."""
    if isinstance(parsed, ClassSpec):
        doc = classspec_to_json(parsed)
    else:
        doc = parsed.to_json()
    return json.dumps(doc, sort_keys=True)


def parse_grid(text: str) -> tuple:
    """Parse min:max:n[:log] into an evaluation grid."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise ParseError(f"grid must be min:max:n[:log], got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ParseError(
            f"grid must be min:max:n[:log], got {text!r}") from exc
    if n < 1:
        raise DomainError(f"grid needs n >= 1, got {n}")
    if n == 1:
        return (lo,)
    if len(parts) == 4:
        if lo <= 0:
            raise DomainError("log grid endpoints must be positive")
        return tuple(float(x) for x in np.geomspace(lo, hi, n))
    return tuple(float(x) for x in np.linspace(lo, hi, n))


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_report(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _finite_or_none(value):
    return value if math.isfinite(value) else None


def _read_document(args) -> str:
    if args.input is None:
        raise ParseError(f"{args.verb} needs --input (path or inline JSON)")
    text = args.input
    if not text.lstrip().startswith("{") and os.path.exists(text):
        with open(text, "r", encoding="utf-8") as fh:
            return fh.read()
    return text


def _need_class(parsed, verb):
    if not isinstance(parsed, ClassSpec):
        raise ShapeError(
            f"{verb} is defined per class member; pass a class document")
    return parsed


def _grid(args, default: str) -> tuple:
    return parse_grid(args.grid if args.grid is not None else default)


def _cmd_eval(args):
    parsed = parse_spec(_read_document(args))
    grid = _grid(args, "0.01:10:25:log")
    tol = args.tol if args.tol is not None else 1e-10
    if isinstance(parsed, ClassSpec):
        values = [density_eval(parsed, x, tol) for x in grid]
    else:
        values = [float(eval_auto(parsed, x, tol)) for x in grid]
    return _csv(("x", "density"), zip(grid, values)), EXIT_OK


def _cmd_lt(args):
    cs = _need_class(parse_spec(_read_document(args)), "lt")
    grid = _grid(args, "0:5:21")
    tol = args.tol if args.tol is not None else 1e-10
    rows = [(s, laplace_transform(cs, s, tol)) for s in grid]
    return _csv(("s", "phi"), rows), EXIT_OK


def _cmd_moments(args):
    cs = _need_class(parse_spec(_read_document(args)), "moments")
    top = args.order if args.order is not None else 3
    rows = [(order, moment(cs, order)) for order in range(top + 1)]
    return _csv(("order", "value"), rows), EXIT_OK


def _cmd_sample(args):
    cs = _need_class(parse_spec(_read_document(args)), "sample")
    n = args.points if args.points is not None else 1000
    draws = draw_samples(cs, n, args.seed)
    return _csv(("sample",), ((float(v),) for v in draws)), EXIT_OK


def _cmd_table(args):
    cs = _need_class(parse_spec(_read_document(args)), "table")
    rows = []
    if cs.gamma_block or cs.beta_block or cs.wright_block:
        spec, _ = build_class(cs)
        d = derive_params(spec)
        rows.append(("density", d.a_star, d.delta_cap, d.delta_small, d.mu))
    t = class_lt_params(cs)
    rows.append(("transform", t.a_star, t.delta_cap, t.delta_small, t.mu))
    header = ("side", "a_star", "delta_cap", "delta_small", "mu")
    return _csv(header, rows), EXIT_OK


def _cmd_tails(args):
    parsed = parse_spec(_read_document(args))
    spec = build_class(parsed)[0] if isinstance(parsed, ClassSpec) else parsed
    t = tail_behavior(spec)
    row = (t.infinity_exponent, t.infinity_rate, t.infinity_power,
           t.zero_exponent, ";".join(str(j) for j in t.argmin_indices))
    header = ("infinity_exponent", "infinity_rate", "infinity_power",
              "zero_exponent", "argmin_indices")
    return _csv(header, [row]), EXIT_OK


def _cmd_check_cm(args):
    cs = _need_class(parse_spec(_read_document(args)), "check-cm")
    grid = _grid(args, "0.05:5:16:log")
    top = args.order if args.order is not None else 6
    report = check_complete_monotonicity(cs, grid, max_order=top)
    doc = {
        "ok": report.ok,
        "max_order": report.max_order,
        "points": len(report.points),
        "violations": [
            {"s": v.s, "order": v.order, "estimate": v.estimate,
             "tolerance": v.tolerance}
            for v in report.violations
        ],
    }
    return _json_report(doc), EXIT_OK if report.ok else EXIT_ACCEPTANCE


def _cmd_certify(args):
    parsed = parse_spec(_read_document(args))
    if isinstance(parsed, ClassSpec):
        decomposition = class_decomposition(parsed)
    else:
        decomposition = Decomposition(
            root=DecompNode(spec=parsed, kind="atomic"))
    grid = (parse_grid(args.grid) if args.grid is not None
            else default_certification_grid())
    report = certify_nonnegative(decomposition, grid)
    doc = {
        "verdict": report.verdict,
        "grid_size": report.grid_size,
        "budget_notes": list(report.budget_notes),
        "findings": [
            {
                "spec": f.spec.to_json(),
                "kind": f.kind,
                "min_value": _finite_or_none(f.min_value),
                "argmin": _finite_or_none(f.argmin),
                "evaluated": f.evaluated,
                "skipped": f.skipped,
                "tail_guaranteed": f.tail_guaranteed,
                "errors": list(f.errors),
            }
            for f in report.findings
        ],
        "decomposition": decomposition.to_json(),
    }
    code = EXIT_OK if report.verdict == CERTIFIED else EXIT_ACCEPTANCE
    return _json_report(doc), code


def _cmd_oracle_compare(args):
    if args.input is not None:
        names = [args.input]
    else:
        names = [e.name for e in battery_entries() if e.spec is not None]
    tol = args.tol if args.tol is not None else 1e-6
    rows, worst_excess = [], 0.0
    for name in names:
        for r in oracle_compare(name):
            deltas = [abs(v - r.oracle) if math.isfinite(v) else math.nan
                      for v in (r.series, r.quadrature)]
            for d in deltas:
                if math.isfinite(d):
                    worst_excess = max(
                        worst_excess, d / (tol * (1.0 + abs(r.oracle))))
            rows.append((r.name, r.x, r.oracle, r.series, r.quadrature,
                         deltas[0], deltas[1]))
    header = ("name", "x", "oracle", "series", "quadrature",
              "series_delta", "quadrature_delta")
    code = EXIT_OK if worst_excess <= 1.0 else EXIT_ACCEPTANCE
    return _csv(header, rows), code


def _cmd_fixtures(args):
    results = run_battery()
    rows = [(r.name, r.route, r.max_rel_err, r.worst_x, r.tol,
             "pass" if r.passed else "FAIL") for r in results]
    header = ("name", "route", "max_rel_err", "worst_x", "tol", "status")
    ok = all(r.passed for r in results)
    return _csv(header, rows), EXIT_OK if ok else EXIT_ACCEPTANCE


_HANDLERS = {
    "eval": _cmd_eval,
    "lt": _cmd_lt,
    "moments": _cmd_moments,
    "sample": _cmd_sample,
    "table": _cmd_table,
    "tails": _cmd_tails,
    "check-cm": _cmd_check_cm,
    "certify": _cmd_certify,
    "oracle-compare": _cmd_oracle_compare,
    "fixtures": _cmd_fixtures,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foxh",
        description="Fox-H density toolkit: evaluation, transforms, "
                    "moments, sampling, asymptotics, certification, and "
                    "the closed-form cross-check battery.")
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--input",
                        help="path or inline JSON (oracle-compare: a "
                             "battery entry name)")
    parser.add_argument("--output", help="output path (default: stdout)")
    parser.add_argument("--grid", help="evaluation grid as min:max:n[:log]")
    parser.add_argument("--tol", type=float, help="evaluation tolerance")
    parser.add_argument("--seed", type=int, default=0,
                        help="sampling seed (default 0)")
    parser.add_argument("--order", type=int,
                        help="max order for moments/check-cm")
    parser.add_argument("--points", type=int,
                        help="sample count for the sample verb")
    return parser


def _write(path, text) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        text, code = _HANDLERS[args.verb](args)
    except ParseError as exc:
        print(f"foxh {args.verb}: [{exc.code}] {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"foxh {args.verb}: [{exc.code}] {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"foxh {args.verb}: [{exc.code}] {exc}", file=sys.stderr)
        return EXIT_EVAL
    _write(args.output, text)
    return code


if __name__ == "__main__":
    sys.exit(main())
