"""Batch front-end: parse field/symbol/scheme descriptions, run computations
or whole suites, and emit deterministic JSON or text reports.

Exit codes: 0 success or all-pass, 1 property violation (with witnesses in
the report), 2 malformed input (with position information where available).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from typing import Optional

from .fields import FieldError, Poly, RationalFunction, irreducibles, make_field, unit_factor
from . import cycles, milnor, schemes
from .milnor import FieldRef, KElement, KTheoryError, Place, cor_field, k_add, k_zero, symbol
from .premodule import (
    MUTANTS,
    SuiteConfig,
    check_relation,
    milnor_instance,
    mod_instance,
    run_relation_suite,
    twist_instance,
)
from .syntax import (
    ParseError,
    kelement_to_json,
    parse_field,
    parse_place,
    parse_poly,
    parse_rational,
    parse_symbol,
)


def _instance_by_name(name: str):
    if name == "milnor":
        return milnor_instance()
    if name.startswith("mod"):
        return mod_instance(int(name[3:]))
    if name.startswith("twist:"):
        return twist_instance(milnor_instance(), int(name.split(":")[1]))
    if name.startswith("mutant:"):
        key = name.split(":", 1)[1]
        if key not in MUTANTS:
            raise ParseError(f"unknown mutant {key!r}; choices: {sorted(MUTANTS)}")
        return MUTANTS[key]()
    raise ParseError(f"unknown instance {name!r}")


def _scheme_by_name(name: str, base, removed: list[str]):
    ff = FieldRef.rational(base, "t")
    if name == "A1":
        if removed:
            places = [parse_place(ff, s) for s in removed]
            return schemes.builtin("PUNCTURED_LINE", base=base, removed=places)
        return schemes.builtin("AFFINE_LINE", base=base)
    if name == "P1":
        return schemes.builtin("PROJ_LINE", base=base)
    if name == "SPEC":
        return schemes.builtin("SPEC", base=base)
    raise ParseError(f"unknown scheme {name!r} (expected A1, P1 or SPEC)")


def _emit(args, payload: dict, all_pass: bool = True) -> int:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.format == "text":
        lines = []
        _render_text(payload, lines, 0)
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all_pass else 1


def _render_text(node, lines: list[str], depth: int) -> None:
    pad = "  " * depth
    if isinstance(node, dict):
        for key in sorted(node):
            val = node[key]
            if isinstance(val, (dict, list)):
                lines.append(f"{pad}{key}:")
                _render_text(val, lines, depth + 1)
            else:
                lines.append(f"{pad}{key}: {val}")
    elif isinstance(node, list):
        for item in node:
            if isinstance(item, (dict, list)):
                _render_text(item, lines, depth)
            else:
                lines.append(f"{pad}- {item}")
    else:
        lines.append(f"{pad}{node}")


def _cmd_symbol(args) -> int:
    x = parse_symbol(args.symbol)
    return _emit(args, {"symbol": kelement_to_json(x), "zero": x.is_zero()})


def _cmd_residue(args) -> int:
    field = parse_field(args.field)
    if not field.is_rational:
        raise ParseError("residues live over function fields")
    place = parse_place(field, args.place)
    body = args.symbol.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ParseError("expected {entries} for --symbol", args.symbol)
    entries = [e.strip() for e in body[1:-1].split(",") if e.strip()]
    x = symbol(field, [parse_rational(field.base, e, field.var) for e in entries])
    out = milnor.residue(place, x)
    return _emit(args, {"residue": kelement_to_json(out)})


def _cmd_norm(args) -> int:
    src = parse_field(args.src)
    dst = parse_field(args.dst)
    if src.is_rational:
        fu = unit_factor(parse_rational(src.base, args.element, src.var))
        x = KElement(src, 1, fu)
    else:
        val = parse_poly(src.base, args.element, "z").coeff(0)
        x = milnor.k_unit_finite(src, val)
    out = cor_field(src, dst, x)
    return _emit(args, {"norm": kelement_to_json(out)})


def _cmd_diff(args) -> int:
    base = parse_field(args.field)
    if base.is_rational:
        raise ParseError("--field takes the base constant field, e.g. GF(3)")
    X = _scheme_by_name(args.scheme, base.base, args.removed)
    inst = _instance_by_name(args.instance)
    ff = X.function_field
    body = args.generic.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise ParseError("expected {entries} for --generic", args.generic)
    entries = [e.strip() for e in body[1:-1].split(",") if e.strip()]
    x = symbol(ff, [parse_rational(ff.base, e, ff.var) for e in entries])
    c = cycles.CycleClass.from_generic(X, inst, len(entries), x)
    dc = cycles.differential(c)
    return _emit(args, {"differential": dc.to_dict()})


def _cmd_cohomology(args) -> int:
    base = parse_field(args.field)
    X = _scheme_by_name(args.scheme, base.base, args.removed)
    inst = _instance_by_name(args.instance)
    pres = cycles.cohomology_window(X, inst, args.p, args.n, args.degree_bound)
    return _emit(args, {"cohomology": pres.to_dict()})


def _cmd_axioms(args) -> int:
    inst = _instance_by_name(args.instance)
    cfg = SuiteConfig(trials=args.trials, seed=args.seed)
    if args.relations:
        wanted = [r.strip() for r in args.relations.split(",")]
        reports = [
            check_relation(inst, rid, trials=args.trials, seed=args.seed, cfg=cfg)
            for rid in wanted
        ]
    else:
        reports = run_relation_suite(inst, cfg)
    all_pass = all(r.passed for r in reports)
    payload = {
        "instance": getattr(inst, "name", args.instance),
        "seed": args.seed,
        "all_pass": all_pass,
        "reports": [r.to_dict() for r in reports],
    }
    return _emit(args, payload, all_pass)


def _cmd_reciprocity(args) -> int:
    base = parse_field(args.field)
    if base.is_rational:
        raise ParseError("--field takes the base constant field, e.g. GF(3)")
    F = base.base
    ff = FieldRef.rational(F, "t")
    rF = FieldRef.finite(F)
    failures = []
    for i in range(args.trials):
        rng = random.Random(f"reciprocity:{args.seed}:{F.order}:{i}")
        entries = []
        for _ in range(2):
            fac = []
            for _ in range(rng.randrange(1, 3)):
                d = rng.randrange(1, 3)
                pool = irreducibles(F, d)
                fac.append((pool[rng.randrange(len(pool))], rng.choice([-2, -1, 1, 2])))
            from .fields import FactoredUnit

            entries.append(FactoredUnit.of(F.elem(rng.randrange(1, F.order)), fac))
        x = symbol(ff, entries)
        total = k_zero(rF, 1)
        for pl, _e in x.payload:
            total = k_add(total, cor_field(FieldRef.residue(pl), rF, milnor.residue(pl, x)))
        total = k_add(total, milnor.residue(Place.infinite(ff), x))
        if not total.is_zero():
            failures.append({"trial": i, "symbol": kelement_to_json(x)})
    payload = {
        "field": repr(rF),
        "trials": args.trials,
        "seed": args.seed,
        "all_pass": not failures,
        "failures": failures,
    }
    return _emit(args, payload, not failures)


def _cmd_trace(args) -> int:
    base = parse_field(args.field)
    if args.scheme != "P1":
        raise ParseError("the trace runs on P1 models")
    text = args.map.replace(" ", "")
    if "->" not in text:
        raise ParseError("expected a map like t->t^2", args.map)
    var, image = text.split("->", 1)
    g = parse_poly(base.base, image, var or "t")
    src = schemes.builtin("PROJ_LINE", base=base.base)
    dst = schemes.builtin("PROJ_LINE", base=base.base)
    f = cycles.FiniteCurveMap("subst", src, dst, g=g)
    value = cycles.trace(f)
    return _emit(args, {"map": text, "trace": value, "degree": f.degree()})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kcycles",
        description="Exact Milnor K-theory, premodule axiom checking, and cycle complexes",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("json", "text"), default="json")
        p.add_argument("--out", default=None, help="write the report to a file")
        p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("symbol", help="normalize a symbol literal")
    p.add_argument("--symbol", required=True, help='e.g. "{t, t+1}@GF(3)(t)"')
    common(p)
    p.set_defaults(fn=_cmd_symbol)

    p = sub.add_parser("residue", help="tame symbol at a place")
    p.add_argument("--field", required=True, help='e.g. "GF(5)(t)"')
    p.add_argument("--place", required=True, help='monic irreducible or "inf"')
    p.add_argument("--symbol", required=True, help='entries, e.g. "{t,2}"')
    common(p)
    p.set_defaults(fn=_cmd_residue)

    p = sub.add_parser("norm", help="corestriction of a unit class")
    p.add_argument("--src", required=True, help="field of the element")
    p.add_argument("--dst", required=True, help="target of the transfer")
    p.add_argument("--element", required=True)
    common(p)
    p.set_defaults(fn=_cmd_norm)

    p = sub.add_parser("diff", help="differential of a generic-point class")
    p.add_argument("--scheme", default="A1")
    p.add_argument("--field", required=True, help="base field, e.g. GF(3)")
    p.add_argument("--removed", action="append", default=[])
    p.add_argument("--generic", required=True, help='symbol entries, e.g. "{t,t+1}"')
    p.add_argument("--instance", default="milnor")
    common(p)
    p.set_defaults(fn=_cmd_diff)

    p = sub.add_parser("cohomology", help="window presentation of A^p")
    p.add_argument("--scheme", default="P1")
    p.add_argument("--field", required=True)
    p.add_argument("--removed", action="append", default=[])
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--degree-bound", type=int, default=2)
    p.add_argument("--instance", default="milnor")
    common(p)
    p.set_defaults(fn=_cmd_cohomology)

    p = sub.add_parser("axioms", help="run the relation suite")
    p.add_argument("--instance", default="milnor")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--relations", default=None, help="comma-separated ids")
    common(p)
    p.set_defaults(fn=_cmd_axioms)

    p = sub.add_parser("reciprocity", help="sum of transfers of residues over P1")
    p.add_argument("--field", required=True)
    p.add_argument("--trials", type=int, default=500)
    common(p)
    p.set_defaults(fn=_cmd_reciprocity)

    p = sub.add_parser("trace", help="pushforward of the unit class")
    p.add_argument("--map", required=True, help='e.g. "t->t^2"')
    p.add_argument("--scheme", default="P1")
    p.add_argument("--field", required=True)
    common(p)
    p.set_defaults(fn=_cmd_trace)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, FieldError, KTheoryError, schemes.SchemeError, cycles.CycleError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
