"""Textual grammars and JSON encodings for the CLI and test corpus.

Polynomials are integer-coefficient strings like "t^2+2*t+1" (the letter g
denotes the fixed multiplicative generator of the constant field), rational
functions are "num/den", fields are "GF(q)" or "GF(q)(t)", and symbols are
"{t, t+1}@GF(3)(t)" with an optional ":n" degree suffix.
"""

from __future__ import annotations

import re
from typing import Optional

from .fields import (
    FFElem,
    FactoredUnit,
    FiniteField,
    Poly,
    RationalFunction,
    make_field,
    poly_str,
)
from .milnor import FieldRef, KElement, Place


class ParseError(ValueError):
    """Input text that does not match the documented grammar."""

    def __init__(self, msg: str, text: str = "", pos: Optional[int] = None):
        self.pos = pos
        at = f" at position {pos}" if pos is not None else ""
        src = f" in {text!r}" if text else ""
        super().__init__(f"{msg}{at}{src}")


_FIELD_RE = re.compile(r"^GF\((\d+)\)(?:\(([a-z])\))?$")


def parse_field(text: str) -> FieldRef:
    m = _FIELD_RE.match(text.strip())
    if not m:
        raise ParseError("expected GF(q) or GF(q)(t)", text)
    q = int(m.group(1))
    p, k = _split_prime_power(q)
    base = make_field(p, k)
    if m.group(2):
        return FieldRef.rational(base, m.group(2))
    return FieldRef.finite(base)


def _split_prime_power(q: int) -> tuple[int, int]:
    for p in range(2, q + 1):
        if q % p == 0:
            k = 0
            while q % p == 0:
                q //= p
                k += 1
            if q != 1:
                raise ParseError(f"{q * p**k} is not a prime power")
            return p, k
    raise ParseError(f"{q} is not a prime power")


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    def expect(self, ch: str) -> None:
        got = self.take()
        if got != ch:
            raise ParseError(f"expected {ch!r}, got {got!r}", self.text, self.pos - 1)

    def number(self) -> int:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            raise ParseError("expected a number", self.text, self.pos)
        return int(self.text[start : self.pos])


def parse_poly(field: FiniteField, text: str, var: str) -> Poly:
    """Sums of terms c*v^k, with c an integer or a power of g."""
    toks = _Tokens(text)
    acc = _parse_sum(toks, field, var)
    if toks.peek():
        raise ParseError("trailing input", text, toks.pos)
    if not acc.den.is_constant():
        raise ParseError("expected a polynomial, got a denominator", text)
    return acc.num.scale(acc.den.lc().inverse())


def parse_rational(field: FiniteField, text: str, var: str) -> RationalFunction:
    toks = _Tokens(text)
    out = _parse_sum(toks, field, var)
    if toks.peek():
        raise ParseError("trailing input", text, toks.pos)
    return out


def _parse_sum(toks: _Tokens, F: FiniteField, var: str) -> RationalFunction:
    sign = 1
    if toks.peek() in ("+", "-"):
        sign = -1 if toks.take() == "-" else 1
    acc = _parse_product(toks, F, var)
    if sign < 0:
        acc = -acc
    while toks.peek() in ("+", "-"):
        op = toks.take()
        term = _parse_product(toks, F, var)
        acc = acc - term if op == "-" else acc + term
    return acc


def _parse_product(toks: _Tokens, F: FiniteField, var: str) -> RationalFunction:
    acc = _parse_power(toks, F, var)
    while toks.peek() in ("*", "/"):
        op = toks.take()
        nxt = _parse_power(toks, F, var)
        acc = acc * nxt if op == "*" else acc / nxt
    return acc


def _parse_power(toks: _Tokens, F: FiniteField, var: str) -> RationalFunction:
    base = _parse_atom(toks, F, var)
    if toks.peek() == "^":
        toks.take()
        neg = False
        if toks.peek() == "-":
            toks.take()
            neg = True
        e = toks.number()
        out = RationalFunction.constant(F, 1)
        for _ in range(e):
            out = out * base
        return out.inverse() if neg else out
    return base


def _parse_atom(toks: _Tokens, F: FiniteField, var: str) -> RationalFunction:
    ch = toks.peek()
    if ch == "(":
        toks.take()
        inner = _parse_sum(toks, F, var)
        toks.expect(")")
        return inner
    if ch.isdigit():
        return RationalFunction.constant(F, toks.number())
    if ch == var:
        toks.take()
        return RationalFunction.var(F)
    if ch == "g":
        toks.take()
        return RationalFunction.constant(F, F.generator())
    raise ParseError(f"unexpected character {ch!r}", toks.text, toks.pos)


_SYMBOL_RE = re.compile(r"^\{(.*)\}@([^:]+)(?::(\d+))?$")


def parse_symbol(text: str) -> KElement:
    """Symbol literals: "{t, t+1}@GF(3)(t)" with optional ":n" degree."""
    from .milnor import symbol

    m = _SYMBOL_RE.match(text.strip())
    if not m:
        raise ParseError("expected {entries}@FIELD[:n]", text)
    field = parse_field(m.group(2).strip())
    body = m.group(1).strip()
    entries = [e.strip() for e in body.split(",")] if body else []
    if field.is_finite:
        vals = [
            parse_poly(field.base, e, "z").coeff(0) if not e.isdigit() else field.base.from_int(int(e))
            for e in entries
        ]
        parsed = symbol(field, vals)
    else:
        parsed = symbol(
            field, [parse_rational(field.base, e, field.var) for e in entries]
        )
    if m.group(3) is not None and int(m.group(3)) != len(entries):
        raise ParseError("declared degree does not match the entry count", text)
    return parsed


def parse_place(field: FieldRef, text: str) -> Place:
    text = text.strip()
    if text in ("inf", "oo"):
        return Place.infinite(field)
    pi = parse_poly(field.base, text, field.var)
    return Place.finite_place(field, pi.monic())


# ---------------------------------------------------------------------------
# JSON encodings
# ---------------------------------------------------------------------------


def elem_str(x: FFElem) -> str:
    return repr(x)


def fu_json(fu: FactoredUnit, var: str) -> dict:
    return {
        "constant": elem_str(fu.constant),
        "factors": [[poly_str(f, var), e] for f, e in fu.factors],
    }


def kelement_to_json(x: KElement) -> dict:
    field = repr(x.field)
    if x.payload is None:
        payload = None
    elif x.n == 0:
        payload = x.payload
    elif x.n == 1 and x.field.is_finite:
        payload = {"exp": x.payload}
    elif x.n == 1:
        payload = fu_json(x.payload, x.field.var)
    else:
        payload = {
            "coords": [[repr(pl), {"exp": e}] for pl, e in x.payload]
        }
    return {"field": field, "degree": x.n, "payload": payload}


def coordinate_to_json(v) -> dict:
    from .cycles import PlaneSymbol

    if isinstance(v, PlaneSymbol):
        return {
            "degree": v.n,
            "terms": [
                {
                    "coef": coef,
                    "entries": [repr(f) for f in entries],
                }
                for coef, entries in v.terms
            ],
        }
    return kelement_to_json(v)
