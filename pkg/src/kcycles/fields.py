"""Exact arithmetic for the field universe.

Small finite fields F_q (q = p^m capped at 2^20 by default), univariate
polynomials over them, rational function fields F_q(t), and factored
multiplicative normal forms for nonzero rational functions.

Field models are deterministic: the modulus is the graded-lex smallest monic
irreducible of its degree, the generator is the smallest element (in
representative order) of full multiplicative order.  Embeddings between two
such models send generator to a fixed power of the bigger generator, so
towers of embeddings commute on the nose.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

DEFAULT_ORDER_CAP = 1 << 20
_LOG_TABLE_CAP = 1 << 16


class FieldError(ValueError):
    """Bad field construction or mixed-field arithmetic."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def _factorize_int(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


class FiniteField:
    """The field with p^m elements in a fixed deterministic model.

    Elements are referenced by an integer index in [0, q): the index is the
    base-p encoding of the representative polynomial (coefficient of x^i is
    digit i).  Do not construct directly; use :func:`make_field`, which caches
    so that two requests for the same (p, m) share one model.
    """

    def __init__(self, p: int, m: int, modulus: tuple[int, ...], generator_idx: int):
        self.p = p
        self.m = m
        self.order = p**m
        self.modulus = modulus  # little-endian digits, length m+1, monic
        self.generator_idx = generator_idx
        self._exp: Optional[list[int]] = None
        self._log: Optional[dict[int, int]] = None

    # -- index-level arithmetic -------------------------------------------

    def _idx_to_coeffs(self, a: int) -> list[int]:
        out = []
        while a:
            out.append(a % self.p)
            a //= self.p
        return out

    def _coeffs_to_idx(self, cs: Sequence[int]) -> int:
        out = 0
        for c in reversed(cs):
            out = out * self.p + (c % self.p)
        return out

    def add_idx(self, a: int, b: int) -> int:
        p = self.p
        if p == 2:
            return a ^ b
        out, shift = 0, 1
        while a or b:
            out += ((a + b) % p) * shift
            a //= p
            b //= p
            shift *= p
        return out

    def neg_idx(self, a: int) -> int:
        p = self.p
        if p == 2:
            return a
        out, shift = 0, 1
        while a:
            out += (-a % p) * shift
            a //= p
            shift *= p
        return out

    def sub_idx(self, a: int, b: int) -> int:
        return self.add_idx(a, self.neg_idx(b))

    def _mul_idx_poly(self, a: int, b: int) -> int:
        # polynomial multiplication of representatives, reduced mod modulus
        p = self.p
        ca = self._idx_to_coeffs(a)
        cb = self._idx_to_coeffs(b)
        if not ca or not cb:
            return 0
        prod = [0] * (len(ca) + len(cb) - 1)
        for i, x in enumerate(ca):
            if x:
                for j, y in enumerate(cb):
                    prod[i + j] = (prod[i + j] + x * y) % p
        # reduce mod modulus (monic)
        mod = self.modulus
        dm = self.m
        while len(prod) > dm:
            top = prod.pop()
            if top:
                k = len(prod) - dm
                for i in range(dm):
                    prod[k + i] = (prod[k + i] - top * mod[i]) % p
        return self._coeffs_to_idx(prod)

    def _build_tables(self) -> None:
        exp = [1]
        g = self.generator_idx
        cur = 1
        for _ in range(self.order - 2):
            cur = self._mul_idx_poly(cur, g)
            exp.append(cur)
        self._exp = exp
        self._log = {v: i for i, v in enumerate(exp)}

    def mul_idx(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self._log is not None:
            return self._exp[(self._log[a] + self._log[b]) % (self.order - 1)]
        return self._mul_idx_poly(a, b)

    def inv_idx(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero field element")
        if self._log is not None:
            return self._exp[(-self._log[a]) % (self.order - 1)]
        return self.pow_idx(a, self.order - 2)

    def pow_idx(self, a: int, e: int) -> int:
        if e < 0:
            return self.pow_idx(self.inv_idx(a), -e)
        if a == 0:
            return 0 if e else 1
        if self._log is not None:
            return self._exp[(self._log[a] * e) % (self.order - 1)]
        out, base = 1, a
        while e:
            if e & 1:
                out = self._mul_idx_poly(out, base)
            base = self._mul_idx_poly(base, base)
            e >>= 1
        return out

    def dlog_idx(self, a: int) -> int:
        """Discrete log base the fixed generator; brute force past the table cap."""
        if a == 0:
            raise ZeroDivisionError("dlog of zero")
        if self._log is not None:
            return self._log[a]
        cur, g = 1, self.generator_idx
        for k in range(self.order - 1):
            if cur == a:
                return k
            cur = self._mul_idx_poly(cur, g)
        raise FieldError("element not in multiplicative group")  # pragma: no cover

    # -- element construction ---------------------------------------------

    def elem(self, idx: int) -> "FFElem":
        return FFElem(self, idx % self.order if idx >= 0 else idx % self.order)

    def from_int(self, n: int) -> "FFElem":
        return FFElem(self, n % self.p)

    def zero(self) -> "FFElem":
        return FFElem(self, 0)

    def one(self) -> "FFElem":
        return FFElem(self, 1)

    def generator(self) -> "FFElem":
        return FFElem(self, self.generator_idx)

    def elements(self) -> Iterator["FFElem"]:
        return (FFElem(self, i) for i in range(self.order))

    def units(self) -> Iterator["FFElem"]:
        return (FFElem(self, i) for i in range(1, self.order))

    # -- misc ---------------------------------------------------------------

    def __repr__(self) -> str:
        return f"GF({self.order})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FiniteField) and (self.p, self.m) == (other.p, other.m)

    def __hash__(self) -> int:
        return hash((self.p, self.m))


@dataclass(frozen=True)
class FFElem:
    """An element of a FiniteField, stored by representative index."""

    field: FiniteField
    idx: int

    def _check(self, other: "FFElem") -> None:
        if self.field != other.field:
            raise FieldError(f"mixed fields {self.field} and {other.field}")

    def __add__(self, other: "FFElem") -> "FFElem":
        self._check(other)
        return FFElem(self.field, self.field.add_idx(self.idx, other.idx))

    def __sub__(self, other: "FFElem") -> "FFElem":
        self._check(other)
        return FFElem(self.field, self.field.sub_idx(self.idx, other.idx))

    def __neg__(self) -> "FFElem":
        return FFElem(self.field, self.field.neg_idx(self.idx))

    def __mul__(self, other: "FFElem") -> "FFElem":
        self._check(other)
        return FFElem(self.field, self.field.mul_idx(self.idx, other.idx))

    def __truediv__(self, other: "FFElem") -> "FFElem":
        self._check(other)
        return FFElem(self.field, self.field.mul_idx(self.idx, self.field.inv_idx(other.idx)))

    def __pow__(self, e: int) -> "FFElem":
        return FFElem(self.field, self.field.pow_idx(self.idx, e))

    def inverse(self) -> "FFElem":
        return FFElem(self.field, self.field.inv_idx(self.idx))

    def dlog(self) -> int:
        return self.field.dlog_idx(self.idx)

    def is_zero(self) -> bool:
        return self.idx == 0

    def __repr__(self) -> str:
        if self.field.m == 1:
            return str(self.idx)
        cs = self.field._idx_to_coeffs(self.idx)
        terms = []
        for i in reversed(range(len(cs))):
            c = cs[i]
            if not c:
                continue
            if i == 0:
                terms.append(str(c))
            else:
                v = "w" if i == 1 else f"w^{i}"
                terms.append(v if c == 1 else f"{c}*{v}")
        return "+".join(terms) if terms else "0"


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Poly:
    """Dense univariate polynomial over a FiniteField.

    Coefficients are element indices, little-endian, no trailing zeros;
    the zero polynomial has an empty coefficient tuple.
    """

    field: FiniteField
    coeffs: tuple[int, ...]

    @staticmethod
    def of(field: FiniteField, coeffs: Iterable[int]) -> "Poly":
        cs = list(coeffs)
        while cs and cs[-1] == 0:
            cs.pop()
        return Poly(field, tuple(cs))

    @staticmethod
    def constant(field: FiniteField, e: FFElem | int) -> "Poly":
        idx = e.idx if isinstance(e, FFElem) else e % field.p
        return Poly.of(field, [idx])

    @staticmethod
    def x(field: FiniteField) -> "Poly":
        return Poly(field, (0, 1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1  # -1 for zero

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    def lc(self) -> FFElem:
        if self.is_zero():
            raise FieldError("leading coefficient of zero polynomial")
        return FFElem(self.field, self.coeffs[-1])

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def coeff(self, i: int) -> FFElem:
        return FFElem(self.field, self.coeffs[i] if i < len(self.coeffs) else 0)

    def __add__(self, other: "Poly") -> "Poly":
        F = self.field
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] = F.add_idx(out[i], c)
        return Poly.of(F, out)

    def __neg__(self) -> "Poly":
        F = self.field
        return Poly(F, tuple(F.neg_idx(c) for c in self.coeffs))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        F = self.field
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return Poly(F, ())
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    if y:
                        out[i + j] = F.add_idx(out[i + j], F.mul_idx(x, y))
        return Poly.of(F, out)

    def scale(self, c: FFElem) -> "Poly":
        F = self.field
        return Poly.of(F, (F.mul_idx(x, c.idx) for x in self.coeffs))

    def __divmod__(self, other: "Poly") -> tuple["Poly", "Poly"]:
        F = self.field
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        db, lb = other.degree, other.coeffs[-1]
        lb_inv = F.inv_idx(lb)
        q = [0] * max(0, len(rem) - db)
        while len(rem) - 1 >= db and rem:
            top = rem[-1]
            if top == 0:
                rem.pop()
                continue
            k = len(rem) - 1 - db
            factor = F.mul_idx(top, lb_inv)
            q[k] = factor
            for i in range(db + 1):
                rem[k + i] = F.sub_idx(rem[k + i], F.mul_idx(factor, other.coeffs[i]))
            rem.pop()
        return Poly.of(F, q), Poly.of(F, rem)

    def __floordiv__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[0]

    def __mod__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[1]

    def monic(self) -> "Poly":
        if self.is_zero() or self.is_monic():
            return self
        return self.scale(self.lc().inverse())

    def gcd(self, other: "Poly") -> "Poly":
        a, b = self, other
        while not b.is_zero():
            a, b = b, a % b
        return a.monic() if not a.is_zero() else a

    def derivative(self) -> "Poly":
        F = self.field
        return Poly.of(
            F, (F.mul_idx(c, i % F.p) for i, c in enumerate(self.coeffs) if i >= 1)
        )

    def pow_mod(self, e: int, mod: "Poly") -> "Poly":
        out = Poly.constant(self.field, 1) % mod
        base = self % mod
        while e:
            if e & 1:
                out = (out * base) % mod
            base = (base * base) % mod
            e >>= 1
        return out

    def eval(self, x: FFElem) -> FFElem:
        """Evaluate with coefficients embedded canonically into x's field."""
        F = x.field
        if F == self.field or (self.field.m == 1 and self.field.p == F.p):
            # same field, or prime coefficients (index-preserving embedding)
            acc = 0
            for c in reversed(self.coeffs):
                acc = F.add_idx(F.mul_idx(acc, x.idx), c)
            return FFElem(F, acc)
        emb = FieldEmbedding.canonical(self.field, F)
        acc = F.zero()
        for c in reversed(self.coeffs):
            acc = acc * x + emb.apply(FFElem(self.field, c))
        return acc

    def map_coeffs(self, emb: "FieldEmbedding") -> "Poly":
        return Poly.of(emb.ext, (emb.apply(FFElem(self.field, c)).idx for c in self.coeffs))

    def compose_rational(self, num: "Poly", den: "Poly") -> tuple["Poly", "Poly"]:
        """Return (N, D) with self(num/den) = N / D, D = den^deg(self)."""
        F = num.field
        if self.field != F:
            raise FieldError("compose_rational: coefficient field mismatch")
        d = self.degree
        if d <= 0:
            return Poly.of(F, self.coeffs), Poly.constant(F, 1)
        # Horner in the numerator: N = sum c_i num^i den^(d-i)
        acc = Poly.of(F, (self.coeffs[d],))
        for i in range(d - 1, -1, -1):
            acc = acc * num + Poly.of(F, (self.coeffs[i],)) * den.pow(d - i)
        return acc, den.pow(d)

    def pow(self, e: int) -> "Poly":
        out = Poly.constant(self.field, 1)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def key(self) -> tuple:
        """Graded-lex order key: degree first, then coefficients from the top."""
        return (self.degree, tuple(reversed(self.coeffs)))

    def __repr__(self) -> str:
        return poly_str(self, "t")


def poly_str(f: Poly, var: str) -> str:
    if f.is_zero():
        return "0"
    F = f.field
    terms = []
    for i in reversed(range(len(f.coeffs))):
        c = f.coeffs[i]
        if not c:
            continue
        cs = repr(FFElem(F, c))
        need_coeff = cs != "1"
        cs = f"({cs})" if ("+" in cs or "*" in cs) else cs
        if i == 0:
            terms.append(cs)
        else:
            v = var if i == 1 else f"{var}^{i}"
            terms.append(f"{cs}*{v}" if need_coeff else v)
    return "+".join(terms)


# ---------------------------------------------------------------------------
# Field construction
# ---------------------------------------------------------------------------

_FIELD_CACHE: dict[tuple[int, int], FiniteField] = {}


def _smallest_generator(field: FiniteField) -> int:
    n = field.order - 1
    if n == 1:
        return 1
    prime_divs = list(_factorize_int(n))
    for idx in range(2, field.order):
        if all(field.pow_idx(idx, n // ell) != 1 for ell in prime_divs):
            return idx
    raise FieldError("no generator found")  # pragma: no cover


def is_irreducible(f: Poly) -> bool:
    """Rabin test: works over any of our finite fields."""
    d = f.degree
    if d <= 0:
        return False
    if d == 1:
        return True
    q = f.field.order
    x = Poly.x(f.field)
    for ell in _factorize_int(d):
        h = x.pow_mod(q ** (d // ell), f) - x
        if not f.gcd(h).is_constant():
            return False
    return x.pow_mod(q**d, f) == x % f


def make_field(p: int, m: int = 1, cap: int = DEFAULT_ORDER_CAP) -> FiniteField:
    """Deterministic model of F_{p^m}; cached per (p, m)."""
    key = (p, m)
    if key in _FIELD_CACHE:
        return _FIELD_CACHE[key]
    if not _is_prime(p):
        raise FieldError(f"characteristic {p} is not prime")
    if m < 1:
        raise FieldError("extension degree must be >= 1")
    if p**m > cap:
        raise FieldError(f"field order {p**m} exceeds cap {cap}")
    if m == 1:
        field = FiniteField(p, 1, (0, 1), 1)
        field.generator_idx = _smallest_generator(field)
        if field.order <= _LOG_TABLE_CAP:
            field._build_tables()
        _FIELD_CACHE[key] = field
        return field
    base = make_field(p, 1, cap)
    # graded-lex smallest monic irreducible of degree m over F_p
    modulus = None
    for low in range(p**m):
        cs = []
        v = low
        for _ in range(m):
            cs.append(v % p)
            v //= p
        cand = Poly.of(base, cs + [1])
        if is_irreducible(cand):
            modulus = tuple(cs + [1])
            break
    if modulus is None:  # pragma: no cover
        raise FieldError("no irreducible modulus found")
    field = FiniteField(p, m, modulus, 1)
    field.generator_idx = _smallest_generator(field)
    if field.order <= _LOG_TABLE_CAP:
        field._build_tables()
    _FIELD_CACHE[key] = field
    return field


# ---------------------------------------------------------------------------
# Factorization (squarefree / distinct-degree / Cantor-Zassenhaus)
# ---------------------------------------------------------------------------


def _pth_root_poly(f: Poly) -> Poly:
    F = f.field
    p = F.p
    root_pow = F.order // p  # c -> c^(q/p) inverts Frobenius
    cs = [0] * (f.degree // p + 1)
    for i, c in enumerate(f.coeffs):
        if c:
            if i % p:
                raise FieldError("not a p-th power")  # pragma: no cover
            cs[i // p] = F.pow_idx(c, root_pow)
    return Poly.of(F, cs)


def _squarefree_parts(f: Poly, scale: int, out: list[tuple[Poly, int]]) -> None:
    # f monic nonconstant
    df = f.derivative()
    if df.is_zero():
        _squarefree_parts(_pth_root_poly(f), scale * f.field.p, out)
        return
    c = f.gcd(df)
    w = f // c
    i = 1
    while w.degree > 0:
        y = w.gcd(c)
        z = w // y
        if z.degree > 0:
            out.append((z, i * scale))
        w = y
        c = c // y
        i += 1
    if c.degree > 0:
        _squarefree_parts(_pth_root_poly(c), scale * f.field.p, out)


def _distinct_degree(f: Poly) -> list[tuple[Poly, int]]:
    # f monic squarefree; returns (product of irreducibles of degree d, d)
    F = f.field
    q = F.order
    out = []
    x = Poly.x(F)
    h = x % f
    d = 0
    rest = f
    while rest.degree > 2 * (d + 1) - 1 and rest.degree > 0:
        d += 1
        h = h.pow_mod(q, rest)
        g = rest.gcd(h - x)
        if g.degree > 0:
            out.append((g, d))
            rest = rest // g
            h = h % rest
    if rest.degree > 0:
        out.append((rest, rest.degree))
    return out


def _equal_degree_split(f: Poly, d: int, rng: random.Random) -> list[Poly]:
    # f monic squarefree, all irreducible factors of degree d
    F = f.field
    if f.degree == d:
        return [f]
    q = F.order
    while True:
        a = Poly.of(F, [rng.randrange(q) for _ in range(f.degree)])
        if a.is_constant():
            continue
        g = f.gcd(a)
        if 0 < g.degree < f.degree:
            pieces = [g, f // g]
        else:
            if F.p == 2:
                # trace map over F_2
                t = a % f
                acc = t
                for _ in range(F.m * d - 1):
                    t = (t * t) % f
                    acc = acc + t
                g = f.gcd(acc)
            else:
                b = a.pow_mod((q**d - 1) // 2, f)
                g = f.gcd(b - Poly.constant(F, 1))
            if 0 < g.degree < f.degree:
                pieces = [g, f // g]
            else:
                continue
        out = []
        for piece in pieces:
            out.extend(_equal_degree_split(piece.monic(), d, rng))
        return out


def factor_poly(f: Poly) -> list[tuple[Poly, int]]:
    """Full factorization f = lc * prod pi^e, pi monic irreducible.

    Deterministic: the splitting RNG is seeded from the input and the result
    is sorted by graded-lex key.
    """
    if f.is_zero():
        raise FieldError("cannot factor the zero polynomial")
    if f.is_constant():
        return []
    F = f.field
    rng = random.Random(f"cz:{F.p}:{F.m}:{f.coeffs}")
    monic = f.monic()
    sqfree: list[tuple[Poly, int]] = []
    _squarefree_parts(monic, 1, sqfree)
    found: dict[tuple[int, ...], int] = {}
    for part, mult in sqfree:
        for prod, d in _distinct_degree(part):
            for irr in _equal_degree_split(prod, d, rng):
                found[irr.coeffs] = found.get(irr.coeffs, 0) + mult
    out = [(Poly(F, cs), e) for cs, e in found.items()]
    out.sort(key=lambda pe: pe[0].key())
    return out


def irreducibles(field: FiniteField, degree: int) -> list[Poly]:
    """All monic irreducibles of exact degree over the field, graded-lex order."""
    key = (field.p, field.m, degree)
    if key in _IRR_CACHE:
        return _IRR_CACHE[key]
    if field.order**degree > (1 << 17):
        raise FieldError(
            f"enumerating irreducibles of degree {degree} over {field} is too large"
        )
    out = []
    q = field.order
    for low in range(q**degree):
        cs = []
        v = low
        for _ in range(degree):
            cs.append(v % q)
            v //= q
        cand = Poly.of(field, cs + [1])
        if is_irreducible(cand):
            out.append(cand)
    _IRR_CACHE[key] = out
    return out


_IRR_CACHE: dict[tuple[int, int, int], list[Poly]] = {}


# ---------------------------------------------------------------------------
# Rational functions and factored units
# ---------------------------------------------------------------------------


class RationalFunction:
    """num/den over F_q[t], den monic, gcd(num, den) = 1, zero is 0/1."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly):
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            den = Poly.constant(num.field, 1)
        else:
            g = num.gcd(den)
            if g.degree > 0:
                num, den = num // g, den // g
            lc = den.lc()
            if lc.idx != 1:
                inv = lc.inverse()
                num, den = num.scale(inv), den.scale(inv)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def field(self) -> FiniteField:
        return self.num.field

    @staticmethod
    def of_poly(f: Poly) -> "RationalFunction":
        return RationalFunction(f, Poly.constant(f.field, 1))

    @staticmethod
    def constant(field: FiniteField, e: FFElem | int) -> "RationalFunction":
        return RationalFunction.of_poly(Poly.constant(field, e))

    @staticmethod
    def var(field: FiniteField) -> "RationalFunction":
        return RationalFunction.of_poly(Poly.x(field))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def __add__(self, other: "RationalFunction") -> "RationalFunction":
        return RationalFunction(self.num * other.den + other.num * self.den, self.den * other.den)

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other: "RationalFunction") -> "RationalFunction":
        return self + (-other)

    def __mul__(self, other: "RationalFunction") -> "RationalFunction":
        return RationalFunction(self.num * other.num, self.den * other.den)

    def __truediv__(self, other: "RationalFunction") -> "RationalFunction":
        if other.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(self.num * other.den, self.den * other.num)

    def inverse(self) -> "RationalFunction":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return RationalFunction(self.den, self.num)

    def eval(self, x: FFElem) -> FFElem:
        d = self.den.eval(x)
        if d.is_zero():
            raise ZeroDivisionError("pole at evaluation point")
        return self.num.eval(x) / d

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RationalFunction)
            and self.num == other.num
            and self.den == other.den
        )

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def __repr__(self) -> str:
        if self.den.is_constant():
            return repr(self.num)
        return f"({self.num!r})/({self.den!r})"


@dataclass(frozen=True)
class FactoredUnit:
    """c * prod pi_i^{e_i}: exact multiplicative normal form of a nonzero
    rational function.  Factors are monic irreducible, distinct, graded-lex
    sorted, with nonzero exponents."""

    constant: FFElem
    factors: tuple[tuple[Poly, int], ...]

    @staticmethod
    def of(constant: FFElem, factors: Iterable[tuple[Poly, int]]) -> "FactoredUnit":
        if constant.is_zero():
            raise FieldError("factored unit must be nonzero")
        merged: dict[tuple[int, ...], int] = {}
        polys: dict[tuple[int, ...], Poly] = {}
        for f, e in factors:
            if e == 0:
                continue
            polys[f.coeffs] = f
            merged[f.coeffs] = merged.get(f.coeffs, 0) + e
        items = [(polys[c], e) for c, e in merged.items() if e != 0]
        items.sort(key=lambda fe: fe[0].key())
        return FactoredUnit(constant, tuple(items))

    @staticmethod
    def one(field: FiniteField) -> "FactoredUnit":
        return FactoredUnit(field.one(), ())

    @property
    def field(self) -> FiniteField:
        return self.constant.field

    def __mul__(self, other: "FactoredUnit") -> "FactoredUnit":
        return FactoredUnit.of(self.constant * other.constant, self.factors + other.factors)

    def inverse(self) -> "FactoredUnit":
        return FactoredUnit.of(self.constant.inverse(), tuple((f, -e) for f, e in self.factors))

    def pow(self, k: int) -> "FactoredUnit":
        if k == 0:
            return FactoredUnit.one(self.field)
        return FactoredUnit.of(self.constant**k, tuple((f, e * k) for f, e in self.factors))

    def exponent_of(self, pi: Poly) -> int:
        for f, e in self.factors:
            if f == pi:
                return e
        return 0

    def drop(self, pi: Poly) -> "FactoredUnit":
        return FactoredUnit(self.constant, tuple((f, e) for f, e in self.factors if f != pi))

    def expand(self) -> RationalFunction:
        F = self.field
        num = Poly.constant(F, self.constant)
        den = Poly.constant(F, 1)
        for f, e in self.factors:
            if e > 0:
                num = num * f.pow(e)
            else:
                den = den * f.pow(-e)
        return RationalFunction(num, den)

    def is_constant(self) -> bool:
        return not self.factors

    def eval(self, x: FFElem) -> FFElem:
        """Evaluate (coefficients embedded into x's field if needed)."""
        out = (
            x.field.elem(self.constant.idx)
            if self.constant.field == x.field
            else FieldEmbedding.canonical(self.field, x.field).apply(self.constant)
        )
        for f, e in self.factors:
            out = out * f.eval(x) ** e
        return out

    def __repr__(self) -> str:
        parts = [repr(self.constant)]
        for f, e in self.factors:
            parts.append(f"({f!r})^{e}" if e != 1 else f"({f!r})")
        return "*".join(parts)


def unit_factor(x: RationalFunction | Poly) -> FactoredUnit:
    """Canonical factored form of a nonzero rational function."""
    if isinstance(x, Poly):
        x = RationalFunction.of_poly(x)
    if x.is_zero():
        raise FieldError("cannot factor the zero function")
    factors: list[tuple[Poly, int]] = [(f, e) for f, e in factor_poly(x.num)] if not x.num.is_constant() else []
    if not x.den.is_constant():
        factors += [(f, -e) for f, e in factor_poly(x.den)]
    return FactoredUnit.of(x.num.lc(), factors)


# ---------------------------------------------------------------------------
# Embeddings and norms between canonical finite fields
# ---------------------------------------------------------------------------


def prime_minimal_polynomial(x: FFElem) -> Poly:
    """Minimal polynomial of x over the prime field F_p.

    Coefficients of the conjugate product are Frobenius-fixed, hence lie in
    the prime subfield, whose elements have indices < p by construction."""
    F = x.field
    conjugates = []
    cur = x
    while True:
        conjugates.append(cur)
        cur = cur**F.p
        if cur == x:
            break
    out = Poly.constant(F, 1)
    for c in conjugates:
        out = out * Poly.of(F, [F.neg_idx(c.idx), 1])
    prime = make_field(F.p, 1)
    if any(idx >= F.p for idx in out.coeffs):  # pragma: no cover
        raise FieldError("conjugate product left the prime field")
    return Poly.of(prime, out.coeffs)


_CANON_TWIST: dict[tuple[int, int, int], int] = {}


def _canonical_twist(sub: FiniteField, ext: FiniteField) -> int:
    """The j with g_sub |-> g_ext^(N*j) the canonical honest field embedding.

    Among the multiplicative candidates g_ext^(N*j), only those that are
    roots of the prime minimal polynomial of g_sub are additive; the one
    with the smallest element index is chosen."""
    key = (sub.p, sub.m, ext.m)
    j0 = _CANON_TWIST.get(key)
    if j0 is not None:
        return j0
    n_sub = sub.order - 1
    if n_sub == 1 or sub.m == ext.m:
        # equal fields: the canonical embedding is the identity
        _CANON_TWIST[key] = 1
        return 1
    ratio = (ext.order - 1) // n_sub
    mp = prime_minimal_polynomial(sub.generator())
    best = None
    for j in range(1, n_sub + 1):
        if math.gcd(j, n_sub) != 1:
            continue
        cand = ext.generator() ** (ratio * j)
        if mp.eval(cand).is_zero():
            if best is None or cand.idx < best[1]:
                best = (j, cand.idx)
    if best is None:  # pragma: no cover
        raise FieldError("no field embedding found")
    _CANON_TWIST[key] = best[0]
    return best[0]


class FieldEmbedding:
    """An honest field embedding F_{p^a} -> F_{p^b} (a | b).

    All embeddings are the canonical one precomposed with a power of the
    p-Frobenius of the subfield; ``frob`` records that power.  The generator
    image is g_ext^(N*j) with N = (p^b-1)/(p^a-1) and j = j0 * p^frob, where
    j0 is the deterministic canonical twist."""

    __slots__ = ("sub", "ext", "frob", "twist")

    def __init__(self, sub: FiniteField, ext: FiniteField, frob: int = 0):
        if sub.p != ext.p or ext.m % sub.m:
            raise FieldError(f"no embedding {sub} -> {ext}")
        n = sub.order - 1
        self.sub = sub
        self.ext = ext
        self.frob = frob % sub.m
        if n == 1:
            self.twist = 1
        else:
            self.twist = (_canonical_twist(sub, ext) * pow(sub.p, self.frob, n)) % n

    @staticmethod
    def canonical(sub: FiniteField, ext: FiniteField) -> "FieldEmbedding":
        return FieldEmbedding(sub, ext, 0)

    @staticmethod
    def from_generator_image(sub: FiniteField, ext: FiniteField, image: FFElem) -> "FieldEmbedding":
        n_sub = sub.order - 1
        if n_sub == 1:
            return FieldEmbedding(sub, ext, 0)
        ratio = (ext.order - 1) // n_sub
        k = image.dlog()
        if k % ratio:
            raise FieldError("image does not define a field embedding")
        j = (k // ratio) % n_sub
        j0 = _canonical_twist(sub, ext)
        for f in range(sub.m):
            if (j0 * pow(sub.p, f, n_sub)) % n_sub == j:
                return FieldEmbedding(sub, ext, f)
        raise FieldError("generator image is not a conjugate root")

    @property
    def ratio(self) -> int:
        return (self.ext.order - 1) // (self.sub.order - 1)

    @property
    def rel_degree(self) -> int:
        return self.ext.m // self.sub.m

    def apply(self, x: FFElem) -> FFElem:
        if x.field != self.sub:
            raise FieldError("embedding applied to element of wrong field")
        if x.is_zero():
            return self.ext.zero()
        return self.ext.generator() ** (x.dlog() * self.ratio * self.twist)

    def section(self, y: FFElem) -> FFElem:
        """Inverse on the image; errors if y is not in the image subfield."""
        if y.field != self.ext:
            raise FieldError("section applied to element of wrong field")
        if y.is_zero():
            return self.sub.zero()
        k = y.dlog()
        n_sub = self.sub.order - 1
        if k % self.ratio:
            raise FieldError("element not in embedded subfield")
        e = k // self.ratio
        if n_sub > 1:
            e = (e * pow(self.twist, -1, n_sub)) % n_sub
        return self.sub.generator() ** e

    def norm_down(self, x: FFElem) -> FFElem:
        """Field norm ext -> sub relative to this embedding."""
        if x.is_zero():
            return self.sub.zero()
        val = x ** ((self.ext.order - 1) // (self.sub.order - 1))
        return self.section(val)

    def compose(self, outer: "FieldEmbedding") -> "FieldEmbedding":
        """outer o self (self: A->B, outer: B->C)."""
        if self.ext != outer.sub:
            raise FieldError("embeddings do not compose")
        img = outer.apply(self.apply(self.sub.generator()))
        return FieldEmbedding.from_generator_image(self.sub, outer.ext, img)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FieldEmbedding)
            and (self.sub, self.ext, self.frob) == (other.sub, other.ext, other.frob)
        )

    def __hash__(self) -> int:
        return hash((self.sub, self.ext, self.frob))

    def __repr__(self) -> str:
        return f"{self.sub}->{self.ext}[frob={self.frob}]"


def norm_ff(sub: FiniteField, ext: FiniteField, x: FFElem) -> FFElem:
    """Norm of x in ext down to sub (canonical embedding): x^(1+q+...+q^(d-1))."""
    if x.field != ext:
        raise FieldError("norm_ff: element not in the extension field")
    return FieldEmbedding.canonical(sub, ext).norm_down(x)


def minimal_polynomial(x: FFElem, base: FiniteField) -> Poly:
    """Minimal polynomial of x over the canonically embedded base field."""
    big = x.field
    emb = FieldEmbedding.canonical(base, big)
    q = base.order
    conjugates = []
    cur = x
    while True:
        conjugates.append(cur)
        cur = cur**q
        if cur == x:
            break
    out = Poly.constant(big, 1)
    for c in conjugates:
        out = out * Poly.of(big, [big.neg_idx(c.idx), 1])
    return Poly.of(base, [emb.section(FFElem(big, idx)).idx for idx in out.coeffs])


def roots_in(f: Poly, ext: FiniteField) -> list[FFElem]:
    """Roots of f inside ext (coefficients embedded canonically), ascending index."""
    if f.field == ext:
        fe = f
    elif f.field.m == 1:
        fe = Poly.of(ext, f.coeffs)
    else:
        fe = f.map_coeffs(FieldEmbedding.canonical(f.field, ext))
    out = []
    for pi, _ in factor_poly(fe):
        if pi.degree == 1:
            out.append(-pi.coeff(0))
    out.sort(key=lambda e: e.idx)
    return out


# ---------------------------------------------------------------------------
# Linear algebra over F_p (for writing elements in a place basis)
# ---------------------------------------------------------------------------


def solve_fp(matrix: list[list[int]], rhs: list[int], p: int) -> list[int]:
    """Solve M x = rhs over F_p (square, invertible M).  Plain elimination."""
    n = len(matrix)
    a = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] % p), None)
        if piv is None:
            raise FieldError("singular system")
        a[col], a[piv] = a[piv], a[col]
        inv = pow(a[col][col], -1, p)
        a[col] = [(v * inv) % p for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] % p:
                f = a[r][col]
                a[r] = [(a[r][k] - f * a[col][k]) % p for k in range(n + 1)]
    return [a[i][n] % p for i in range(n)]
