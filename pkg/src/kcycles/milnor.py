"""Milnor K-theory of the field universe in canonical normal form.

The universe: finite fields F_q, rational function fields F_q(t), and residue
fields of their places.  K-classes are kept in a complete normal form built on
the split exact sequence

    0 -> K_n(F_q) -> K_n(F_q(t)) -> (+)_pi K_{n-1}(kappa_pi) -> 0

over the finite places pi, together with K_0(F) = Z, K_1(F_q) = Z/(q-1)
(exponent of the fixed generator) and K_{>=2}(finite field) = 0.  Degree-2
classes over F_q(t) are therefore finite vectors of tame coordinates, one per
finite place, and equality of payloads decides equality of classes.

The four structure maps are implemented concretely: restriction along
supported field maps, corestriction (norms and transfers), multiplication by
symbols, and the residue (tame symbol) at a place.  The tame symbol follows
the first-slot convention: d{pi, u} = {ubar}, d{u_1,...,u_n} = 0 for units.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Iterable, Optional, Sequence, Union

from .fields import (
    FFElem,
    FactoredUnit,
    FieldEmbedding,
    FieldError,
    FiniteField,
    Poly,
    RationalFunction,
    factor_poly,
    make_field,
    minimal_polynomial,
    poly_str,
    roots_in,
    solve_fp,
    unit_factor,
)


class KTheoryError(ValueError):
    """Unsupported operation or mismatched fields in the K-theory layer."""


# ---------------------------------------------------------------------------
# Field references
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldRef:
    """A field of the universe: FINITE(F_q) or RATIONAL(F_q(t)).

    Residue fields of places resolve to FINITE refs under a fixed isomorphism
    (root of pi maps to the canonically chosen root in the canonical model);
    ``via_place`` records the provenance but does not affect identity.
    """

    kind: str  # "finite" | "rational"
    base: FiniteField
    var: str = "t"
    via_place: Optional["Place"] = dc_field(default=None, compare=False, repr=False)

    @staticmethod
    def finite(F: FiniteField) -> "FieldRef":
        return FieldRef("finite", F, "")

    @staticmethod
    def rational(F: FiniteField, var: str = "t") -> "FieldRef":
        return FieldRef("rational", F, var)

    @staticmethod
    def residue(place: "Place") -> "FieldRef":
        return FieldRef("finite", place.residue_field, "", via_place=place)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_rational(self) -> bool:
        return self.kind == "rational"

    def __repr__(self) -> str:
        if self.is_finite:
            return f"GF({self.base.order})"
        return f"GF({self.base.order})({self.var})"


# ---------------------------------------------------------------------------
# Places
# ---------------------------------------------------------------------------

_ROOT_CACHE: dict[tuple, int] = {}
_BASIS_CACHE: dict[tuple, list[list[int]]] = {}
_REP_CACHE: dict[tuple, Poly] = {}


@dataclass(frozen=True)
class Place:
    """A place of F_q(t): a monic irreducible pi (finite kind) or infinity.

    The valuation is normalized (uniformizer has value 1); the residue field
    is the canonical model of F_{q^deg}."""

    field: FieldRef
    pi: Optional[Poly]  # None = infinite place (uniformizer 1/t)

    def __post_init__(self):
        if not self.field.is_rational:
            raise KTheoryError("places live on rational function fields")

    @staticmethod
    def finite_place(field: FieldRef, pi: Poly) -> "Place":
        if not pi.is_monic() or pi.degree < 1:
            raise KTheoryError("finite place needs a monic nonconstant polynomial")
        return Place(field, pi)

    @staticmethod
    def infinite(field: FieldRef) -> "Place":
        return Place(field, None)

    @property
    def is_infinite(self) -> bool:
        return self.pi is None

    @property
    def degree(self) -> int:
        return 1 if self.pi is None else self.pi.degree

    @property
    def residue_field(self) -> FiniteField:
        b = self.field.base
        return make_field(b.p, b.m * self.degree)

    @property
    def root(self) -> FFElem:
        """Canonical root of pi in the canonical residue field (smallest index)."""
        if self.pi is None:
            raise KTheoryError("infinite place has no defining root")
        key = (self.field.base.p, self.field.base.m, self.field.var, self.pi.coeffs)
        idx = _ROOT_CACHE.get(key)
        if idx is None:
            rs = roots_in(self.pi, self.residue_field)
            if not rs:
                raise KTheoryError(f"{self.pi!r} is not irreducible over {self.field.base}")
            idx = rs[0].idx
            _ROOT_CACHE[key] = idx
        return FFElem(self.residue_field, idx)

    def uniformizer(self) -> FactoredUnit:
        F = self.field.base
        if self.pi is None:
            return FactoredUnit.of(F.one(), [(Poly.x(F), -1)])
        return FactoredUnit.of(F.one(), [(self.pi, 1)])

    def val(self, x: Union[FactoredUnit, RationalFunction, Poly]) -> int:
        if isinstance(x, Poly):
            x = RationalFunction.of_poly(x)
        if isinstance(x, RationalFunction):
            if x.is_zero():
                raise KTheoryError("valuation of zero")
            x = unit_factor(x)
        if self.pi is None:
            return -sum(e * f.degree for f, e in x.factors)
        return x.exponent_of(self.pi)

    def reduce_unit(self, x: FactoredUnit) -> FFElem:
        """Image in the residue field of a valuation-0 factored unit."""
        if self.val(x) != 0:
            raise KTheoryError("reduction requires a unit at the place")
        if self.pi is None:
            # monic factors tend to 1 at infinity; only the constant survives
            return x.constant
        if x.exponent_of(self.pi) != 0:  # pragma: no cover - val==0 forbids this
            raise KTheoryError("unit part still contains the uniformizer")
        return x.eval(self.root)

    def rep_poly(self, c: FFElem) -> Poly:
        """Polynomial of degree < deg(pi) over the base with rep(root) = c."""
        if self.pi is None:
            raise KTheoryError("infinite place has trivial representatives")
        kappa = self.residue_field
        if c.field != kappa:
            raise KTheoryError("element not in the residue field")
        base = self.field.base
        d = self.degree
        if d == 1:
            emb = FieldEmbedding.canonical(base, kappa)
            return Poly.constant(base, emb.section(c) if kappa != base else c)
        key = (base.p, base.m, self.field.var, self.pi.coeffs, c.idx)
        cached = _REP_CACHE.get(key)
        if cached is not None:
            return cached
        mkey = (base.p, base.m, self.field.var, self.pi.coeffs)
        matrix = _BASIS_CACHE.get(mkey)
        p = base.p
        dim = kappa.m  # = base.m * d
        if matrix is None:
            emb = FieldEmbedding.canonical(base, kappa)
            cols = []
            for i in range(d):
                ri = self.root**i
                for k in range(base.m):
                    bk = emb.apply(FFElem(base, p**k))
                    col_elem = bk * ri
                    digits = []
                    v = col_elem.idx
                    for _ in range(dim):
                        digits.append(v % p)
                        v //= p
                    cols.append(digits)
            matrix = [[cols[j][i] for j in range(dim)] for i in range(dim)]
            _BASIS_CACHE[mkey] = matrix
        rhs = []
        v = c.idx
        for _ in range(dim):
            rhs.append(v % p)
            v //= p
        sol = solve_fp(matrix, rhs, p)
        coeffs = []
        for i in range(d):
            idx = 0
            for k in reversed(range(base.m)):
                idx = idx * p + sol[i * base.m + k]
            coeffs.append(idx)
        rep = Poly.of(base, coeffs)
        _REP_CACHE[key] = rep
        return rep

    def key(self) -> tuple:
        return (self.degree, 1 if self.pi is None else 0, () if self.pi is None else self.pi.key())

    def __repr__(self) -> str:
        if self.pi is None:
            return "inf"
        return f"({poly_str(self.pi, self.field.var)})"


def embedding_via_root(place: Place, target: FiniteField, root_image: FFElem) -> FieldEmbedding:
    """The field embedding kappa(place) -> target determined by root |-> root_image.

    This is the residue-field embedding induced by geometry (f(root) |-> f(image)),
    which in general differs from the canonical one by a Frobenius twist."""
    kappa = place.residue_field
    if root_image.field != target:
        raise KTheoryError("root image lives in the wrong field")
    if not place.pi.eval(root_image).is_zero():
        raise KTheoryError("claimed root image is not a root")
    g_rep = place.rep_poly(kappa.generator())
    img = g_rep.eval(root_image)
    return FieldEmbedding.from_generator_image(kappa, target, img)


# ---------------------------------------------------------------------------
# K-elements
# ---------------------------------------------------------------------------

Payload = Union[None, int, FactoredUnit, tuple]


@dataclass(frozen=True)
class KElement:
    """A Milnor K-theory class in canonical normal form.

    payload by case: n < 0 or out of range: None; n = 0: int;
    n = 1 over a finite field: exponent of the generator mod q-1;
    n = 1 over F_q(t): FactoredUnit; n = 2 over F_q(t): sorted tuple of
    (finite place, nonzero exponent in kappa(v)^x)."""

    field: FieldRef
    n: int
    payload: Payload

    def is_zero(self) -> bool:
        if self.payload is None:
            return True
        if isinstance(self.payload, int):
            return self.payload == 0
        if isinstance(self.payload, FactoredUnit):
            return self.payload.is_constant() and self.payload.constant.idx == 1
        return len(self.payload) == 0

    def __repr__(self) -> str:
        if self.payload is None or self.is_zero():
            return f"0[{self.field!r},{self.n}]"
        if self.n == 0:
            return f"{self.payload}[{self.field!r},0]"
        if self.n == 1 and self.field.is_finite:
            return f"{{g^{self.payload}}}[{self.field!r}]"
        if self.n == 1:
            return f"{{{self.payload!r}}}[{self.field!r}]"
        coords = ", ".join(f"{pl!r}:g^{e}" for pl, e in self.payload)
        return f"[{coords}][{self.field!r},2]"


def k_zero(field: FieldRef, n: int) -> KElement:
    if n == 0:
        return KElement(field, 0, 0)
    if n == 1:
        if field.is_finite:
            return KElement(field, 1, 0)
        return KElement(field, 1, FactoredUnit.one(field.base))
    if n == 2 and field.is_rational:
        return KElement(field, 2, ())
    return KElement(field, n, None)


def k_int(field: FieldRef, k: int) -> KElement:
    return KElement(field, 0, k)


def _unit_exp_mod(field: FiniteField, e: int) -> int:
    m = field.order - 1
    return e % m if m > 1 else 0


def k_unit_finite(field: FieldRef, x: FFElem) -> KElement:
    if x.is_zero():
        raise KTheoryError("symbol entries must be nonzero")
    if not field.is_finite or x.field != field.base:
        raise KTheoryError("unit class must live in the given finite field")
    return KElement(field, 1, _unit_exp_mod(x.field, x.dlog()))


def _as_factored(field: FieldRef, entry) -> FactoredUnit:
    if isinstance(entry, FactoredUnit):
        fu = entry
    elif isinstance(entry, (RationalFunction, Poly)):
        fu = unit_factor(entry)
    elif isinstance(entry, FFElem):
        if entry.is_zero():
            raise KTheoryError("symbol entries must be nonzero")
        fu = FactoredUnit.of(entry, ())
    else:
        raise KTheoryError(f"cannot interpret symbol entry {entry!r}")
    if fu.field != field.base:
        raise KTheoryError("symbol entry over the wrong constant field")
    return fu


def _tame_exponent(
    place: Place,
    a: FactoredUnit,
    b: FactoredUnit,
    uniformizer: Optional[FactoredUnit] = None,
) -> int:
    """Exponent (w.r.t. the residue generator) of the degree-2 tame symbol.

    First-slot convention: d{pi,u} = ubar; the value is
    (-1)^(ab) * wbar^a * ubar^(-b) for a = v(first), b = v(second)."""
    if uniformizer is None:
        uniformizer = place.uniformizer()
    elif place.val(uniformizer) != 1:
        raise KTheoryError("uniformizer must have valuation 1")
    va, vb = place.val(a), place.val(b)
    kappa = place.residue_field
    mod = kappa.order - 1
    if mod == 1:
        return 0
    if va == 0 and vb == 0:
        return 0
    u = a * uniformizer.pow(-va) if va else a
    w = b * uniformizer.pow(-vb) if vb else b
    ubar = place.reduce_unit(u)
    wbar = place.reduce_unit(w)
    neg_one = kappa.dlog_idx(kappa.neg_idx(1))
    return (va * vb * neg_one + va * kappa.dlog_idx(wbar.idx) - vb * kappa.dlog_idx(ubar.idx)) % mod


def _coords_of_pairs(
    field: FieldRef, pairs: Sequence[tuple[FactoredUnit, FactoredUnit]]
) -> tuple:
    """Tame coordinates at every finite place in the joint support."""
    support: dict[tuple, Place] = {}
    for a, b in pairs:
        for fu in (a, b):
            for f, _ in fu.factors:
                pl = Place.finite_place(field, f)
                support[f.coeffs] = pl
    coords: dict[Place, int] = {}
    for pl in support.values():
        mod = pl.residue_field.order - 1
        if mod == 1:
            continue
        total = 0
        for a, b in pairs:
            total = (total + _tame_exponent(pl, a, b)) % mod
        if total:
            coords[pl] = total
    return tuple(sorted(coords.items(), key=lambda kv: kv[0].key()))


def symbol(field: FieldRef, entries: Sequence) -> KElement:
    """Canonical normal form of the Steinberg symbol {a_1, ..., a_n}."""
    n = len(entries)
    if n == 0:
        return KElement(field, 0, 1)
    if field.is_finite:
        elems = []
        for entry in entries:
            if isinstance(entry, int):
                entry = field.base.from_int(entry)
            if not isinstance(entry, FFElem) or entry.field != field.base:
                raise KTheoryError("finite-field symbol entries must be field elements")
            if entry.is_zero():
                raise KTheoryError("symbol entries must be nonzero")
            elems.append(entry)
        if n == 1:
            return k_unit_finite(field, elems[0])
        return k_zero(field, n)  # K_{>=2} of a finite field vanishes
    fus = [_as_factored(field, e) for e in entries]
    if n == 1:
        return KElement(field, 1, fus[0])
    if n == 2:
        return KElement(field, 2, _coords_of_pairs(field, [(fus[0], fus[1])]))
    return k_zero(field, n)


def _same_shape(x: KElement, y: KElement) -> None:
    if x.field != y.field or x.n != y.n:
        raise KTheoryError(f"mismatched K-groups: ({x.field!r},{x.n}) vs ({y.field!r},{y.n})")


def k_add(x: KElement, y: KElement) -> KElement:
    _same_shape(x, y)
    if x.payload is None:
        return x
    if x.n == 0:
        return KElement(x.field, 0, x.payload + y.payload)
    if x.n == 1 and x.field.is_finite:
        return KElement(x.field, 1, _unit_exp_mod(x.field.base, x.payload + y.payload))
    if x.n == 1:
        return KElement(x.field, 1, x.payload * y.payload)
    coords = dict(x.payload)
    for pl, e in y.payload:
        mod = pl.residue_field.order - 1
        tot = (coords.get(pl, 0) + e) % mod
        if tot:
            coords[pl] = tot
        else:
            coords.pop(pl, None)
    return KElement(x.field, 2, tuple(sorted(coords.items(), key=lambda kv: kv[0].key())))


def k_neg(x: KElement) -> KElement:
    return k_scale(x, -1)


def k_scale(x: KElement, r: int) -> KElement:
    if x.payload is None:
        return x
    if x.n == 0:
        return KElement(x.field, 0, x.payload * r)
    if x.n == 1 and x.field.is_finite:
        return KElement(x.field, 1, _unit_exp_mod(x.field.base, x.payload * r))
    if x.n == 1:
        return KElement(x.field, 1, x.payload.pow(r))
    coords = []
    for pl, e in x.payload:
        mod = pl.residue_field.order - 1
        v = (e * r) % mod
        if v:
            coords.append((pl, v))
    return KElement(x.field, 2, tuple(coords))


def k_eq(x: KElement, y: KElement) -> bool:
    _same_shape(x, y)
    return x.payload == y.payload


def gamma(x: KElement, y: KElement) -> KElement:
    """Product in the Milnor ring: the degree-(r+n) class x.y."""
    if x.field != y.field:
        raise KTheoryError("gamma requires both classes over the same field")
    field = x.field
    n = x.n + y.n
    if x.payload is None or y.payload is None:
        return k_zero(field, n)
    if x.n == 0:
        return k_scale(y, x.payload)
    if y.n == 0:
        return k_scale(x, y.payload)
    if field.is_finite:
        return k_zero(field, n)  # K_{>=2}(finite) = 0
    if x.n == 1 and y.n == 1:
        return KElement(field, 2, _coords_of_pairs(field, [(x.payload, y.payload)]))
    return k_zero(field, n)  # degree >= 3 over F_q(t) vanishes


# ---------------------------------------------------------------------------
# Symbol lifts: payload -> explicit sum of symbols
# ---------------------------------------------------------------------------


def lift_symbols(x: KElement) -> list[tuple[FactoredUnit, FactoredUnit]]:
    """Write a degree-2 class as an explicit sum of symbols {pi, u}.

    Bass-Tate style descent: realize the coordinate at a largest-degree place
    v as {pi_v, u} with deg u < deg pi_v, subtract, repeat."""
    if x.n != 2 or not x.field.is_rational:
        raise KTheoryError("lift_symbols expects a degree-2 class over F_q(t)")
    field = x.field
    pairs: list[tuple[FactoredUnit, FactoredUnit]] = []
    coords = {pl: e for pl, e in (x.payload or ())}
    while coords:
        v = max(coords, key=lambda pl: pl.key())
        e = coords.pop(v)
        kappa = v.residue_field
        target = kappa.generator() ** e
        rep = v.rep_poly(target)
        a = FactoredUnit.of(field.base.one(), [(v.pi, 1)])
        b = unit_factor(rep)
        pairs.append((a, b))
        for f, _ in b.factors:
            w = Place.finite_place(field, f)
            mod = w.residue_field.order - 1
            if mod == 1:
                continue
            t = _tame_exponent(w, a, b)
            if not t:
                continue
            rem = (coords.get(w, 0) - t) % mod
            if rem:
                coords[w] = rem
            else:
                coords.pop(w, None)
    return pairs


# ---------------------------------------------------------------------------
# Field maps (D1 restriction / D2 corestriction carriers)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldMap:
    """A supported morphism of universe fields.

    finite -> finite: ff_emb; finite -> rational: constants inclusion through
    ff_emb into the constant field; rational -> rational: coefficientwise
    ff_emb plus t |-> t_image (a nonconstant rational function over dst)."""

    src: FieldRef
    dst: FieldRef
    ff_emb: Optional[FieldEmbedding] = None
    t_image: Optional[RationalFunction] = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def ff(sub: FiniteField, ext: FiniteField, frob: int = 0) -> "FieldMap":
        return FieldMap(FieldRef.finite(sub), FieldRef.finite(ext), FieldEmbedding(sub, ext, frob))

    @staticmethod
    def const_into(sub: FiniteField, dst: FieldRef, frob: int = 0) -> "FieldMap":
        if not dst.is_rational:
            raise KTheoryError("const_into targets a rational function field")
        return FieldMap(FieldRef.finite(sub), dst, FieldEmbedding(sub, dst.base, frob))

    @staticmethod
    def function(
        src: FieldRef, dst: FieldRef, t_image: RationalFunction, frob: int = 0
    ) -> "FieldMap":
        if not (src.is_rational and dst.is_rational):
            raise KTheoryError("function maps go between rational function fields")
        if t_image.field != dst.base:
            raise KTheoryError("t_image must live over the target constant field")
        if t_image.is_constant():
            raise KTheoryError("t_image must be nonconstant (field maps are injective)")
        return FieldMap(src, dst, FieldEmbedding(src.base, dst.base, frob), t_image)

    @staticmethod
    def const_ext(src: FieldRef, dst: FieldRef, frob: int = 0) -> "FieldMap":
        return FieldMap.function(src, dst, RationalFunction.var(dst.base), frob)

    @staticmethod
    def identity(ref: FieldRef) -> "FieldMap":
        if ref.is_finite:
            return FieldMap.ff(ref.base, ref.base)
        return FieldMap.const_ext(ref, ref)

    @staticmethod
    def of_embedding(emb: FieldEmbedding) -> "FieldMap":
        return FieldMap(FieldRef.finite(emb.sub), FieldRef.finite(emb.ext), emb)

    # -- shape ---------------------------------------------------------------

    @property
    def is_finite_map(self) -> bool:
        if self.src.is_finite and self.dst.is_finite:
            return True
        return self.src.is_rational and self.dst.is_rational

    def degree(self) -> int:
        """[dst : src] for finite maps."""
        if self.src.is_finite and self.dst.is_finite:
            return self.dst.base.m // self.src.base.m
        if not self.is_finite_map:
            raise KTheoryError(f"{self!r} is not a finite extension")
        rel_const = self.dst.base.m // self.src.base.m
        sub_deg = max(self.t_image.num.degree, self.t_image.den.degree)
        return rel_const * sub_deg

    def compose(self, outer: "FieldMap") -> "FieldMap":
        """outer o self."""
        if self.dst != outer.src:
            raise KTheoryError("maps do not compose")
        if self.src.is_finite and outer.dst.is_finite:
            return FieldMap(self.src, outer.dst, self.ff_emb.compose(outer.ff_emb), None)
        if self.src.is_finite:
            return FieldMap(self.src, outer.dst, self.ff_emb.compose(outer.ff_emb), None)
        emb = self.ff_emb.compose(outer.ff_emb)
        # t |-> self.t_image, then apply outer coefficientwise and substitute
        num, den = self.t_image.num, self.t_image.den
        num2 = _map_poly_through(num, outer)
        den2 = _map_poly_through(den, outer)
        return FieldMap(self.src, outer.dst, emb, num2 / den2)

    def __repr__(self) -> str:
        if self.t_image is None:
            return f"{self.src!r}->{self.dst!r}"
        return f"{self.src!r}->{self.dst!r}[t->{self.t_image!r}]"


def _map_poly_through(f: Poly, m: FieldMap) -> RationalFunction:
    """Apply a rational->rational map to a polynomial over the source base."""
    fe = f.map_coeffs(m.ff_emb)
    num, den = fe.compose_rational(m.t_image.num, m.t_image.den)
    return RationalFunction(num, den)


def _map_factored(fu: FactoredUnit, m: FieldMap) -> FactoredUnit:
    c = m.ff_emb.apply(fu.constant)
    out = FactoredUnit.of(c, ())
    for f, e in fu.factors:
        out = out * unit_factor(_map_poly_through(f, m)).pow(e)
    return out


# -- restriction (D1) --------------------------------------------------------


def res_map(m: FieldMap, x: KElement) -> KElement:
    if x.field != m.src:
        raise KTheoryError("element not over the source of the map")
    n = x.n
    if x.payload is None:
        return k_zero(m.dst, n)
    if n == 0:
        return k_int(m.dst, x.payload)
    if m.src.is_finite and m.dst.is_finite:
        if n == 1:
            e = x.payload * m.ff_emb.ratio * m.ff_emb.twist
            return KElement(m.dst, 1, _unit_exp_mod(m.dst.base, e))
        return k_zero(m.dst, n)
    if m.src.is_finite:
        # constants into F_q(t)
        if n == 1:
            if x.payload == 0:
                return k_zero(m.dst, 1)
            c = m.ff_emb.apply(m.src.base.generator() ** x.payload)
            return KElement(m.dst, 1, FactoredUnit.of(c, ()))
        return k_zero(m.dst, n)
    # rational -> rational
    if n == 1:
        return KElement(m.dst, 1, _map_factored(x.payload, m))
    if n == 2:
        pairs = lift_symbols(x)
        out = k_zero(m.dst, 2)
        for a, b in pairs:
            out = k_add(out, symbol(m.dst, [_map_factored(a, m), _map_factored(b, m)]))
        return out
    return k_zero(m.dst, n)


# -- places over / below -----------------------------------------------------


def place_below(m: FieldMap, w: Place) -> tuple[Place, FieldEmbedding]:
    """The place of the source under w, with the induced residue embedding."""
    if w.field != m.dst or not m.src.is_rational:
        raise KTheoryError("place_below expects a place of the target of a function map")
    f = m.t_image
    if w.is_infinite:
        dn, dd = f.num.degree, f.den.degree
        if dn > dd:
            return Place.infinite(m.src), _const_embed_plain(m, w.residue_field)
        if dn < dd:
            beta = w.residue_field.zero()
        else:
            beta = f.num.lc() / f.den.lc()
        return _finite_below(m, w, beta)
    den_val = f.den.eval(w.root)
    if den_val.is_zero():
        return Place.infinite(m.src), _const_embed_plain(m, w.residue_field)
    beta = f.num.eval(w.root) / den_val
    return _finite_below(m, w, beta)


def _finite_below(m: FieldMap, w: Place, beta: FFElem) -> tuple[Place, FieldEmbedding]:
    base = m.src.base
    pi_v = _minpoly_over_embedded(beta, base, _const_embed_plain(m, beta.field))
    v = Place.finite_place(m.src, pi_v)
    if v.degree == 1:
        # the residue field is the source constants themselves
        return v, _const_embed_plain(m, beta.field)
    g_rep = v.rep_poly(v.residue_field.generator())
    img = _eval_with_embedding(g_rep, beta, _const_embed_plain(m, beta.field))
    return v, FieldEmbedding.from_generator_image(v.residue_field, beta.field, img)


def _const_embed_plain(m: FieldMap, target: FiniteField) -> FieldEmbedding:
    if target == m.dst.base:
        return m.ff_emb
    return m.ff_emb.compose(FieldEmbedding.canonical(m.dst.base, target))


def _minpoly_over_embedded(beta: FFElem, base: FiniteField, emb: FieldEmbedding) -> Poly:
    """Minimal polynomial of beta over an embedded copy of base (twist-aware)."""
    q = base.order
    big = beta.field
    conjugates = []
    cur = beta
    while True:
        conjugates.append(cur)
        cur = cur**q
        if cur == beta:
            break
    out = Poly.constant(big, 1)
    for c in conjugates:
        out = out * Poly.of(big, [big.neg_idx(c.idx), 1])
    return Poly.of(base, [emb.section(FFElem(big, idx)).idx for idx in out.coeffs])


def _eval_with_embedding(f: Poly, x: FFElem, emb: FieldEmbedding) -> FFElem:
    acc = x.field.zero()
    for c in reversed(f.coeffs):
        acc = acc * x + emb.apply(FFElem(f.field, c))
    return acc


def places_over(m: FieldMap, v: Place) -> list[tuple[Place, int, FieldEmbedding]]:
    """All places w of the target over v, with ramification e and the induced
    residue embedding kappa(v) -> kappa(w)."""
    if v.field != m.src:
        raise KTheoryError("place not on the source field")
    uni = res_map(m, KElement(m.src, 1, v.uniformizer()))
    fu: FactoredUnit = uni.payload
    out = []
    for f, e in fu.factors:
        if e <= 0:
            continue
        w = Place.finite_place(m.dst, f)
        out.append((w, e, _residue_embedding(m, v, w)))
    e_inf = -sum(e * f.degree for f, e in fu.factors)
    if e_inf > 0:
        w = Place.infinite(m.dst)
        out.append((w, e_inf, _residue_embedding(m, v, w)))
    out.sort(key=lambda t: t[0].key())
    return out


def _residue_embedding(m: FieldMap, v: Place, w: Place) -> FieldEmbedding:
    """kappa(v) -> kappa(w) induced by the map (t_v |-> image of t at w)."""
    kappa_w = w.residue_field
    if v.is_infinite or v.degree == 1:
        return _const_embed_plain(m, kappa_w)
    f = m.t_image
    if w.is_infinite:
        dn, dd = f.num.degree, f.den.degree
        if dn > dd:
            raise KTheoryError("t has a pole at this place")  # v finite forbids this
        beta = kappa_w.zero() if dn < dd else f.num.lc() / f.den.lc()
    else:
        beta = f.num.eval(w.root) / f.den.eval(w.root)
    g_rep = v.rep_poly(v.residue_field.generator())
    img = _eval_with_embedding(g_rep, beta, _const_embed_plain(m, kappa_w))
    return FieldEmbedding.from_generator_image(v.residue_field, kappa_w, img)


# -- corestriction (D2) -------------------------------------------------------


def cor_ff_k1_exp(emb: FieldEmbedding, e: int) -> int:
    """Transfer on K_1 along a finite-field embedding: the norm in exponents."""
    n_sub = emb.sub.order - 1
    if n_sub == 1:
        return 0
    return (e * pow(emb.twist, -1, n_sub)) % n_sub


def cor_map(m: FieldMap, x: KElement) -> KElement:
    """Corestriction M(dst) -> M(src) along the finite map m: src -> dst."""
    if x.field != m.dst:
        raise KTheoryError("element not over the target of the map")
    if not m.is_finite_map:
        raise KTheoryError(f"corestriction needs a finite extension, got {m!r}")
    n = x.n
    if x.payload is None:
        return k_zero(m.src, n)
    if n == 0:
        return k_int(m.src, x.payload * m.degree())
    if m.src.is_finite:
        if n == 1:
            return KElement(m.src, 1, cor_ff_k1_exp(m.ff_emb, x.payload))
        return k_zero(m.src, n)
    # rational -> rational
    if n == 1:
        return KElement(m.src, 1, _norm_factored(m, x.payload))
    if n == 2:
        coords: dict[Place, int] = {}
        for w, e in x.payload:
            v, emb = place_below(m, w)
            if v.is_infinite:
                continue  # the infinite coordinate is not part of the payload
            mod = v.residue_field.order - 1
            if mod == 1:
                continue
            contrib = cor_ff_k1_exp(emb, e)
            tot = (coords.get(v, 0) + contrib) % mod
            if tot:
                coords[v] = tot
            else:
                coords.pop(v, None)
        return KElement(m.src, 2, tuple(sorted(coords.items(), key=lambda kv: kv[0].key())))
    return k_zero(m.src, n)


def _norm_factored(m: FieldMap, fu: FactoredUnit) -> FactoredUnit:
    """Field norm on K_1 along a finite rational->rational map."""
    if m.t_image == RationalFunction.var(m.dst.base):
        return _const_norm(m, fu)
    if m.dst.base.m == m.src.base.m and m.ff_emb.frob == 0:
        return _subst_norm(m, fu)
    # factor t |-> f(s) through the constant extension: src -> mid -> dst
    mid = FieldRef.rational(m.dst.base, m.src.var)
    m_const = FieldMap.const_ext(m.src, mid, m.ff_emb.frob)
    m_sub = FieldMap.function(mid, m.dst, m.t_image)
    return _const_norm(m_const, _subst_norm(m_sub, fu))


def _const_norm(m: FieldMap, fu: FactoredUnit) -> FactoredUnit:
    """Norm for a constant field extension: product of coefficient conjugates."""
    src_b, dst_b = m.src.base, m.dst.base
    d = dst_b.m // src_b.m
    q = src_b.order
    c_norm = m.ff_emb.section(fu.constant ** ((dst_b.order - 1) // (q - 1)))
    out = FactoredUnit.of(c_norm, ())
    for f, e in fu.factors:
        prod = Poly.constant(dst_b, 1)
        conj = f
        for _ in range(d):
            prod = prod * conj
            conj = Poly.of(dst_b, tuple(dst_b.pow_idx(c, q) for c in conj.coeffs))
        down = Poly.of(src_b, [m.ff_emb.section(FFElem(dst_b, idx)).idx for idx in prod.coeffs])
        out = out * unit_factor(down).pow(e)
    return out


def _subst_norm(m: FieldMap, fu: FactoredUnit) -> FactoredUnit:
    """Norm along t |-> f(s) over the same constant field, via resultants."""
    B = m.dst.base
    P, Q = m.t_image.num, m.t_image.den
    h = fu.expand()
    num_norm = _poly_norm_resultant(B, P, Q, h.num)
    den_norm = _poly_norm_resultant(B, P, Q, h.den)
    return unit_factor(num_norm / den_norm)


def _poly_norm_resultant(B: FiniteField, P: Poly, Q: Poly, h: Poly) -> RationalFunction:
    """N(h(s)) in F_q(t) for t = P(s)/Q(s): Res_X(P - t Q, h) / lc^deg h.

    Entries of the Sylvester matrix are polynomials in t; the determinant is
    computed fraction-free (Bareiss)."""
    if h.is_zero():
        raise KTheoryError("norm of zero")
    n = max(P.degree, Q.degree)
    dh = h.degree
    one = Poly.constant(B, 1)
    if dh == 0:
        # constant: N(c) = c^n
        c = RationalFunction.of_poly(Poly.constant(B, h.lc() ** n))
        return c
    # M(X) = P(X) - t Q(X): coefficient of X^i is the t-polynomial P_i - t*Q_i
    def mcoef(i: int) -> Poly:
        pi = P.coeffs[i] if i <= P.degree else 0
        qi = Q.coeffs[i] if i <= Q.degree else 0
        return Poly.of(B, (pi, B.neg_idx(qi)))  # P_i - Q_i * t

    size = n + dh
    rows: list[list[Poly]] = []
    zero = Poly.of(B, ())
    for k in range(dh):  # rows of M coefficients
        row = [zero] * size
        for i in range(n + 1):
            row[k + n - i] = mcoef(i)
        rows.append(row)
    for k in range(n):  # rows of h coefficients (constants in t)
        row = [zero] * size
        for i in range(dh + 1):
            row[k + dh - i] = Poly.of(B, (h.coeffs[i],))
        rows.append(row)
    det = _poly_det_bareiss(rows, B)
    lc = mcoef(n)
    num = RationalFunction.of_poly(det)
    den = RationalFunction.of_poly(lc).inverse()
    out = num
    for _ in range(dh):
        out = out * den
    return out


def _poly_det_bareiss(mat: list[list[Poly]], B: FiniteField) -> Poly:
    n = len(mat)
    a = [row[:] for row in mat]
    prev = Poly.constant(B, 1)
    sign = 1
    for k in range(n - 1):
        if a[k][k].is_zero():
            piv = next((r for r in range(k + 1, n) if not a[r][k].is_zero()), None)
            if piv is None:
                return Poly.of(B, ())
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = a[i][j] * a[k][k] - a[i][k] * a[k][j]
                q, r = divmod(num, prev)
                if not r.is_zero():  # pragma: no cover
                    raise KTheoryError("Bareiss exact division failed")
                a[i][j] = q
            a[i][k] = Poly.of(B, ())
        prev = a[k][k]
    det = a[n - 1][n - 1]
    if sign < 0:
        det = -det
    return det


# -- convenience wrappers with canonical maps ---------------------------------


def canonical_map(src: FieldRef, dst: FieldRef) -> FieldMap:
    """The canonical embedding src -> dst in the supported lattice."""
    if src == dst:
        return FieldMap.identity(src)
    if src.is_finite and dst.is_finite:
        return FieldMap.ff(src.base, dst.base)
    if src.is_finite and dst.is_rational:
        return FieldMap.const_into(src.base, dst)
    if src.is_rational and dst.is_rational:
        if dst.base.p != src.base.p or dst.base.m % src.base.m:
            raise KTheoryError(f"no canonical map {src!r} -> {dst!r}")
        return FieldMap.const_ext(src, dst)
    raise KTheoryError(f"no canonical map {src!r} -> {dst!r}")


def res_field(src: FieldRef, dst: FieldRef, x: KElement) -> KElement:
    return res_map(canonical_map(src, dst), x)


def cor_field(src: FieldRef, dst: FieldRef, x: KElement) -> KElement:
    """Transfer along the canonical finite extension dst -> src (transfer goes
    down: x lives over src, the bigger field)."""
    return cor_map(canonical_map(dst, src), x)


# -- residue (D4) and specialization -------------------------------------------


def residue(place: Place, x: KElement, uniformizer: Optional[FactoredUnit] = None) -> KElement:
    """The tame symbol at the place, first-slot convention; degree drops by 1."""
    if x.field != place.field:
        raise KTheoryError("place and element over different fields")
    kref = FieldRef.residue(place)
    n = x.n
    if x.payload is None or n <= 0:
        return k_zero(kref, n - 1)
    if n == 1:
        return k_int(kref, place.val(x.payload))
    if n == 2:
        if place.is_infinite:
            return _residue_at_infinity(x, uniformizer)
        if uniformizer is None:
            for pl, e in x.payload:
                if pl == place:
                    return KElement(kref, 1, e)
            return k_zero(kref, 1)
        pairs = lift_symbols(x)
        mod = place.residue_field.order - 1
        total = 0
        for a, b in pairs:
            total = (total + _tame_exponent(place, a, b, uniformizer)) % (mod if mod > 1 else 1)
        return KElement(kref, 1, total if mod > 1 else 0)
    return k_zero(kref, n - 1)


def _residue_at_infinity(x: KElement, uniformizer: Optional[FactoredUnit]) -> KElement:
    """Residue at the infinite place via the substitution t |-> 1/s."""
    field = x.field
    B = field.base
    sref = FieldRef.rational(B, field.var + "_inv")
    inv = RationalFunction(Poly.constant(B, 1), Poly.x(B))
    m = FieldMap.function(field, sref, inv)
    y = res_map(m, x)
    s_place = Place.finite_place(sref, Poly.x(B))
    uni = None
    if uniformizer is not None:
        uni = _map_factored(uniformizer, m)
    out = residue(s_place, y, uni)
    return KElement(FieldRef.residue(Place.infinite(field)), out.n, out.payload)


def specialize(place: Place, x: KElement) -> KElement:
    """s_v(x) = d_v({-pi} . x): reduction mod v on units, identity on K_0."""
    if place.is_infinite:
        raise KTheoryError("specialization is defined at finite places")
    B = place.field.base
    minus_pi = KElement(
        place.field, 1, FactoredUnit.of(-B.one(), [(place.pi, 1)])
    )
    return residue(place, gamma(minus_pi, x))


def reduce_unit_class(place: Place, u: FactoredUnit) -> KElement:
    """The class of a v-unit in K_1 of the residue field."""
    ubar = place.reduce_unit(u)
    return k_unit_finite(FieldRef.residue(place), ubar)
