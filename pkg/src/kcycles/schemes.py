"""Desk-scale scheme models: graded point sets, residue fields, fibers.

Supported shapes: Spec of a finite field, the affine/projective/punctured
line, disjoint unions, and affine/projective planes carrying a closed-world
table of declared rational curves (lines x = c, y = c, graphs y = g(x), or a
supplied degree-1 parametrization).  Curves on surfaces come with an explicit
birational parametrization by the line; normalization fibers over the
declared closed points are computed from it and validated symbolically.
Nothing bivariate is ever factored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Optional, Sequence, Union

from .fields import (
    FFElem,
    FieldEmbedding,
    FiniteField,
    Poly,
    RationalFunction,
    factor_poly,
    irreducibles,
    make_field,
    poly_str,
)
from .milnor import FieldRef, KTheoryError, Place


class SchemeError(ValueError):
    """Malformed scheme descriptions or unsupported queries."""


# ---------------------------------------------------------------------------
# Bivariate polynomials (never factored; only evaluated and composed)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiPoly:
    """Sparse bivariate polynomial over a finite field: {(i, j): idx} for x^i y^j."""

    field: FiniteField
    terms: tuple[tuple[tuple[int, int], int], ...]

    @staticmethod
    def of(field: FiniteField, terms: dict[tuple[int, int], int]) -> "BiPoly":
        clean = {k: v for k, v in terms.items() if v}
        return BiPoly(field, tuple(sorted(clean.items())))

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def total_degree(self) -> int:
        return max((i + j for (i, j), _ in self.terms), default=-1)

    def top_form_at_line(self) -> Poly:
        """F_d(1, u): the top homogeneous part evaluated on the chart x = 1,
        y = u; this is the unit part of the function along the line at
        infinity (uniformizer 1/x)."""
        d = self.total_degree
        F = self.field
        coeffs: dict[int, int] = {}
        for (i, j), c in self.terms:
            if i + j == d:
                coeffs[j] = F.add_idx(coeffs.get(j, 0), c)
        out = [0] * (max(coeffs) + 1 if coeffs else 0)
        for j, c in coeffs.items():
            out[j] = c
        return Poly.of(F, out)

    def eval_rational(self, x: RationalFunction, y: RationalFunction) -> RationalFunction:
        F = self.field
        out = RationalFunction.constant(F, 0)
        for (i, j), c in self.terms:
            term = RationalFunction.constant(F, F.elem(c))
            for _ in range(i):
                term = term * x
            for _ in range(j):
                term = term * y
            out = out + term
        return out

    def eval_points(self, a: FFElem, b: FFElem) -> FFElem:
        F = a.field
        out = F.zero()
        for (i, j), c in self.terms:
            out = out + F.elem(c) * a**i * b**j
        return out

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for (i, j), c in self.terms:
            bit = []
            cs = repr(FFElem(self.field, c))
            if cs != "1" or (i == 0 and j == 0):
                bit.append(cs)
            if i:
                bit.append("x" if i == 1 else f"x^{i}")
            if j:
                bit.append("y" if j == 1 else f"y^{j}")
            parts.append("*".join(bit))
        return "+".join(parts)


def bipoly_x_minus(field: FiniteField, c: FFElem) -> BiPoly:
    return BiPoly.of(field, {(1, 0): 1, (0, 0): field.neg_idx(c.idx)})


def bipoly_y_minus(field: FiniteField, c: FFElem) -> BiPoly:
    return BiPoly.of(field, {(0, 1): 1, (0, 0): field.neg_idx(c.idx)})


def bipoly_y_minus_graph(field: FiniteField, g: Poly) -> BiPoly:
    terms = {(0, 1): 1}
    for i, c in enumerate(g.coeffs):
        if c:
            terms[(i, 0)] = field.neg_idx(c)
    return BiPoly.of(field, terms)


# ---------------------------------------------------------------------------
# Points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointRef:
    """A point of a scheme model: (scheme name, codimension, identifier).

    identifier: "generic" | a Place | a curve id | a closed-point id.
    residue: the FieldRef of the residue field (None only for the generic
    point of a surface, whose function field has transcendence degree 2 and
    is represented by declared-support symbols instead)."""

    scheme: str
    p: int
    ident: Union[str, Place]
    residue: Optional[FieldRef]

    def key(self) -> tuple:
        if isinstance(self.ident, Place):
            return (self.p, 1, self.ident.key())
        return (self.p, 0, (self.ident,))

    def __repr__(self) -> str:
        ident = repr(self.ident) if isinstance(self.ident, Place) else self.ident
        return f"<{self.scheme}:{self.p}:{ident}>"


@dataclass(frozen=True)
class FiberPoint:
    """One point of a normalization fiber: a place of the curve's line model,
    the residue embedding from the closed point's field, and the ramification
    index of the parametrized map at that branch."""

    place: Place
    emb: FieldEmbedding
    ram: int


@dataclass(frozen=True)
class ClosedPoint:
    ident: str
    residue: FiniteField
    # affine coordinates, or None for boundary points at infinity
    coords: Optional[tuple[FFElem, FFElem]]
    # direction u = y/x for boundary points ("inf" for the vertical direction)
    direction: Optional[Union[FFElem, str]] = None


@dataclass
class CurveDecl:
    """A declared rational curve on a plane model.

    param = (x(t), y(t)) polynomials giving a degree-1 (birational)
    parametrization of the curve; the function field of the normalization is
    F_q(t).  fibers[closed_id] lists the points of the normalization over
    that closed point.  The line at infinity of a projective plane is the
    special declaration with is_infinity=True (no affine equation)."""

    ident: str
    defining: Optional[BiPoly]
    param: Optional[tuple[Poly, Poly]]
    function_field: FieldRef
    fibers: dict[str, tuple[FiberPoint, ...]] = dc_field(default_factory=dict)
    boundary_fiber: Optional[tuple[str, FiberPoint]] = None  # projective models
    is_infinity: bool = False

    def restrict(self, other: BiPoly) -> RationalFunction:
        """other composed with this curve's parametrization."""
        if self.is_infinity:
            raise SchemeError("the line at infinity has no affine parametrization")
        x_t = RationalFunction.of_poly(self.param[0])
        y_t = RationalFunction.of_poly(self.param[1])
        return other.eval_rational(x_t, y_t)


# ---------------------------------------------------------------------------
# Scheme models
# ---------------------------------------------------------------------------


LINE_KINDS = ("AFFINE_LINE", "PROJ_LINE", "PUNCTURED_LINE")
PLANE_KINDS = ("AFFINE_PLANE", "PROJ_PLANE")
LINE_AT_INFINITY = "L_inf"


@dataclass
class SchemeModel:
    name: str
    kind: str
    dim: int
    base: FiniteField
    function_field: Optional[FieldRef]  # None for SPEC and surfaces
    removed: tuple[Place, ...] = ()
    curves: dict[str, CurveDecl] = dc_field(default_factory=dict)
    closed_points: dict[str, ClosedPoint] = dc_field(default_factory=dict)
    components: tuple["SchemeModel", ...] = ()
    spec_field: Optional[FiniteField] = None  # SPEC only

    @property
    def projective(self) -> bool:
        return self.kind in ("PROJ_LINE", "PROJ_PLANE")

    def generic_point(self) -> PointRef:
        if self.kind == "SPEC":
            return PointRef(self.name, 0, "spec", FieldRef.finite(self.spec_field))
        if self.dim == 1:
            return PointRef(self.name, 0, "generic", self.function_field)
        return PointRef(self.name, 0, "generic", None)

    def place_point(self, place: Place) -> PointRef:
        if self.dim != 1:
            raise SchemeError("place points live on line models")
        if place in self.removed:
            raise SchemeError(f"{place!r} was removed from {self.name}")
        if place.is_infinite and not self.projective:
            raise SchemeError("the affine line has no infinite place")
        return PointRef(self.name, 1, place, FieldRef.residue(place))

    def curve_point(self, ident: str) -> PointRef:
        decl = self.curves.get(ident)
        if decl is None:
            raise SchemeError(f"curve {ident!r} is not declared on {self.name}")
        return PointRef(self.name, 1, ident, decl.function_field)

    def closed_point(self, ident: str) -> PointRef:
        cp = self.closed_points.get(ident)
        if cp is None:
            raise SchemeError(f"closed point {ident!r} not on {self.name}")
        return PointRef(self.name, 2, ident, FieldRef.finite(cp.residue))


def points(X: SchemeModel, p: int, degree_bound: int = 1) -> list[PointRef]:
    """All codim-p points of residue degree <= bound (curves listed always)."""
    if p < 0 or p > X.dim:
        raise SchemeError(f"codimension {p} out of range for {X.name}")
    if degree_bound < 1:
        raise SchemeError("degree bound must be >= 1")
    if X.kind == "DISJOINT_UNION":
        out = []
        for comp in X.components:
            if p <= comp.dim:
                out.extend(points(comp, p, degree_bound))
        return out
    if p == 0:
        return [X.generic_point()]
    if X.dim == 1:
        out = []
        for d in range(1, degree_bound + 1):
            for pi in irreducibles(X.base, d):
                pl = Place.finite_place(X.function_field, pi)
                if pl not in X.removed:
                    out.append(X.place_point(pl))
            if d == 1 and X.projective:
                out.append(X.place_point(Place.infinite(X.function_field)))
        out.sort(key=lambda pt: pt.ident.key())
        return out
    if p == 1:
        return [X.curve_point(cid) for cid in sorted(X.curves)]
    out = [
        X.closed_point(cid)
        for cid in sorted(X.closed_points)
        if X.closed_points[cid].residue.m // X.base.m <= degree_bound
    ]
    return out


def specializations(
    X: SchemeModel, x: PointRef, degree_bound: int = 1
) -> list[tuple[PointRef, tuple[FiberPoint, ...]]]:
    """Points directly under x with their normalization fiber data.

    The generic point of a line model has one specialization per place; the
    degree bound windows that infinite stratum.  Curve and closed-world
    surface data are finite and listed in full."""
    if X.kind == "DISJOINT_UNION":
        for comp in X.components:
            if comp.name == x.scheme:
                return specializations(comp, x, degree_bound)
        raise SchemeError(f"{x!r} not on {X.name}")
    if x.scheme != X.name:
        raise SchemeError(f"{x!r} not on {X.name}")
    if x.p != 0 and x.p != 1:
        return []
    if X.dim <= x.p:
        return []
    if x.p == 0 and X.dim == 1:
        out = []
        for pt in points(X, 1, degree_bound):
            pl = pt.ident
            emb = FieldEmbedding.canonical(X.base, pl.residue_field)
            out.append((pt, (FiberPoint(pl, emb, 1),)))
        return out
    if x.p == 0 and X.dim == 2:
        return [(X.curve_point(cid), ()) for cid in sorted(X.curves)]
    # x is a curve on a surface
    decl = X.curves[x.ident]
    out = []
    for cid in sorted(decl.fibers):
        out.append((X.closed_point(cid), decl.fibers[cid]))
    if decl.boundary_fiber is not None:
        cid, fp = decl.boundary_fiber
        out.append((X.closed_point(cid), (fp,)))
    return out


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _line(kind: str, base: FiniteField, removed: Sequence[Place] = (), name=None) -> SchemeModel:
    ff = FieldRef.rational(base, "t")
    removed = tuple(removed)
    for pl in removed:
        if pl.field != ff:
            raise SchemeError("removed places must live on the model's function field")
    return SchemeModel(
        name=name or f"{kind}/GF({base.order})",
        kind=kind,
        dim=1,
        base=base,
        function_field=ff,
        removed=removed,
    )


def _rational_roots(f: Poly) -> list[FFElem]:
    out = []
    for pi, mult in factor_poly(f):
        if pi.degree == 1:
            out.append(-pi.coeff(0))
    return out


def _curve_from_spec(base: FiniteField, spec: dict) -> CurveDecl:
    """Build a CurveDecl from a table entry.

    Entries: {"id", "kind": "x=c" | "y=c" | "y=g(x)" | "param",
              "c": int, "g": coeff list, "x": coeff list, "y": coeff list}."""
    F = base
    t = Poly.x(F)
    kind = spec["kind"]
    cid = spec["id"]
    if kind == "x=c":
        c = F.elem(spec["c"])
        defining = bipoly_x_minus(F, c)
        param = (Poly.constant(F, c), t)
    elif kind == "y=c":
        c = F.elem(spec["c"])
        defining = bipoly_y_minus(F, c)
        param = (t, Poly.constant(F, c))
    elif kind == "y=g(x)":
        g = Poly.of(F, spec["g"])
        defining = bipoly_y_minus_graph(F, g)
        param = (t, g)
    elif kind == "param":
        xs = Poly.of(F, spec["x"])
        ys = Poly.of(F, spec["y"])
        defining = BiPoly.of(F, {tuple(map(int, k.split(","))): v for k, v in spec["defining"].items()})
        param = (xs, ys)
    else:
        raise SchemeError(f"unknown curve kind {kind!r}")
    ff = FieldRef.rational(F, "t")
    decl = CurveDecl(ident=cid, defining=defining, param=param, function_field=ff)
    check = decl.restrict(defining)
    if not check.is_zero():
        raise SchemeError(f"parametrization of {cid!r} does not satisfy its equation")
    return decl


def _plane(kind: str, base: FiniteField, curve_specs: Sequence[dict], name=None) -> SchemeModel:
    F = base
    model = SchemeModel(
        name=name or f"{kind}/GF({F.order})",
        kind=kind,
        dim=2,
        base=F,
        function_field=None,
    )
    decls = [_curve_from_spec(F, spec) for spec in curve_specs]
    ids = [d.ident for d in decls]
    if len(set(ids)) != len(ids):
        raise SchemeError("duplicate curve ids")
    for d in decls:
        model.curves[d.ident] = d
    projective = kind == "PROJ_PLANE"

    # distinct curves must not share a component: the restriction of one
    # defining polynomial along the other's parametrization must be nonzero
    for d in decls:
        for d2 in decls:
            if d.ident != d2.ident and d.restrict(d2.defining).is_zero():
                raise SchemeError(f"curves {d.ident!r} and {d2.ident!r} share a component")

    # closed points: pairwise intersections, which must be rational
    def add_affine_point(a: FFElem, b: FFElem) -> str:
        cid = f"pt({a!r},{b!r})"
        if cid not in model.closed_points:
            model.closed_points[cid] = ClosedPoint(cid, F, (a, b))
        return cid

    for d in decls:
        for d2 in decls:
            if d2.ident == d.ident:
                continue
            h = d.restrict(d2.defining)
            if h.is_constant():
                continue
            poly = h.num
            nonrational = [pi for pi, _ in factor_poly(poly) if pi.degree > 1]
            if nonrational:
                raise SchemeError(
                    f"intersection of {d.ident!r} and {d2.ident!r} is not rational: "
                    f"{nonrational[0]!r}"
                )
            for tau in _rational_roots(poly):
                add_affine_point(d.param[0].eval(tau), d.param[1].eval(tau))

    # every curve's normalization fiber over every declared closed point
    for d in decls:
        fibers: dict[str, tuple[FiberPoint, ...]] = {}
        for cid, cp in model.closed_points.items():
            a, b = cp.coords
            if not d.defining.eval_points(a, b).is_zero():
                continue
            fx = d.param[0] - Poly.constant(F, a)
            fy = d.param[1] - Poly.constant(F, b)
            if fx.is_zero():
                g = fy.monic()
            elif fy.is_zero():
                g = fx.monic()
            else:
                g = fx.gcd(fy)
            if g.is_constant():
                raise SchemeError(
                    f"closed point {cid!r} lies on {d.ident!r} but outside its "
                    f"affine parametrization"
                )
            fps = []
            for tau in _rational_roots(g):
                pl = Place.finite_place(d.function_field, Poly.of(F, (F.neg_idx(tau.idx), 1)))
                orders = []
                if not fx.is_zero():
                    orders.append(_order_at(fx, tau))
                if not fy.is_zero():
                    orders.append(_order_at(fy, tau))
                emb = FieldEmbedding.canonical(F, pl.residue_field)
                fps.append(FiberPoint(pl, emb, max(1, min(orders))))
            fibers[cid] = tuple(fps)
        d.fibers = fibers

    if projective:
        # boundary points indexed by direction u = y/x (or "inf" for vertical)
        def add_boundary(direction) -> str:
            tag = "inf" if isinstance(direction, str) else repr(direction)
            cid = f"inf(u={tag})"
            if cid not in model.closed_points:
                model.closed_points[cid] = ClosedPoint(cid, F, None, direction)
            return cid

        for d in decls:
            dx, dy = d.param[0].degree, d.param[1].degree
            if dx < dy:
                direction = "inf"  # vertical: [0:1:0]
            elif dx > dy:
                direction = F.zero()  # [1:0:0]
            else:
                direction = d.param[1].lc() / d.param[0].lc()
            cid = add_boundary(direction)
            pl = Place.infinite(d.function_field)
            emb = FieldEmbedding.canonical(F, pl.residue_field)
            d.boundary_fiber = (cid, FiberPoint(pl, emb, 1))

        # the line at infinity, with coordinate u = y/x
        linf_ff = FieldRef.rational(F, "u")
        linf = CurveDecl(
            ident=LINE_AT_INFINITY,
            defining=None,
            param=None,
            function_field=linf_ff,
            is_infinity=True,
        )
        fibers = {}
        for cid, cp in model.closed_points.items():
            if cp.coords is not None:
                continue
            if isinstance(cp.direction, str):
                pl = Place.infinite(linf_ff)
            else:
                pl = Place.finite_place(
                    linf_ff, Poly.of(F, (F.neg_idx(cp.direction.idx), 1))
                )
            emb = FieldEmbedding.canonical(F, pl.residue_field)
            fibers[cid] = (FiberPoint(pl, emb, 1),)
        linf.fibers = fibers
        model.curves[LINE_AT_INFINITY] = linf
    return model


def _order_at(f: Poly, tau: FFElem) -> int:
    lin = Poly.of(f.field, (f.field.neg_idx(tau.idx), 1))
    n = 0
    while not f.is_zero():
        q, r = divmod(f, lin)
        if not r.is_zero():
            break
        f = q
        n += 1
    return n


def builtin(kind: str, base: FiniteField, **kw) -> SchemeModel:
    """Construct one of the built-in models.

    kinds: SPEC, AFFINE_LINE, PROJ_LINE, PUNCTURED_LINE(removed=[Place...]),
    DISJOINT_UNION(models=[...]), AFFINE_PLANE(curves=[spec...]),
    PROJ_PLANE(curves=[spec...])."""
    if kind == "SPEC":
        return SchemeModel(
            name=f"SPEC/GF({base.order})",
            kind="SPEC",
            dim=0,
            base=base,
            function_field=None,
            spec_field=base,
        )
    if kind in ("AFFINE_LINE", "PROJ_LINE"):
        return _line(kind, base)
    if kind == "PUNCTURED_LINE":
        removed = kw.get("removed", ())
        if not removed:
            raise SchemeError("PUNCTURED_LINE needs removed places")
        pls = tuple(removed)
        tags = ",".join(repr(p) for p in pls)
        return _line("PUNCTURED_LINE", base, pls, name=f"A1-{{{tags}}}/GF({base.order})")
    if kind == "DISJOINT_UNION":
        comps = tuple(kw["models"])
        if not comps:
            raise SchemeError("empty disjoint union")
        names = [c.name for c in comps]
        if len(set(names)) != len(names):
            raise SchemeError("components must have distinct names")
        return SchemeModel(
            name=" + ".join(names),
            kind="DISJOINT_UNION",
            dim=max(c.dim for c in comps),
            base=base,
            function_field=None,
            components=comps,
        )
    if kind in PLANE_KINDS:
        return _plane(kind, base, kw.get("curves", ()))
    raise SchemeError(f"unknown builtin kind {kind!r}")


# ---------------------------------------------------------------------------
# JSON descriptions
# ---------------------------------------------------------------------------


def load_scheme(text: str) -> SchemeModel:
    """Parse a scheme description: {"kind", "base": {"p", "m"}, "curves":
    [...], "removed": ["t", "t+1", ...]}."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemeError(f"invalid JSON at position {exc.pos}: {exc.msg}") from exc
    for key in ("kind", "base"):
        if key not in data:
            raise SchemeError(f"missing field {key!r}")
    base = make_field(int(data["base"]["p"]), int(data["base"].get("m", 1)))
    kind = data["kind"]
    kw = {}
    if kind == "PUNCTURED_LINE":
        from .syntax import parse_poly

        ff = FieldRef.rational(base, "t")
        kw["removed"] = [
            Place.infinite(ff) if s == "inf" else Place.finite_place(ff, parse_poly(base, s, "t"))
            for s in data.get("removed", ())
        ]
    if kind in PLANE_KINDS:
        kw["curves"] = data.get("curves", ())
    return builtin(kind, base, **kw)
