"""Cycle complexes over the scheme models and their low-degree cohomology.

C^p(X;M)_n assigns to each codimension-p point a coefficient of degree n-p
over its residue field.  The differential sums residue pairs through
normalization fibers; supports stay finite because coordinates are kept in
factored normal form.  Cohomology is computed on degree-bounded windows via
integer normal forms and is exact for the line models, where the image
lattices stabilize at every bound.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence, Union

from .fields import (
    FFElem,
    FactoredUnit,
    FieldEmbedding,
    FiniteField,
    Poly,
    RationalFunction,
    irreducibles,
    make_field,
    unit_factor,
)
from . import milnor
from .intlinalg import cokernel_presentation, smith_normal_form
from .milnor import (
    FieldMap,
    FieldRef,
    KElement,
    KTheoryError,
    Place,
    k_add,
    k_eq,
    k_int,
    k_neg,
    k_zero,
    symbol,
)
from .premodule import MilnorInstance, ModInstance, PremoduleInstance, TwistInstance
from .schemes import (
    LINE_AT_INFINITY,
    BiPoly,
    CurveDecl,
    PointRef,
    SchemeModel,
    SchemeError,
    points,
    specializations,
)


class CycleError(ValueError):
    """Unsupported cycle operation or closed-world support violation."""


# ---------------------------------------------------------------------------
# Declared-support functions and symbols on plane models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlaneFunction:
    """c * prod F_Z^{e_Z} over the declared affine curves of a plane model."""

    constant: FFElem
    factors: tuple[tuple[str, int], ...]  # (curve id, exponent), sorted

    @staticmethod
    def of(constant: FFElem, factors) -> "PlaneFunction":
        if constant.is_zero():
            raise CycleError("plane functions must be nonzero")
        merged: dict[str, int] = {}
        for cid, e in factors:
            if e:
                merged[cid] = merged.get(cid, 0) + e
        items = tuple(sorted((c, e) for c, e in merged.items() if e))
        return PlaneFunction(constant, items)

    def exponent_of(self, cid: str) -> int:
        for c, e in self.factors:
            if c == cid:
                return e
        return 0

    def __repr__(self) -> str:
        parts = [repr(self.constant)]
        parts += [f"[{c}]^{e}" if e != 1 else f"[{c}]" for c, e in self.factors]
        return "*".join(parts)


@dataclass(frozen=True)
class PlaneSymbol:
    """Formal Z-combination of symbols with declared-support entries.

    The coordinate type at the generic point of a surface: terms are
    (coefficient, entries) with exactly n entries per term."""

    n: int
    terms: tuple[tuple[int, tuple[PlaneFunction, ...]], ...]

    @staticmethod
    def of(n: int, terms) -> "PlaneSymbol":
        clean = []
        for coef, entries in terms:
            if coef == 0:
                continue
            if len(entries) != n:
                raise CycleError("every term needs exactly n entries")
            clean.append((coef, tuple(entries)))
        return PlaneSymbol(n, tuple(clean))

    @staticmethod
    def zero(n: int) -> "PlaneSymbol":
        return PlaneSymbol(n, ())

    def is_zero_formal(self) -> bool:
        return not self.terms

    def scaled(self, k: int) -> "PlaneSymbol":
        if k == 0:
            return PlaneSymbol.zero(self.n)
        return PlaneSymbol(self.n, tuple((c * k, e) for c, e in self.terms))

    def plus(self, other: "PlaneSymbol") -> "PlaneSymbol":
        if self.n != other.n:
            raise CycleError("degree mismatch in plane symbols")
        return PlaneSymbol(self.n, self.terms + other.terms)

    def support(self) -> set:
        out = set()
        for _c, entries in self.terms:
            for f in entries:
                out.update(cid for cid, _ in f.factors)
        return out


def _plane_valuation(X: SchemeModel, Z: CurveDecl, f: PlaneFunction) -> int:
    if Z.is_infinity:
        total = 0
        for cid, e in f.factors:
            total += e * X.curves[cid].defining.total_degree
        return -total
    return f.exponent_of(Z.ident)


def _plane_unit_part(X: SchemeModel, Z: CurveDecl, f: PlaneFunction) -> FactoredUnit:
    """Restriction to Z of f with the Z-component (or infinity pole) removed,
    as a factored unit of the curve's function field."""
    F = X.base
    out = FactoredUnit.of(f.constant, ())
    for cid, e in f.factors:
        if not Z.is_infinity and cid == Z.ident:
            continue
        decl = X.curves[cid]
        if Z.is_infinity:
            piece = decl.defining.top_form_at_line()
            if piece.is_zero():  # pragma: no cover
                raise CycleError("degenerate top form")
            if piece.is_constant():
                out = out * FactoredUnit.of(piece.lc(), ()).pow(e)
            else:
                out = out * unit_factor(piece).pow(e)
        else:
            restricted = Z.restrict(decl.defining)
            if restricted.is_zero():
                raise CycleError(f"{cid!r} restricts to zero along {Z.ident!r}")
            out = out * unit_factor(restricted).pow(e)
    return out


def _plane_tame(X: SchemeModel, Z: CurveDecl, fs: Sequence[PlaneFunction]) -> KElement:
    """Tame symbol of a degree-<=2 term along the curve Z (first-slot rule)."""
    kref = Z.function_field
    if len(fs) == 1:
        return k_int(kref, _plane_valuation(X, Z, fs[0]))
    a, b = fs
    va, vb = _plane_valuation(X, Z, a), _plane_valuation(X, Z, b)
    if va == 0 and vb == 0:
        return k_zero(kref, 1)
    ubar = _plane_unit_part(X, Z, a)
    wbar = _plane_unit_part(X, Z, b)
    F = X.base
    sign = FactoredUnit.of((-F.one()) ** (va * vb), ())
    value = sign * wbar.pow(va) * ubar.pow(-vb)
    return KElement(kref, 1, value)


def plane_symbol_residue(X: SchemeModel, Z: CurveDecl, sym: PlaneSymbol) -> KElement:
    """The residue along a declared curve of a generic-point symbol."""
    if sym.n == 0:
        return k_zero(Z.function_field, -1)
    if sym.n > 2:
        raise CycleError("surface symbols of degree > 2 are not supported")
    out = k_zero(Z.function_field, sym.n - 1)
    for coef, entries in sym.terms:
        contrib = _plane_tame(X, Z, entries)
        out = k_add(out, milnor.k_scale(contrib, coef))
    return out


# ---------------------------------------------------------------------------
# Cycle classes
# ---------------------------------------------------------------------------

Coordinate = Union[KElement, PlaneSymbol]


@dataclass
class CycleClass:
    """An element of C^p(X;M)_n: finitely many nonzero coordinates."""

    scheme: SchemeModel
    instance: PremoduleInstance
    p: int
    n: int
    coords: dict[PointRef, Coordinate] = dc_field(default_factory=dict)

    @staticmethod
    def from_generic(X: SchemeModel, inst: PremoduleInstance, n: int, value: Coordinate) -> "CycleClass":
        c = CycleClass(X, inst, 0, n)
        c.set_coord(X.generic_point(), value)
        return c

    def set_coord(self, pt: PointRef, value: Coordinate) -> None:
        if isinstance(value, PlaneSymbol):
            if pt.residue is not None:
                raise CycleError("plane symbols only live at a surface's generic point")
            bad = value.support() - set(self.scheme.curves) - {LINE_AT_INFINITY}
            if pt.scheme != self.scheme.name or bad:
                raise CycleError(f"undeclared support {sorted(bad)}")
            if LINE_AT_INFINITY in value.support():
                raise CycleError("the line at infinity is not an affine equation")
            if value.is_zero_formal():
                self.coords.pop(pt, None)
                return
            self.coords[pt] = value
            return
        if value.is_zero():
            self.coords.pop(pt, None)
            return
        self.coords[pt] = value

    def is_zero(self) -> bool:
        return not self.coords

    def add(self, other: "CycleClass") -> "CycleClass":
        if (self.scheme.name, self.p, self.n) != (other.scheme.name, other.p, other.n):
            raise CycleError("cycle classes live in different groups")
        out = CycleClass(self.scheme, self.instance, self.p, self.n, dict(self.coords))
        for pt, v in other.coords.items():
            if pt in out.coords:
                cur = out.coords[pt]
                if isinstance(v, PlaneSymbol):
                    merged: Coordinate = cur.plus(v)
                    if merged.is_zero_formal():
                        del out.coords[pt]
                    else:
                        out.coords[pt] = merged
                else:
                    s = self.instance.add(cur, v)
                    if s.is_zero():
                        del out.coords[pt]
                    else:
                        out.coords[pt] = s
            else:
                out.coords[pt] = v
        return out

    def eq(self, other: "CycleClass") -> bool:
        if set(self.coords) != set(other.coords):
            return False
        for pt, v in self.coords.items():
            w = other.coords[pt]
            if isinstance(v, PlaneSymbol) or isinstance(w, PlaneSymbol):
                if v.terms != w.terms:
                    return False
            elif not self.instance.eq(v, w):
                return False
        return True

    def support(self) -> list[PointRef]:
        return sorted(self.coords, key=lambda pt: pt.key())

    def to_dict(self) -> dict:
        from .syntax import coordinate_to_json

        return {
            "scheme": self.scheme.name,
            "instance": getattr(self.instance, "name", "milnor"),
            "p": self.p,
            "n": self.n,
            "coords": [
                {"point": repr(pt), "value": coordinate_to_json(v)}
                for pt, v in sorted(self.coords.items(), key=lambda kv: kv[0].key())
            ],
        }


# ---------------------------------------------------------------------------
# Residue pairs and the differential
# ---------------------------------------------------------------------------


def _line_component(X: SchemeModel, name: str) -> SchemeModel:
    if X.kind != "DISJOINT_UNION":
        return X
    for comp in X.components:
        if comp.name == name:
            return comp
    raise CycleError(f"no component {name!r} in {X.name}")


def residue_pair(
    X: SchemeModel,
    inst: PremoduleInstance,
    x: PointRef,
    y: PointRef,
    rho: Coordinate,
) -> KElement:
    """d_y^x(rho): the sum over the normalization fiber of kappa(y)-transfers
    of residues; zero when y is not a specialization of x."""
    comp = _line_component(X, x.scheme)
    kdeg = rho.n  # coordinate degree over kappa(x)
    if y.scheme != comp.name or y.p != x.p + 1:
        return k_zero(y.residue, kdeg - 1)
    if x.p == 0 and comp.dim >= 1:
        if isinstance(rho, PlaneSymbol):
            Z = comp.curves.get(y.ident)
            if Z is None:
                raise CycleError(f"{y!r} is not a declared curve")
            return plane_symbol_residue(comp, Z, rho)
        if not isinstance(y.ident, Place):
            raise CycleError(f"{y!r} is not a place of the line {comp.name}")
        return inst.residue(y.ident, rho)
    if x.p == 1 and comp.dim == 2:
        decl = comp.curves[x.ident]
        fiber = decl.fibers.get(y.ident, ())
        if decl.boundary_fiber is not None and decl.boundary_fiber[0] == y.ident:
            fiber = fiber + (decl.boundary_fiber[1],)
        out = k_zero(y.residue, kdeg - 1)
        for fp in fiber:
            down = inst.cor(FieldMap.of_embedding(fp.emb), inst.residue(fp.place, rho))
            out = inst.add(out, down)
        return out
    return k_zero(y.residue, kdeg - 1)


def _k1_residue_places(x: KElement) -> list[Place]:
    fu: FactoredUnit = x.payload
    out = [Place.finite_place(x.field, f) for f, _ in fu.factors]
    if sum(e * f.degree for f, e in fu.factors):
        out.append(Place.infinite(x.field))
    return out


def _k2_residue_places(x: KElement) -> list[Place]:
    out = [pl for pl, _ in x.payload]
    inf = Place.infinite(x.field)
    if not milnor.residue(inf, x).is_zero():
        out.append(inf)
    return out


def _generic_line_targets(X: SchemeModel, inst, rho: KElement) -> list[Place]:
    """Places of a line model where the generic coordinate can have residues."""
    deg = rho.n
    if rho.payload is None or deg <= 0:
        return []
    if deg == 1:
        cands = _k1_residue_places(rho)
    elif deg == 2:
        cands = _k2_residue_places(rho)
    else:
        cands = []
    out = []
    for pl in cands:
        if pl.is_infinite and not X.projective:
            continue
        if pl in X.removed:
            continue
        out.append(pl)
    return out


def _curve_coordinate_targets(
    X: SchemeModel, decl: CurveDecl, inst, rho: KElement
) -> dict[str, None]:
    """Closed points of the surface where a curve coordinate has residues.

    The coordinate's residue support must be covered by the declared fibers;
    anything else is a closed-world violation."""
    deg = rho.n
    if rho.payload is None or deg <= 0:
        return {}
    cands = _k1_residue_places(rho) if deg == 1 else _k2_residue_places(rho)
    covered: dict[Place, str] = {}
    for cid, fiber in decl.fibers.items():
        for fp in fiber:
            covered[fp.place] = cid
    if decl.boundary_fiber is not None:
        cid, fp = decl.boundary_fiber
        covered[fp.place] = cid
    out: dict[str, None] = {}
    for pl in cands:
        target = covered.get(pl)
        if target is None:
            if pl.is_infinite and not X.projective:
                continue  # boundary not part of the affine model
            if not inst.residue(pl, rho).is_zero():
                raise CycleError(
                    f"residue support {pl!r} of a coordinate on {decl.ident!r} "
                    f"hits no declared closed point"
                )
            continue
        out[target] = None
    return out


def differential(c: CycleClass) -> CycleClass:
    """d^p: sums residue pairs into codimension p+1."""
    X, inst = c.scheme, c.instance
    out = CycleClass(X, inst, c.p + 1, c.n)
    for x_pt, rho in c.coords.items():
        comp = _line_component(X, x_pt.scheme)
        if x_pt.p >= comp.dim:
            continue
        if x_pt.p == 0 and comp.dim == 1:
            for pl in _generic_line_targets(comp, inst, rho):
                y = comp.place_point(pl)
                contrib = inst.residue(pl, rho)
                _accumulate(out, inst, y, contrib)
        elif x_pt.p == 0 and comp.dim == 2:
            if not isinstance(rho, PlaneSymbol):
                raise CycleError("surface generic coordinates must be plane symbols")
            for cid in sorted(comp.curves):
                Z = comp.curves[cid]
                contrib = plane_symbol_residue(comp, Z, rho)
                _accumulate(out, inst, comp.curve_point(cid), contrib)
        elif x_pt.p == 1 and comp.dim == 2:
            decl = comp.curves[x_pt.ident]
            for cid in _curve_coordinate_targets(comp, decl, inst, rho):
                y = comp.closed_point(cid)
                contrib = residue_pair(X, inst, x_pt, y, rho)
                _accumulate(out, inst, y, contrib)
        else:  # pragma: no cover
            raise CycleError(f"unsupported stratum for {x_pt!r}")
    return out


def _accumulate(out: CycleClass, inst, pt: PointRef, value: KElement) -> None:
    if value.is_zero():
        return
    if pt in out.coords:
        s = inst.add(out.coords[pt], value)
        if s.is_zero():
            del out.coords[pt]
        else:
            out.coords[pt] = s
    else:
        out.coords[pt] = value


# ---------------------------------------------------------------------------
# (FD) and (C)
# ---------------------------------------------------------------------------


@dataclass
class FDReport:
    passed: bool
    support_small: list
    support_large: list
    details: str = ""


def check_FD(c: CycleClass, bounds: tuple[int, int] = (2, 5)) -> FDReport:
    """Support of d(c) is finite and stable as the enumeration window grows.

    The support computation is payload-driven; stability is verified by
    recomputing residues (through the symbol-lift route for degree 2) at
    every window place outside the computed support."""
    dc = differential(c)
    support = set(dc.coords)
    small, large = bounds
    X, inst = c.scheme, c.instance
    for x_pt, rho in c.coords.items():
        comp = _line_component(X, x_pt.scheme)
        if comp.dim != 1 or x_pt.p != 0:
            continue
        for bound in bounds:
            for y in points(comp, 1, bound):
                if y in support:
                    continue
                pl = y.ident
                if isinstance(rho, KElement) and rho.n == 2 and not pl.is_infinite:
                    got = inst.residue(pl, rho, uniformizer=pl.uniformizer())
                else:
                    got = inst.residue(pl, rho)
                if not got.is_zero():
                    return FDReport(
                        False,
                        sorted(map(repr, support)),
                        [repr(y)],
                        details=f"unexpected residue at {y!r}",
                    )
    return FDReport(True, sorted(map(repr, support)), sorted(map(repr, support)))


@dataclass
class CReport:
    passed: bool
    samples: int
    failures: list


def _random_plane_function(X: SchemeModel, rng: random.Random) -> PlaneFunction:
    F = X.base
    affine = [cid for cid in sorted(X.curves) if not X.curves[cid].is_infinity]
    fac = []
    for _ in range(rng.randrange(0, 3)):
        fac.append((affine[rng.randrange(len(affine))], rng.choice([-2, -1, 1, 2])))
    return PlaneFunction.of(F.elem(rng.randrange(1, F.order)), fac)


def random_cycle_class(X: SchemeModel, inst: PremoduleInstance, n: int, rng) -> CycleClass:
    """A random codim-0 class with declared support (surfaces) or factored
    support (lines)."""
    if X.dim == 2:
        terms = []
        for _ in range(rng.randrange(1, 3)):
            entries = tuple(_random_plane_function(X, rng) for _ in range(n))
            terms.append((rng.choice([-2, -1, 1, 2]), entries))
        return CycleClass.from_generic(X, inst, n, PlaneSymbol.of(n, terms))
    value = inst.sample(X.function_field, n, rng)
    return CycleClass.from_generic(X, inst, n, value)


def check_C(X: SchemeModel, inst: PremoduleInstance, trials: int = 100, seed: int = 42) -> CReport:
    """d . d = 0 on sampled codim-0 classes (gradings n = 1, 2)."""
    failures = []
    count = 0
    for i in range(trials):
        rng = random.Random(f"checkC:{X.name}:{seed}:{i}")
        n = rng.choice([1, 2])
        c = random_cycle_class(X, inst, n, rng)
        dd = differential(differential(c))
        count += 1
        if not dd.is_zero():
            failures.append(
                {
                    "trial": i,
                    "class": c.to_dict(),
                    "dd_support": [repr(pt) for pt in dd.support()],
                }
            )
    return CReport(not failures, count, failures)


# ---------------------------------------------------------------------------
# A^0 membership and window cohomology
# ---------------------------------------------------------------------------


def a0_membership(X: SchemeModel, inst: PremoduleInstance, n: int, value: Coordinate) -> bool:
    """True iff the singleton codim-0 class has vanishing differential."""
    c = CycleClass.from_generic(X, inst, n, value)
    return differential(c).is_zero()


@dataclass
class GroupPresentation:
    generators: list[str]
    relations: list[list[int]]
    rank: int
    invariant_factors: list[int]
    distinguished: dict[str, list[int]]

    def to_dict(self) -> dict:
        return {
            "generators": self.generators,
            "invariant_factors": ["Z"] * self.rank
            + [str(d) for d in self.invariant_factors],
            "distinguished": self.distinguished,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def is_trivial(self) -> bool:
        return self.rank == 0 and not self.invariant_factors


def _inst_modulus(inst: PremoduleInstance, base_modulus: int) -> int:
    """Modulus of a cyclic coordinate group after the instance's quotient.

    base_modulus: 0 for Z, q-1 style for finite unit groups."""
    if isinstance(inst, TwistInstance):
        return _inst_modulus(inst.inner, base_modulus)
    if isinstance(inst, ModInstance):
        if base_modulus == 0:
            return inst.m
        return math.gcd(inst.m, base_modulus)
    return base_modulus


def _value_degree(inst: PremoduleInstance, n: int) -> int:
    if isinstance(inst, TwistInstance):
        return _value_degree(inst.inner, n + inst.r)
    return n


def _spec_presentation(X: SchemeModel, inst, n: int) -> GroupPresentation:
    deg = _value_degree(inst, n)
    label = repr(X.generic_point())
    if deg == 0:
        m = _inst_modulus(inst, 0)
        if m == 0:
            return GroupPresentation([label], [], 1, [], {label: [1]})
        return GroupPresentation([label], [[m]], 0, [m] if m > 1 else [], {label: [1] if m > 1 else []})
    if deg == 1:
        m = _inst_modulus(inst, X.spec_field.order - 1)
        if m > 1:
            return GroupPresentation([label], [[m]], 0, [m], {label: [1]})
        return GroupPresentation([], [], 0, [], {})
    return GroupPresentation([], [], 0, [], {})


def cohomology_window(
    X: SchemeModel, inst: PremoduleInstance, p: int, n: int, degree_bound: int = 2
) -> GroupPresentation:
    """Presentation of ker(d^p)/im(d^{p-1}) on the degree-<=D window.

    Exact for the line models (images stabilize at every bound) and for
    Spec; surface windows beyond structural zeros are out of scope."""
    if p < 0 or p > X.dim:
        raise CycleError(f"codimension {p} out of range")
    if degree_bound < 1:
        raise CycleError("window bound must be >= 1")
    if X.kind == "DISJOINT_UNION":
        parts = [cohomology_window(c, inst, p, n, degree_bound) for c in X.components if p <= c.dim]
        return _direct_sum(parts)
    if X.kind == "SPEC":
        return _spec_presentation(X, inst, n)
    if X.dim != 1:
        raise CycleError("window cohomology beyond curves is limited to structural checks")
    if p == 1:
        return _curve_p1_window(X, inst, n, degree_bound)
    return _curve_p0_window(X, inst, n, degree_bound)


def _direct_sum(parts: list[GroupPresentation]) -> GroupPresentation:
    gens: list[str] = []
    rank = 0
    tors: list[int] = []
    distinguished: dict[str, list[int]] = {}
    for pr in parts:
        gens.extend(pr.generators)
        rank += pr.rank
        tors.extend(pr.invariant_factors)
    rows = [[0] * len(tors) for _ in tors]
    for i, d in enumerate(tors):
        rows[i][i] = d
    _r, torsion, _im = cokernel_presentation(rows, len(tors)) if tors else (0, [], [])
    return GroupPresentation(gens, rows, rank, torsion, distinguished)


def _window_places(X: SchemeModel, D: int) -> list[Place]:
    out = []
    for pt in points(X, 1, D):
        out.append(pt.ident)
    return out


def _curve_p1_window(X: SchemeModel, inst, n: int, D: int) -> GroupPresentation:
    deg = _value_degree(inst, n - 1)
    places = _window_places(X, D)
    if deg < 0 or deg >= 2:
        return GroupPresentation([], [], 0, [], {})
    labels = [repr(pl) for pl in places]
    index = {pl: i for i, pl in enumerate(places)}
    moduli = []
    for pl in places:
        base_mod = 0 if deg == 0 else pl.residue_field.order - 1
        moduli.append(_inst_modulus(inst, base_mod))
    rows: list[list[int]] = []
    # torsion rows
    for i, m in enumerate(moduli):
        if m > 0:
            row = [0] * len(places)
            row[i] = m
            rows.append(row)

    def coords_of(dc: CycleClass) -> Optional[list[int]]:
        row = [0] * len(places)
        for pt, v in dc.coords.items():
            pl = pt.ident
            if pl not in index:
                return None  # image leaves the window
            if v.n == 0:
                row[index[pl]] = v.payload
            else:
                row[index[pl]] = v.payload  # exponent of the residue generator
        return row

    F = X.base
    gens_c0 = _window_c0_generators(X, inst, n, D)
    for val in gens_c0:
        dc = differential(CycleClass.from_generic(X, inst, n, val))
        row = coords_of(dc)
        if row is not None:
            rows.append(row)
    rank, torsion, images = cokernel_presentation(rows, len(places))
    distinguished = {labels[i]: images[i] for i in range(len(labels))}
    return GroupPresentation(labels, rows, rank, torsion, distinguished)


def _window_c0_generators(X: SchemeModel, inst, n: int, D: int) -> list[KElement]:
    """Generators of the degree-<=D part of the codim-0 coordinate group."""
    F = X.base
    ff = X.function_field
    deg = _value_degree(inst, n)
    irr = []
    for d in range(1, D + 1):
        irr.extend(irreducibles(F, d))
    out: list[KElement] = []
    if deg == 1:
        if F.order > 2:
            out.append(KElement(ff, deg, FactoredUnit.of(F.generator(), ())))
        for pi in irr:
            out.append(KElement(ff, deg, FactoredUnit.of(F.one(), [(pi, 1)])))
    elif deg == 2:
        gen_syms = []
        for i, pi in enumerate(irr):
            if F.order > 2:
                gen_syms.append((pi, None))
            for pj in irr[i + 1 :]:
                gen_syms.append((pi, pj))
        for a, b in gen_syms:
            fa = FactoredUnit.of(F.one(), [(a, 1)])
            fb = (
                FactoredUnit.of(F.generator(), ())
                if b is None
                else FactoredUnit.of(F.one(), [(b, 1)])
            )
            out.append(symbol(ff, [fa, fb]))
    return out


def _wrap_deg(inst, n: int) -> int:
    return _value_degree(inst, n)


def _curve_p0_window(X: SchemeModel, inst, n: int, D: int) -> GroupPresentation:
    deg = _value_degree(inst, n)
    ff = X.function_field
    F = X.base
    if deg < 0 or deg >= 2:
        # kernel of d^0 on K_{>=2}(F_q(t)) window classes is trivial: the
        # payload *is* the residue vector
        return GroupPresentation([], [], 0, [], {})
    if deg == 0:
        m = _inst_modulus(inst, 0)
        label = "1"
        if m == 0:
            return GroupPresentation([label], [], 1, [], {label: [1]})
        return GroupPresentation([label], [[m]], 0, [m] if m > 1 else [], {label: [1] if m > 1 else []})
    # deg == 1: kernel of the divisor map on the window unit group
    irr = []
    for d in range(1, D + 1):
        irr.extend(irreducibles(F, d))
    places = _window_places(X, D)
    index = {pl: i for i, pl in enumerate(places)}
    rows = []
    for pi in irr:
        val = KElement(ff, deg, FactoredUnit.of(F.one(), [(pi, 1)]))
        dc = differential(CycleClass.from_generic(X, inst, n, val))
        row = [0] * len(places)
        for pt, v in dc.coords.items():
            row[index[pt.ident]] = v.payload
        rows.append(row)
    # the constant generator maps to zero and contributes pure torsion; the
    # free part is the left kernel of the divisor matrix
    kernel_basis = _integer_left_kernel(rows, len(irr), len(places))
    gens = []
    for vec in kernel_basis:
        label = "*".join(f"({pi!r})^{e}" for pi, e in zip(irr, vec) if e) or "1"
        gens.append(label)
    const_mod = _inst_modulus(inst, F.order - 1)
    if const_mod != 1:
        gens.append("constants")
    rank = len(kernel_basis)
    torsion = [const_mod] if const_mod > 1 else []
    return GroupPresentation(gens, [], rank, torsion, {})


def _integer_left_kernel(rows: list[list[int]], nrows: int, ncols: int) -> list[list[int]]:
    """Basis of {x in Z^nrows : x * M = 0} for M given by rows."""
    if not rows:
        return []
    # transpose: kernel of M^T acting on column vectors
    mt = [[rows[i][j] for i in range(nrows)] for j in range(ncols)]
    d, v = smith_normal_form(mt, nrows)
    diag = [d[i][i] if i < len(d) else 0 for i in range(nrows)]
    out = []
    for j in range(nrows):
        if j >= len(diag) or diag[j] == 0:
            out.append([v[i][j] for i in range(nrows)])
    return [vec for vec in out if any(vec)]


# ---------------------------------------------------------------------------
# Flat pullback
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatMap:
    """A supported smooth/flat morphism f: target_model -> source_model.

    kinds: "open" (open immersion into src), "base_change" (constants grow),
    "projection" (plane onto a line, coordinate axis), "structural"
    (anything over Spec of the base)."""

    kind: str
    src: SchemeModel  # the scheme mapped *from* cycles' point of view: f: dst -> src
    dst: SchemeModel

    def __repr__(self) -> str:
        return f"flat[{self.kind}]:{self.dst.name}->{self.src.name}"


def flat_pullback(f: FlatMap, c: CycleClass) -> CycleClass:
    X, U = f.src, f.dst
    if c.scheme.name != X.name:
        raise CycleError("class does not live on the source of the pullback")
    inst = c.instance
    out = CycleClass(U, inst, c.p, c.n)
    if f.kind == "open":
        if U.dim != X.dim or U.base != X.base:
            raise CycleError("open immersions stay within one model family")
        if X.dim == 1:
            if not set(X.removed) <= set(U.removed):
                raise CycleError(f"{U.name} is not an open subscheme of {X.name}")
            if U.projective and not X.projective:
                raise CycleError(f"{U.name} is not contained in {X.name}")
        for pt, v in c.coords.items():
            if pt.p == 0:
                out.set_coord(U.generic_point(), v)
            else:
                pl = pt.ident
                if isinstance(pl, Place):
                    if pl in U.removed or (pl.is_infinite and not U.projective):
                        continue
                    out.set_coord(U.place_point(pl), v)
                else:
                    out.set_coord(PointRef(U.name, pt.p, pl, pt.residue), v)
        return out
    if f.kind == "base_change":
        mp = FieldMap.const_ext(X.function_field, U.function_field)
        for pt, v in c.coords.items():
            if pt.p == 0:
                out.set_coord(U.generic_point(), inst.res(mp, v))
            else:
                v_pl: Place = pt.ident
                for w, e, emb in milnor.places_over(mp, v_pl):
                    if e != 1:  # pragma: no cover - constant extensions are unramified
                        raise CycleError("ramified base change")
                    if w.is_infinite and not U.projective:
                        continue
                    _accumulate(out, inst, U.place_point(w), inst.res(FieldMap.of_embedding(emb), v))
        return out
    if f.kind == "projection":
        return _projection_pullback(f, c, out)
    if f.kind == "structural":
        for pt, v in c.coords.items():
            if pt.p != 0:
                raise CycleError("structural pullback defined on Spec classes")
            if U.dim == 1:
                mp = FieldMap.const_into(X.spec_field, U.function_field)
                out.set_coord(U.generic_point(), inst.res(mp, v))
            elif U.dim == 2:
                if v.n == 0:
                    out.set_coord(U.generic_point(), PlaneSymbol.of(0, [(v.payload, ())]))
                elif v.n == 1:
                    g = X.spec_field.generator()
                    fn = PlaneFunction.of(g ** (v.payload % (X.spec_field.order - 1)), ())
                    out.set_coord(U.generic_point(), PlaneSymbol.of(1, [(1, (fn,))]))
                else:
                    pass  # higher constants vanish on surfaces
            else:
                out.set_coord(U.generic_point(), v)
        return out
    raise CycleError(f"unsupported flat map kind {f.kind!r}")


def _projection_pullback(f: FlatMap, c: CycleClass, out: CycleClass) -> CycleClass:
    """A^2 -> A^1 along the x coordinate: t pulls back to the function x."""
    X, U = f.src, f.dst  # X a line, U a plane
    inst = c.instance
    F = X.base

    def vertical_curve(cval: FFElem) -> str:
        from .schemes import bipoly_x_minus

        want = bipoly_x_minus(F, cval)
        for cid, decl in U.curves.items():
            if not decl.is_infinity and decl.defining == want:
                return cid
        raise CycleError(f"vertical line x={cval!r} is not declared on {U.name}")

    def pull_fu(fu: FactoredUnit) -> PlaneFunction:
        factors = []
        for pi, e in fu.factors:
            if pi.degree != 1:
                raise CycleError("projection pullback needs degree-1 support")
            cval = -pi.coeff(0)
            factors.append((vertical_curve(cval), e))
        return PlaneFunction.of(fu.constant, factors)

    for pt, v in c.coords.items():
        if pt.p == 0:
            if v.payload is None:
                continue
            if v.n == 0:
                out.set_coord(U.generic_point(), PlaneSymbol.of(0, [(v.payload, ())]))
            elif v.n == 1:
                out.set_coord(U.generic_point(), PlaneSymbol.of(1, [(1, (pull_fu(v.payload),))]))
            elif v.n == 2:
                terms = []
                for a, b in milnor.lift_symbols(v):
                    terms.append((1, (pull_fu(a), pull_fu(b))))
                out.set_coord(U.generic_point(), PlaneSymbol.of(2, terms))
            else:
                continue
        else:
            pl: Place = pt.ident
            if pl.is_infinite or pl.degree != 1:
                raise CycleError("projection pullback needs degree-1 places")
            cid = vertical_curve(-pl.pi.coeff(0))
            decl = U.curves[cid]
            mp = FieldMap.const_into(pl.residue_field, decl.function_field)
            _accumulate(out, inst, U.curve_point(cid), inst.res(mp, v))
    return out


# ---------------------------------------------------------------------------
# Finite pushforward and the trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteCurveMap:
    """A supported finite map of line models (or the structural map to Spec).

    kinds: "const_ext" (source over F_{q^d}, target over F_q),
    "subst" (t |-> g(s), g polynomial of degree <= 5), "structural"."""

    kind: str
    src: SchemeModel  # the covering model (cycles get pushed from here)
    dst: SchemeModel
    g: Optional[Poly] = None  # subst only

    def field_map(self) -> FieldMap:
        if self.kind == "const_ext":
            return FieldMap.const_ext(self.dst.function_field, self.src.function_field)
        if self.kind == "subst":
            return FieldMap.function(
                self.dst.function_field,
                self.src.function_field,
                RationalFunction.of_poly(self.g),
            )
        raise CycleError("structural maps have no function-field extension")

    def degree(self) -> int:
        if self.kind == "structural":
            raise CycleError("the structural map is not finite")
        return self.field_map().degree()

    def __repr__(self) -> str:
        return f"finite[{self.kind}]:{self.src.name}->{self.dst.name}"


def pushforward_finite(f: FiniteCurveMap, c: CycleClass) -> CycleClass:
    if c.scheme.name != f.src.name:
        raise CycleError("class does not live on the covering model")
    inst = c.instance
    if f.kind == "structural":
        X, S = f.src, f.dst
        if S.kind != "SPEC":
            raise CycleError("structural pushforward lands on Spec")
        if not X.projective:
            raise CycleError("pushforward needs a proper source (use PROJ_LINE)")
        out = CycleClass(S, inst, max(c.p - 1, 0), c.n)
        target = S.generic_point()
        for pt, v in c.coords.items():
            if pt.p == 0:
                continue  # transcendental residue extension: contributes zero
            pl: Place = pt.ident
            emb = FieldEmbedding.canonical(S.spec_field, pl.residue_field)
            _accumulate(out, inst, target, inst.cor(FieldMap.of_embedding(emb), v))
        return out
    mp = f.field_map()
    out = CycleClass(f.dst, inst, c.p, c.n)
    for pt, v in c.coords.items():
        if pt.p == 0:
            _accumulate(out, inst, f.dst.generic_point(), inst.cor(mp, v))
        else:
            w: Place = pt.ident
            below, emb = milnor.place_below(mp, w)
            if below.is_infinite and not f.dst.projective:
                raise CycleError("image place is at infinity but the target is affine")
            _accumulate(
                out, inst, f.dst.place_point(below), inst.cor(FieldMap.of_embedding(emb), v)
            )
    return out


def trace(f: FiniteCurveMap) -> int:
    """Pushforward of the unit codim-0 class in K_0: equals the map degree."""
    inst = MilnorInstance()
    c = CycleClass.from_generic(f.src, inst, 0, k_int(f.src.function_field, 1))
    out = pushforward_finite(f, c)
    (pt, v), = out.coords.items()
    value = v.payload
    if value != f.degree():
        raise CycleError(f"trace {value} does not match the generic degree {f.degree()}")
    return value


# ---------------------------------------------------------------------------
# Divisor pullback (specialization along a principal divisor)
# ---------------------------------------------------------------------------


def divisor_pullback(
    X: SchemeModel, inst: PremoduleInstance, pi, a: Coordinate, n: int
):
    """i^*(a) = d_v(gamma_pi(a)) for the smooth principal divisor Z = pi^{-1}(0).

    On line models pi is a rational function whose divisor inside X is a
    single place with multiplicity one; on plane models pi is a declared
    curve equation."""
    if not a0_membership(X, inst, n, a):
        raise CycleError("divisor pullback requires a class in A^0")
    if X.dim == 1:
        fu = pi if isinstance(pi, FactoredUnit) else unit_factor(pi)
        inside = []
        for fpoly, e in fu.factors:
            pl = Place.finite_place(X.function_field, fpoly)
            if pl in X.removed:
                continue
            inside.append((pl, e))
        if X.projective:
            v_inf = -sum(e * fp.degree for fp, e in fu.factors)
            if v_inf:
                inside.append((Place.infinite(X.function_field), v_inf))
        if len(inside) != 1 or inside[0][1] != 1:
            raise CycleError(f"{fu!r} does not cut a smooth divisor inside {X.name}")
        v = inside[0][0]
        return inst.residue(v, inst.mult(KElement(X.function_field, 1, fu), a))
    if X.dim == 2:
        if not isinstance(pi, PlaneFunction):
            raise CycleError("plane divisors are cut by declared-support functions")
        nonzero = [(cid, e) for cid, e in pi.factors if e]
        if len(nonzero) != 1 or nonzero[0][1] != 1:
            raise CycleError("the cutting function must vanish on exactly one declared curve")
        cid = nonzero[0][0]
        Z = X.curves[cid]
        if not isinstance(a, PlaneSymbol):
            raise CycleError("surface classes are plane symbols")
        terms = [(coef, (pi,) + entries) for coef, entries in a.terms]
        prod = PlaneSymbol.of(a.n + 1, terms)
        return plane_symbol_residue(X, Z, prod)
    raise CycleError("divisor pullback is defined on curves and surfaces")
