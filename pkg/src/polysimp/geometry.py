"""Exact polyhedral machinery over index dimensions plus one size parameter.

A :class:`Polyhedron` lives in ``n_idx`` index dimensions followed by
``n_par`` parameter dimensions (zero or one).  Its integer points at a
concrete parameter value are the iteration space of an equation.  All tests
(feasibility, redundancy, implicit equalities) are exact: Fourier-Motzkin
over :class:`fractions.Fraction`, never floating point.

Integer semantics are assumed throughout, so inequalities are tightened
(``2i - 1 >= 0`` becomes ``i - 1 >= 0``) and the complement of
``cz + g >= 0`` is ``-cz - g - 1 >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from itertools import product
from typing import Iterable, Sequence

from .linalg import LinearSpace, Vector, dot, integerize, intersect_spaces, kernel, rank

GE, GT, EQ = ">=", ">", "="


class GeometryError(ValueError):
    """Raised on malformed geometric input (dimension mismatch, bad vectors)."""


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Constraint:
    """``coeffs . z + const >= 0`` (or ``== 0`` when ``eq``), integer normalized."""

    coeffs: tuple[int, ...]
    const: int
    eq: bool = False

    @staticmethod
    def make(coeffs: Sequence, const=0, eq: bool = False) -> "Constraint":
        vals = [Fraction(c) for c in coeffs] + [Fraction(const)]
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in vals), 1)
        ints = [int(v * den) for v in vals]
        cs, k = ints[:-1], ints[-1]
        g = reduce(math.gcd, cs, 0)
        if g == 0:
            return Constraint(tuple(cs), (k > 0) - (k < 0), eq)
        if eq:
            if k % g:
                # no integer solution: canonical contradiction
                return Constraint(tuple(0 for _ in cs), -1, False)
            cs, k = [c // g for c in cs], k // g
            lead = next(c for c in cs if c)
            if lead < 0:
                cs, k = [-c for c in cs], -k
            return Constraint(tuple(cs), k, True)
        # floor division tightens the constant for integer points
        return Constraint(tuple(c // g for c in cs), k // g, False)

    @property
    def dims(self) -> int:
        return len(self.coeffs)

    def is_trivial(self) -> bool:
        return not any(self.coeffs)

    def is_tautology(self) -> bool:
        return self.is_trivial() and (self.const == 0 if self.eq else self.const >= 0)

    def is_contradiction(self) -> bool:
        return self.is_trivial() and not self.is_tautology()

    def value(self, point: Sequence) -> int:
        return dot(self.coeffs, point) + self.const

    def holds(self, point: Sequence) -> bool:
        v = self.value(point)
        return v == 0 if self.eq else v >= 0

    def negated(self) -> "Constraint":
        """Integer complement of an inequality: ``-cz - g - 1 >= 0``."""
        if self.eq:
            raise GeometryError("cannot complement an equality as a single constraint")
        return Constraint.make([-c for c in self.coeffs], -self.const - 1)

    def as_equality(self) -> "Constraint":
        return Constraint.make(self.coeffs, self.const, eq=True)

    def shifted(self, delta: Sequence[int]) -> "Constraint":
        """Constraint describing the set translated by ``delta``."""
        return Constraint.make(self.coeffs, self.const - dot(self.coeffs, delta), self.eq)


# ---------------------------------------------------------------------------
# Fourier-Motzkin over rationals, with strict rows
# ---------------------------------------------------------------------------

Row = tuple[tuple[Fraction, ...], Fraction, str]


def _row(coeffs: Sequence, const, kind: str) -> Row:
    return tuple(Fraction(c) for c in coeffs), Fraction(const), kind


def _rows(constraints: Iterable[Constraint]) -> list[Row]:
    return [_row(c.coeffs, c.const, EQ if c.eq else GE) for c in constraints]


def _scale(r: Row) -> Row:
    cs, k, kind = r
    lead = next((abs(c) for c in cs if c), None)
    if lead is None:
        return r
    if kind == EQ:
        lead = next(c for c in cs if c)
    return tuple(c / lead for c in cs), k / lead, kind


def _trivial_ok(r: Row) -> bool:
    _, k, kind = r
    if kind == EQ:
        return k == 0
    if kind == GT:
        return k > 0
    return k >= 0


def _simplify(rows: Iterable[Row]) -> list[Row] | None:
    """Dedup rows, keep the tightest bound per normal; None if a contradiction shows up."""
    ineq: dict[tuple, tuple[Fraction, bool]] = {}
    eqs: dict[tuple, set] = {}
    for r in rows:
        cs, k, kind = _scale(r)
        if not any(cs):
            if not _trivial_ok((cs, k, kind)):
                return None
            continue
        if kind == EQ:
            eqs.setdefault(cs, set()).add(k)
            if len(eqs[cs]) > 1:
                return None
            continue
        strict = kind == GT
        old = ineq.get(cs)
        if old is None or k < old[0] or (k == old[0] and strict and not old[1]):
            ineq[cs] = (k, strict)
    out: list[Row] = [(cs, next(iter(ks)), EQ) for cs, ks in eqs.items()]
    out += [(cs, k, GT if s else GE) for cs, (k, s) in ineq.items()]
    # opposite inequalities a >= 0 and -a > 0 etc.
    for cs, (k, s) in ineq.items():
        neg = tuple(-c for c in cs)
        if neg in ineq:
            k2, s2 = ineq[neg]
            tot = k + k2
            if tot < 0 or (tot == 0 and (s or s2)):
                return None
    return out


def fm_eliminate(rows: list[Row], var: int) -> list[Row] | None:
    """Eliminate column ``var`` (the column stays, zeroed)."""
    eq = next((r for r in rows if r[2] == EQ and r[0][var] != 0), None)
    out: list[Row] = []
    if eq is not None:
        ecs, ek, _ = eq
        piv = ecs[var]
        for r in rows:
            if r is eq:
                continue
            cs, k, kind = r
            f = cs[var] / piv
            if f:
                cs = tuple(a - f * b for a, b in zip(cs, ecs))
                k = k - f * ek
            out.append((cs, k, kind))
        return _simplify(out)
    pos, neg = [], []
    for r in rows:
        c = r[0][var]
        if c > 0:
            pos.append(r)
        elif c < 0:
            neg.append(r)
        else:
            out.append(r)
    for pc, pk, pkind in pos:
        for nc, nk, nkind in neg:
            a, b = -nc[var], pc[var]
            cs = tuple(a * x + b * y for x, y in zip(pc, nc))
            kind = GT if GT in (pkind, nkind) else GE
            out.append((cs, a * pk + b * nk, kind))
    return _simplify(out)


def rows_feasible(rows: Sequence[Row], nvars: int) -> bool:
    cur = _simplify(rows)
    for v in range(nvars - 1, -1, -1):
        if cur is None:
            return False
        cur = fm_eliminate(cur, v)
    return cur is not None


def rows_point(rows: Sequence[Row], nvars: int) -> list[Fraction] | None:
    """A rational point satisfying ``rows``; small integers preferred."""
    stages: list[list[Row]] = []
    cur = _simplify(rows)
    if cur is None:
        return None
    for v in range(nvars - 1, -1, -1):
        stages.append(cur)
        cur = fm_eliminate(cur, v)
        if cur is None:
            return None
    # stages[nvars-1-v] still involves variables 0..v
    x: list[Fraction] = [Fraction(0)] * nvars
    for v in range(nvars):
        sysv = stages[nvars - 1 - v]
        lo, lo_s, hi, hi_s, fixed = None, False, None, False, None
        for cs, k, kind in sysv:
            c = cs[v]
            if c == 0:
                continue
            rest = k + sum(cs[j] * x[j] for j in range(v))
            bound = -rest / c
            if kind == EQ:
                fixed = bound
            elif c > 0:
                if lo is None or bound > lo or (bound == lo and kind == GT):
                    lo, lo_s = bound, kind == GT
            else:
                if hi is None or bound < hi or (bound == hi and kind == GT):
                    hi, hi_s = bound, kind == GT
        x[v] = fixed if fixed is not None else _pick(lo, lo_s, hi, hi_s)
    return x


def _pick(lo, lo_s, hi, hi_s) -> Fraction:
    def ok(t):
        if lo is not None and (t < lo or (lo_s and t == lo)):
            return False
        if hi is not None and (t > hi or (hi_s and t == hi)):
            return False
        return True

    if ok(Fraction(0)):
        return Fraction(0)
    if lo is not None and lo >= 0:
        t = Fraction(math.floor(lo) + 1 if lo_s or lo != int(lo) else int(lo))
    elif hi is not None:
        t = Fraction(math.ceil(hi) - 1 if hi_s or hi != int(hi) else int(hi))
    else:
        t = Fraction(math.floor(lo) + 1)
    if ok(t):
        return t
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# Polyhedra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polyhedron:
    """Integer points of ``{x in Z^(n_idx+n_par) : constraints}``.

    ``param_min`` is the lower bound of the size parameter; it is context,
    not a face-defining constraint, and is never listed in ``constraints``.
    """

    n_idx: int
    n_par: int
    constraints: tuple[Constraint, ...]
    param_min: int | None = None
    empty: bool = False

    @property
    def dims(self) -> int:
        return self.n_idx + self.n_par

    @property
    def equalities(self) -> tuple[Constraint, ...]:
        return tuple(c for c in self.constraints if c.eq)

    @property
    def inequalities(self) -> tuple[Constraint, ...]:
        return tuple(c for c in self.constraints if not c.eq)

    def context(self) -> list[Constraint]:
        if self.n_par and self.param_min is not None:
            cs = [0] * self.dims
            cs[self.n_idx] = 1
            return [Constraint(tuple(cs), -self.param_min)]
        return []

    def rows(self) -> list[Row]:
        return _rows(list(self.constraints) + self.context())

    def contains(self, point: Sequence[int]) -> bool:
        return not self.empty and all(c.holds(point) for c in self.constraints)

    def add(self, *extra: Constraint) -> "Polyhedron":
        return canonicalize(list(self.constraints) + list(extra), self.n_idx, self.n_par, self.param_min)

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        if self.empty or other.empty:
            return empty_polyhedron(self.n_idx, self.n_par, self.param_min)
        return self.add(*other.constraints)

    def translate(self, delta: Sequence[int]) -> "Polyhedron":
        full = list(delta) + [0] * (self.dims - len(delta))
        if self.empty:
            return self
        return canonicalize([c.shifted(full) for c in self.constraints], self.n_idx, self.n_par, self.param_min)

    def is_subset(self, other: "Polyhedron") -> bool:
        """Integer-point inclusion decided on the rational relaxation of each complement."""
        if self.empty:
            return True
        for c in other.constraints:
            pieces = [c.negated()] if not c.eq else [
                Constraint.make(c.coeffs, c.const - 1),
                Constraint.make([-x for x in c.coeffs], -c.const - 1),
            ]
            for p in pieces:
                if rows_feasible(self.rows() + _rows([p]), self.dims):
                    return False
        return True


def empty_polyhedron(n_idx: int, n_par: int = 0, param_min: int | None = None) -> Polyhedron:
    return Polyhedron(n_idx, n_par, (), param_min, empty=True)


def _sort_key(c: Constraint):
    return (not c.eq, tuple(-x for x in c.coeffs), c.const)


def canonicalize(raw: Sequence[Constraint], n_idx: int, n_par: int = 0,
                 param_min: int | None = None) -> Polyhedron:
    """Irredundant normal form; implicit equalities made explicit.

    Returns an empty marker when the system has no rational solution.
    """
    dims = n_idx + n_par
    cons: list[Constraint] = []
    for c in raw:
        if c.dims != dims:
            raise GeometryError(f"constraint has {c.dims} dims, expected {dims}")
        c = Constraint.make(c.coeffs, c.const, c.eq)
        if c.is_contradiction():
            return empty_polyhedron(n_idx, n_par, param_min)
        if not c.is_tautology():
            cons.append(c)
    probe = Polyhedron(n_idx, n_par, tuple(cons), param_min)
    ctx = _rows(probe.context())
    if not rows_feasible(probe.rows(), dims):
        return empty_polyhedron(n_idx, n_par, param_min)

    # implicit equalities: c.z + g >= 1 infeasible means c.z + g == 0 on all integer points
    eqs = [c for c in cons if c.eq]
    ineqs = [c for c in cons if not c.eq]
    changed = True
    while changed:
        changed = False
        base = _rows(eqs + ineqs) + ctx
        for c in ineqs:
            test = base + [_row(c.coeffs, c.const - 1, GE)]
            if not rows_feasible(test, dims):
                eqs.append(c.as_equality())
                ineqs.remove(c)
                changed = True
                break

    # equalities in reduced echelon form, then substituted out of the inequalities
    eq_rows = []
    piv_cols: list[int] = []
    if eqs:
        from .linalg import rref

        red, piv = rref([list(c.coeffs) + [c.const] for c in eqs], dims + 1)
        if dims in piv:
            return empty_polyhedron(n_idx, n_par, param_min)
        for r, p in zip(red, piv):
            eq_rows.append(r)
            piv_cols.append(p)
        eqs = []
        for r in eq_rows:
            c = Constraint.make(r[:-1], r[-1], eq=True)
            if c.is_contradiction():
                return empty_polyhedron(n_idx, n_par, param_min)
            eqs.append(c)
    reduced = []
    for c in ineqs:
        cs = [Fraction(x) for x in c.coeffs]
        k = Fraction(c.const)
        for r, p in zip(eq_rows, piv_cols):
            f = cs[p]
            if f:
                cs = [a - f * b for a, b in zip(cs, r[:-1])]
                k -= f * r[-1]
        nc = Constraint.make(cs, k)
        if nc.is_contradiction():
            return empty_polyhedron(n_idx, n_par, param_min)
        if not nc.is_tautology() and nc not in reduced:
            reduced.append(nc)

    # redundancy: drop c when the others (plus context) exclude every violation of c
    reduced.sort(key=_sort_key)
    kept = list(reduced)
    for c in list(reduced):
        others = [o for o in kept if o is not c]
        test = _rows(eqs + others) + ctx + _rows([c.negated()])
        if not rows_feasible(test, dims):
            kept.remove(c)
    out = sorted(eqs, key=_sort_key) + kept
    return Polyhedron(n_idx, n_par, tuple(out), param_min)


def polyhedron(constraints: Sequence[Constraint], n_idx: int, n_par: int = 0,
               param_min: int | None = None) -> Polyhedron:
    return canonicalize(constraints, n_idx, n_par, param_min)


# ---------------------------------------------------------------------------
# Cones and the double description method
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cone:
    """Homogeneous cone ``{x : a.x >= 0 / == 0}`` in ``dims`` coordinates."""

    dims: int
    constraints: tuple[Constraint, ...]
    generators: tuple[Vector, ...] | None = field(default=None, compare=False)

    @staticmethod
    def make(constraints: Sequence[Constraint], dims: int) -> "Cone":
        cs = []
        for c in constraints:
            if c.const:
                raise GeometryError("cone constraints must be homogeneous")
            if c.dims != dims:
                raise GeometryError("cone constraint dimension mismatch")
            if not c.is_trivial():
                cs.append(Constraint.make(c.coeffs, 0, c.eq))
        return Cone(dims, tuple(dict.fromkeys(cs)))

    def contains(self, x: Sequence) -> bool:
        return all(c.holds(x) for c in self.constraints)

    def with_generators(self) -> "Cone":
        return Cone(self.dims, self.constraints, tuple(dual_generators(self)))


def double_description(constraints: Sequence[Constraint], dims: int) -> tuple[list[Vector], list[Vector]]:
    """(lineality basis, extreme rays) of a homogeneous constraint system.

    Integer arithmetic throughout: every update is a positive integer
    combination followed by gcd normalization.
    """
    lin: list[Vector] = [tuple(int(i == j) for j in range(dims)) for i in range(dims)]
    rays: list[Vector] = []
    done: list[Vector] = []  # processed inequality normals

    def idot(a, b) -> int:
        return sum(x * y for x, y in zip(a, b) if x and y)

    def zero_set(r):
        return frozenset(k for k, a in enumerate(done) if idot(a, r) == 0)

    def prim(v) -> Vector:
        return integerize(v) if any(v) else tuple(v)

    for c in constraints:
        a = tuple(int(x) for x in c.coeffs)
        i0 = next((i for i, l in enumerate(lin) if idot(a, l) != 0), None)
        if i0 is not None:
            l0 = lin[i0]
            s = idot(a, l0)
            if s < 0:
                l0, s = tuple(-x for x in l0), -s
            lin = [prim([s * x - idot(a, l) * y for x, y in zip(l, l0)]) for i, l in enumerate(lin) if i != i0]
            lin = [l for l in lin if any(l)]
            rays = [prim([s * x - idot(a, r) * y for x, y in zip(r, l0)]) for r in rays]
            rays = [r for r in rays if any(r)]
            if not c.eq:
                rays.append(l0)
                done.append(a)
            continue
        vals = [idot(a, r) for r in rays]
        pos = [k for k, v in enumerate(vals) if v > 0]
        neg = [k for k, v in enumerate(vals) if v < 0]
        new = [r for r, v in zip(rays, vals) if v == 0 or (v > 0 and not c.eq)]
        if pos and neg:
            zs = [zero_set(r) for r in rays]
            for p in pos:
                for n in neg:
                    common = zs[p] & zs[n]
                    if any(k != p and k != n and common <= zs[k] for k in range(len(rays))):
                        continue
                    ap, an = vals[p], vals[n]
                    new.append(prim([ap * y - an * x for x, y in zip(rays[p], rays[n])]))
        rays = [r for r in dict.fromkeys(new) if any(r)]
        if not c.eq:
            done.append(a)
    lin_out = list(LinearSpace.span(lin, dims).basis) if lin else []
    seen: dict[Vector, None] = {}
    for r in rays:
        seen.setdefault(integerize(r), None)
    return lin_out, sorted(seen, reverse=True)


def dual_generators(cone: Cone) -> list[Vector]:
    """Generators (lineality vectors in both signs, then rays), gcd-normalized."""
    lin, rays = double_description(cone.constraints, cone.dims)
    gens: list[Vector] = []
    for l in lin:
        gens.append(tuple(l))
        gens.append(tuple(-x for x in l))
    gens += [r for r in rays if r not in gens]
    return gens


def project_cone(cone: Cone, keep: Sequence[int]) -> Cone:
    """Fourier-Motzkin projection onto the ``keep`` coordinates (in that order)."""
    keep = list(keep)
    rows = _simplify(_rows(cone.constraints))
    if rows is None:
        rows = []
    for v in sorted(set(range(cone.dims)) - set(keep), reverse=True):
        rows = fm_eliminate(rows, v) or []
    cs = []
    for cf, _, kind in rows:
        if any(cf[v] for v in keep):
            cs.append(Constraint.make([cf[v] for v in keep], 0, kind == EQ))
    cs = list(dict.fromkeys(cs))
    kept = list(cs)
    for c in cs:
        if c.eq:
            continue
        others = [o for o in kept if o is not c]
        if not rows_feasible(_rows(others) + [_row([-x for x in c.coeffs], 0, GT)], len(keep)):
            kept.remove(c)
    return Cone.make(sorted(kept, key=_sort_key), len(keep))


def cone_of_generators(gens: Sequence[Sequence], dims: int) -> Cone:
    """H-representation of the cone spanned by ``gens`` (polar double description)."""
    lin, rays = double_description([Constraint.make(g, 0) for g in gens], dims)
    cs = [Constraint.make(l, 0, eq=True) for l in lin] + [Constraint.make(r, 0) for r in rays]
    return Cone.make(cs, dims)


# ---------------------------------------------------------------------------
# Lineality, dimension, faces
# ---------------------------------------------------------------------------


def recession_space(p: Polyhedron) -> LinearSpace:
    """Span of the recession cone in (index, parameter) space.

    A linear form is bounded on ``p`` exactly when it vanishes on this span,
    so its orthogonal complement is spanned by the equalities together with
    every parameter-free thick equality.
    """
    if p.empty:
        raise GeometryError("empty polyhedron has no lineality")
    homog = [Constraint.make(c.coeffs, 0, c.eq) for c in list(p.constraints) + p.context()]
    lin, rays = double_description(homog, p.dims)
    return LinearSpace.span(list(lin) + list(rays), p.dims)


def lineality(p: Polyhedron) -> LinearSpace:
    """Index-space directions along which ``p`` keeps unboundedly many points."""
    rec = recession_space(p)
    if not p.n_par:
        return rec
    idx_only = LinearSpace.span([tuple(int(i == j) for j in range(p.dims)) for i in range(p.n_idx)], p.dims)
    inter = intersect_spaces(rec, idx_only)
    return LinearSpace.span([b[: p.n_idx] for b in inter.basis], p.n_idx)


def dimension(p: Polyhedron) -> int:
    """Degree of the point count as a polynomial in the size parameter."""
    rec = recession_space(p)
    if p.n_par and any(b[p.n_idx] for b in rec.basis):
        return rec.dim - 1
    return rec.dim


@dataclass(frozen=True)
class Face:
    """A face of ``root``: the root with the ``saturated`` inequalities made tight."""

    root: Polyhedron
    saturated: frozenset[int]
    new_constraint: int | None
    depth: int

    @property
    def polyhedron(self) -> Polyhedron:
        return _saturate(self.root, self.saturated)

    @property
    def dim(self) -> int:
        return dimension(self.polyhedron)


@lru_cache(maxsize=4096)
def _saturate(root: Polyhedron, sat: frozenset[int]) -> Polyhedron:
    ineqs = root.inequalities
    cons = list(root.equalities) + [c.as_equality() if k in sat else c for k, c in enumerate(ineqs)]
    return canonicalize(cons, root.n_idx, root.n_par, root.param_min)


def _closure(root: Polyhedron, sat: frozenset[int]) -> frozenset[int]:
    face = _saturate(root, sat)
    out = set(sat)
    rows = face.rows()
    for k, c in enumerate(root.inequalities):
        if k in out:
            continue
        if not rows_feasible(rows + [_row(c.coeffs, c.const - 1, GE)], root.dims):
            out.add(k)
    return frozenset(out)


def root_face(p: Polyhedron) -> Face:
    if p.empty:
        raise GeometryError("empty polyhedron has no faces")
    return Face(p, frozenset(), None, 0)


def facets(f: Face) -> list[tuple[Constraint, Face]]:
    """Children of ``f``: saturate one more root inequality, losing one dimension."""
    d = f.dim
    if d == 0:
        return []
    out: list[tuple[Constraint, Face]] = []
    seen: set[frozenset[int]] = set()
    for k, c in enumerate(f.root.inequalities):
        if k in f.saturated:
            continue
        sat = f.saturated | {k}
        poly = _saturate(f.root, sat)
        if poly.empty or dimension(poly) != d - 1:
            continue
        sat = _closure(f.root, sat)
        if sat in seen:
            continue
        seen.add(sat)
        out.append((c, Face(f.root, sat, k, f.depth + 1)))
    return out


@dataclass
class ThickFaceLattice:
    root: Face
    faces: dict[frozenset[int], Face]
    children: dict[frozenset[int], list[frozenset[int]]]

    def by_dimension(self) -> dict[int, list[Face]]:
        out: dict[int, list[Face]] = {}
        for f in self.faces.values():
            out.setdefault(f.dim, []).append(f)
        return out

    def dump(self) -> str:
        """Indented text, one face per line."""
        lines: list[str] = []

        def walk(key, indent):
            f = self.faces[key]
            sat = ",".join(str(k) for k in sorted(key))
            new = "" if f.new_constraint is None else f" new={f.new_constraint}"
            lines.append(f"{'  ' * indent}dim={f.dim} sat={{{sat}}}{new}")
            for ch in self.children.get(key, []):
                walk(ch, indent + 1)

        walk(self.root.saturated, 0)
        return "\n".join(lines)


def face_lattice(p: Polyhedron) -> ThickFaceLattice:
    root = root_face(p)
    faces = {root.saturated: root}
    children: dict[frozenset[int], list[frozenset[int]]] = {}
    todo = [root]
    while todo:
        f = todo.pop(0)
        kids = []
        for _, ch in facets(f):
            kids.append(ch.saturated)
            if ch.saturated not in faces:
                faces[ch.saturated] = ch
                todo.append(ch)
        children[f.saturated] = kids
    return ThickFaceLattice(root, faces, children)


# ---------------------------------------------------------------------------
# Translation along a reuse vector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Translation:
    """``F`` against ``F' = F + rho``; pieces are tagged with the constraint index
    (into ``F.inequalities``) whose violation carves them out."""

    overlap: Polyhedron
    shed_out: tuple[tuple[int, Polyhedron], ...]  # F' \ F
    shed_in: tuple[tuple[int, Polyhedron], ...]  # F \ F'


def translate_intersect_diff(f: Polyhedron | Face, rho: Sequence[int]) -> Translation:
    p = f.polyhedron if isinstance(f, Face) else f
    rho = tuple(rho)
    if len(rho) != p.n_idx:
        raise GeometryError("reuse vector length differs from the index dimension count")
    if not any(rho):
        raise GeometryError("zero reuse vector")
    if not lineality(p).contains(rho):
        raise GeometryError(f"reuse vector {rho} leaves the face's affine hull")
    full = rho + (0,) * p.n_par
    moved = p.translate(full)
    overlap = p.intersect(moved)
    ineqs = p.inequalities

    def pieces(base: Polyhedron, sign: int):
        out = []
        prefix: list[Constraint] = []
        for k, c in enumerate(ineqs):
            cr = dot(c.coeffs, full)
            if sign * cr <= 0:
                continue
            # sign>0: points of F with c(z - rho) + g < 0; sign<0: points of F' with cz + g < 0
            viol = c.shifted(full).negated() if sign > 0 else c.negated()
            piece = base.add(*prefix, viol)
            if not piece.empty:
                out.append((k, piece))
            prefix.append(c.shifted(full) if sign > 0 else c)
        return tuple(out)

    return Translation(overlap, pieces(moved, -1), pieces(p, +1))


# ---------------------------------------------------------------------------
# Integer points at a concrete parameter value
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8192)
def _points(p: Polyhedron, params: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    n = p.n_idx
    rows: list[Row] = []
    for c in p.constraints:
        k = c.const + dot(c.coeffs[n:], params)
        rows.append(_row(c.coeffs[:n], k, EQ if c.eq else GE))
    cur = _simplify(rows)
    if cur is None:
        return ()
    stages = []
    for v in range(n - 1, -1, -1):
        stages.append(cur)
        cur = fm_eliminate(cur, v)
        if cur is None:
            return ()
    stages.reverse()  # stages[v] involves variables 0..v
    out: list[tuple[int, ...]] = []

    def rec(v: int, prefix: list[int]):
        if v == n:
            out.append(tuple(prefix))
            return
        lo, hi = -math.inf, math.inf
        for cs, k, kind in stages[v]:
            c = cs[v]
            rest = k + sum(cs[j] * prefix[j] for j in range(v))
            if c == 0:
                continue
            b = -rest / c
            if kind == EQ:
                if b.denominator != 1:
                    return
                lo, hi = max(lo, int(b)), min(hi, int(b))
            elif c > 0:
                lo = max(lo, math.ceil(b))
            else:
                hi = min(hi, math.floor(b))
        if lo == -math.inf or hi == math.inf:
            raise GeometryError("polyhedron is unbounded at this parameter value")
        for t in range(lo, hi + 1):
            prefix.append(t)
            if all(_partial_ok(r, prefix) for r in stages[v]):
                rec(v + 1, prefix)
            prefix.pop()

    if n == 0:
        return ((),) if all(_trivial_ok(r) for r in cur or []) else ()
    rec(0, [])
    # final exact filter against the original constraints
    return tuple(pt for pt in out if all(c.holds(pt + params) for c in p.constraints))


def _partial_ok(r: Row, prefix: list[int]) -> bool:
    cs, k, kind = r
    if any(cs[j] for j in range(len(prefix), len(cs))):
        return True
    v = k + sum(c * x for c, x in zip(cs, prefix))
    return v == 0 if kind == EQ else v >= 0


def integer_points(p: Polyhedron, param_value: int | None = None) -> list[tuple[int, ...]]:
    """Sorted integer points of ``p`` with the parameter fixed."""
    if p.empty:
        return []
    params = () if not p.n_par else (param_value,)
    if p.n_par and param_value is None:
        raise GeometryError("parameter value required")
    return list(_points(p, params))


def box_points(bounds: Sequence[tuple[int, int]]):
    return product(*(range(lo, hi + 1) for lo, hi in bounds))


def is_feasible(constraints: Sequence[Constraint], dims: int, strict: Sequence[Constraint] = ()) -> bool:
    """Rational feasibility; ``strict`` rows are read as ``> 0`` (equality flag ignored)."""
    rows = _rows(constraints) + [_row(c.coeffs, c.const, GT) for c in strict]
    return rows_feasible(rows, dims)


def witness(constraints: Sequence[Constraint], dims: int, strict: Sequence[Constraint] = ()) -> list[Fraction] | None:
    rows = _rows(constraints) + [_row(c.coeffs, c.const, GT) for c in strict]
    return rows_point(rows, dims)
