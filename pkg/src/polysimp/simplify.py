"""Reuse-driven simplification of reductions.

A reduction ``Y[y] = op{ f(z) : z in D, Bz = y }`` whose body reads the same
value along a direction ``rho`` (``A rho = 0``) that stays inside ``D``'s
affine hull can be rewritten as

    Y[y] = Y[y - B rho]  (+)  sum over D \\ (D + rho)  (-)  sum over (D + rho) \\ D

The two difference sets are thin: each is a union of slices parallel to a
facet of ``D``, one polynomial degree smaller.  They become residual
reductions, which are simplified in turn.  Which ``rho`` to use is decided by
a search over sign classes (the signs of ``c . rho`` for the facet normals
``c``), filtered by operator invertibility and, for reductions that feed
their own input, by schedule compatibility of the new self dependence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from . import geometry as geo
from . import schedule as sch
from .geometry import Constraint, Polyhedron
from .ir import (Aff, AffineMap, Bin, Branch, Call, Equation, EquationSystem, Expr, Idx, Num, Operator,
                 Read, Reduce, ReductionEquation, Variable, effective_domain, operator,
                 reuse_space, walk)
from .linalg import LinearSpace, dot, integerize, intersect_spaces, kernel, rank, rref


class RhoRejected(ValueError):
    """A requested reuse vector cannot be applied."""


# ---------------------------------------------------------------------------
# Facet labels and sign classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FacetLabel:
    boundary: bool
    direction: str  # inward | outward | invariant


def label_facet(c: Constraint, rho: Sequence[int], proj: AffineMap) -> FacetLabel:
    """Direction from the sign of ``c . rho``.

    A facet is a boundary facet when its normal is constant along every
    fiber of ``B`` (``c`` lies in the row space of ``B``); its image is then
    a face of the result domain.
    """
    if not any(rho):
        raise RhoRejected("zero reuse vector")
    n = proj.n_idx
    cz = c.coeffs[:n]
    fibers = kernel(proj.matrix, n) if proj.rows else LinearSpace.full(n)
    boundary = all(dot(cz, k) == 0 for k in fibers.basis)
    s = dot(cz, rho)
    return FacetLabel(boundary, "inward" if s > 0 else "outward" if s < 0 else "invariant")


@dataclass(frozen=True)
class SignClass:
    signs: tuple[int, ...]
    representative: tuple[int, ...]
    witness: tuple[Fraction, ...]


def rho_key(rho: Sequence[int]):
    """Tie-break: small vectors first, then positive components first."""
    return (sum(abs(x) for x in rho), tuple(-x for x in rho))


def enumerate_sign_classes(face: Polyhedron, share: LinearSpace,
                           legality: Sequence[Sequence[int]] | None = None,
                           proj: AffineMap | None = None, invertible: bool = True,
                           search_box: int = 3) -> list[SignClass]:
    """Feasible sign vectors of ``c . rho`` over the face's inequalities, ``rho`` in ``share``.

    With ``legality`` given, a class survives only if some disjunct
    ``d . rho > 0`` is feasible inside it, and its representative satisfies
    that disjunct.  Without an inverse, classes making a non-boundary facet
    outward are dropped.
    """
    if share.dim == 0:
        return []
    n = face.n_idx
    basis = share.basis
    m = len(basis)
    normals = [c.coeffs[:n] for c in face.inequalities]

    def alpha_row(v: Sequence) -> tuple:
        return tuple(dot(v, b) for b in basis)

    fibers = kernel(proj.matrix, n) if proj is not None and proj.rows else None

    def non_boundary(c) -> bool:
        return fibers is not None and any(dot(c, k) for k in fibers.basis)

    found: list[tuple[tuple[int, ...], list[Constraint], list[Constraint]]] = []

    def rec(k: int, signs: list[int], eqs: list[Constraint], strict: list[Constraint]):
        if not geo.is_feasible(eqs, m, strict):
            return
        if k == len(normals):
            found.append((tuple(signs), list(eqs), list(strict)))
            return
        row = alpha_row(normals[k])
        options = (0,) if not any(row) else (1, 0, -1)
        for s in options:
            if s < 0 and not invertible and non_boundary(normals[k]):
                continue
            if s == 0:
                rec(k + 1, signs + [0], eqs + [Constraint.make(row, 0, eq=True)], strict)
            else:
                rec(k + 1, signs + [s], eqs, strict + [Constraint.make([s * x for x in row], 0)])

    rec(0, [], [], [])

    box = [rho for rho in itertools.product(range(-search_box, search_box + 1), repeat=n)
           if any(rho) and share.contains(rho)]
    box.sort(key=rho_key)

    def signs_of(rho):
        return tuple((dot(c, rho) > 0) - (dot(c, rho) < 0) for c in normals)

    out: list[SignClass] = []
    for signs, eqs, strict in found:
        if not any(signs):
            rest = kernel([alpha_row(c) for c in normals], m) if normals else LinearSpace.full(m)
            if rest.dim == 0:
                continue
        disjuncts = [None] if legality is None else list(legality)
        for d in disjuncts:
            extra = [] if d is None else [Constraint.make(alpha_row(d), 0)]
            if d is not None and not geo.is_feasible(eqs, m, strict + extra):
                continue
            rep = next((r for r in box if signs_of(r) == signs and (d is None or dot(d, r) > 0)), None)
            wit = geo.witness(eqs, m, strict + extra)
            if not any(signs) and (wit is None or not any(wit)):
                rest = kernel([alpha_row(c) for c in normals], m) if normals else LinearSpace.full(m)
                wit = [Fraction(x) for x in rest.basis[0]]
            if rep is None:
                rho = [sum(Fraction(a) * b[i] for a, b in zip(wit, basis)) for i in range(n)]
                rep = integerize(rho)
            out.append(SignClass(signs, tuple(rep), tuple(wit)))
            break
    out.sort(key=lambda c: rho_key(c.representative))
    return out


def preprocess_invariant_boundary(proj: AffineMap, candidates: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """Drop reuse vectors along which the result index does not move (``B rho = 0``).

    Such a vector makes the rewritten equation read its own value at the same
    point; every facet it leaves invariant whose image is a face of the
    result domain would need the unspecified domain-splitting preprocessing.
    """
    return [tuple(r) for r in candidates if any(proj.linear(r))]


# ---------------------------------------------------------------------------
# Residual systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Residual:
    name: str
    role: str  # init | add | sub
    facet: int
    offset: int
    reduction: ReductionEquation


@dataclass(frozen=True)
class ResidualSystem:
    target: str
    rho: tuple[int, ...]
    shift: tuple[int, ...]  # B rho
    labels: tuple[tuple[int, Constraint, FacetLabel], ...]
    overlap: Polyhedron  # result points with a predecessor at y - B rho
    fresh: tuple[Polyhedron, ...]  # the remaining result points, disjoint pieces
    residuals: tuple[Residual, ...]

    @property
    def init_equations(self):
        return tuple(r for r in self.residuals if r.role == "init")

    @property
    def add_equations(self):
        return tuple(r for r in self.residuals if r.role == "add")

    @property
    def sub_equations(self):
        return tuple(r for r in self.residuals if r.role == "sub")


def difference_pieces(a: Polyhedron, b: Polyhedron) -> list[Polyhedron]:
    """Disjoint polyhedra covering the integer points of ``a`` outside ``b``."""
    if b.empty:
        return [] if a.empty else [a]
    out = []
    prefix: list[Constraint] = []
    for c in b.constraints:
        if c.eq:
            negs = [Constraint.make(c.coeffs, c.const - 1), Constraint.make([-x for x in c.coeffs], -c.const - 1)]
        else:
            negs = [c.negated()]
        for neg in negs:
            p = a.add(*prefix, neg)
            if not p.empty:
                out.append(p)
        prefix.append(c)
    return out


def apply_reuse(red: ReductionEquation, rho: Sequence[int]) -> ResidualSystem:
    """Rewrite ``red`` along ``rho``: backbone regions plus residual reductions.

    Raises :class:`RhoRejected` when ``rho`` is not a reuse direction of the
    domain and body, or when a subtraction would be needed for an operator
    without an inverse.
    """
    rho = tuple(rho)
    D, DY = red.domain, red.target_domain
    n = D.n_idx
    if not any(rho):
        raise RhoRejected("zero reuse vector")
    if not reuse_space(red.body, n).contains(rho):
        raise RhoRejected(f"{red.target}: body does not reuse values along {rho}")
    try:
        tr = geo.translate_intersect_diff(D, rho)
    except geo.GeometryError as exc:
        raise RhoRejected(f"{red.target}: {exc}") from None
    shift = red.proj.linear(rho)
    ineqs = D.inequalities
    labels = tuple((k, c, label_facet(c, rho, red.proj)) for k, c in enumerate(ineqs))
    image_pre = red.proj.preimage(DY)

    residuals: list[Residual] = []
    for k, piece in tr.shed_in:
        c = ineqs[k]
        s = dot(c.coeffs[:n], rho)
        role = "init" if labels[k][2].boundary else "add"
        for t in range(s):
            sl = piece.add(Constraint.make(c.coeffs, c.const - t, eq=True))
            if not sl.empty:
                residuals.append(_residual(red, role, k, t, s, sl))
    subs = []
    for k, piece in tr.shed_out:
        c = ineqs[k]
        s = -dot(c.coeffs[:n], rho)
        for t in range(s):
            sl = piece.add(Constraint.make(c.coeffs, c.const + t + 1, eq=True), *image_pre)
            if not sl.empty:
                subs.append(_residual(red, "sub", k, t, s, sl))
    if subs and not red.op.has_inverse:
        raise RhoRejected(f"{red.target}: {red.op.name} has no inverse but {rho} needs a subtraction")
    residuals.extend(subs)

    overlap = DY.intersect(DY.translate(shift)) if any(shift) else DY
    fresh = tuple(difference_pieces(DY, DY.translate(shift))) if any(shift) else ()
    return ResidualSystem(red.target, rho, shift, labels, overlap, fresh, tuple(residuals))


def _residual(red: ReductionEquation, role: str, k: int, t: int, width: int, dom: Polyhedron) -> Residual:
    name = f"{red.target}_{role}{k}" + (f"_{t}" if width > 1 else "")
    sub = ReductionEquation(name, red.target_names, red.target_domain, red.op, red.names, red.proj, dom, red.body)
    return Residual(name, role, k, t, sub)


# ---------------------------------------------------------------------------
# Affine substitution and pointwise forms
# ---------------------------------------------------------------------------


def _compose_aff(a: Aff, g: AffineMap) -> Aff:
    """``a`` (over source indices and N) after substituting source = g(target)."""
    n, m = len(g.rows), g.n_idx
    coeffs = [0] * (m + 1)
    const = a.const
    for k in range(n):
        ck = a.coeffs[k]
        if ck:
            for j in range(m + 1):
                coeffs[j] += ck * g.rows[k].coeffs[j]
            const += ck * g.rows[k].const
    coeffs[m] += a.coeffs[n]
    return Aff(tuple(coeffs), const)


def compose(f: AffineMap, g: AffineMap) -> AffineMap:
    return AffineMap(tuple(_compose_aff(r, g) for r in f.rows), g.n_idx, f.n_par)


def substitute(e: Expr, g: AffineMap) -> Expr:
    if isinstance(e, Num):
        return e
    if isinstance(e, Idx):
        return Idx(_compose_aff(e.aff, g))
    if isinstance(e, Read):
        return Read(e.var, compose(e.access, g))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, g))
    if isinstance(e, Bin):
        return Bin(e.op, substitute(e.left, g), substitute(e.right, g))
    raise TypeError("cannot substitute into a nested reduction")


def pointwise_form(red: ReductionEquation) -> list[Branch] | None:
    """Case branches equivalent to ``red`` when every fiber holds at most one point.

    Requires the projection together with the domain's equalities to pin
    the reduction point down as an integral affine function of the result
    point.
    """
    if any(isinstance(x, Reduce) for x in walk(red.body)):
        return None
    n, m = red.proj.n_idx, len(red.target_names)
    S, DY = red.domain, red.target_domain
    rows = []
    for o, r in enumerate(red.proj.rows):  # B z = y - bN N - b0
        rows.append(list(r.coeffs[:n]) + [int(j == o) for j in range(m)] + [-r.coeffs[n], -r.const])
    for c in S.equalities:  # E z = -eN N - e0
        rows.append(list(c.coeffs[:n]) + [0] * m + [-c.coeffs[n], -c.const])
    if not rows or rank([r[:n] for r in rows], n) < n:
        return None
    red_rows, piv = rref(rows, n + m + 2)
    g_rows = []
    for k in range(n):
        row = red_rows[piv.index(k)]
        if any(Fraction(x).denominator != 1 for x in row[n:]):
            return None
        g_rows.append(Aff(tuple(int(x) for x in row[n:n + m + 1]), int(row[n + m + 1])))
    g = AffineMap(tuple(g_rows), m, 1)
    valid = g.preimage(S)
    for o, r in enumerate(red.proj.rows):
        a = _compose_aff(r, g)
        coeffs = list(a.coeffs)
        coeffs[o] -= 1
        valid.append(Constraint.make(coeffs, a.const, eq=True))
    hit = DY.add(*valid)
    out = []
    if not hit.empty:
        out.append(Branch(hit, substitute(red.body, g)))
    for p in difference_pieces(DY, hit):
        out.append(Branch(p, Num(red.op.identity)))
    return out


def gist(p: Polyhedron, ctx: Polyhedron) -> Polyhedron:
    """Drop constraints of ``p`` implied by ``ctx`` and the ones kept."""
    keep = list(p.constraints)
    for c in list(keep):
        others = [x for x in keep if x is not c]
        if ctx.add(*others).is_subset(geo.canonicalize([c], p.n_idx, p.n_par, p.param_min)):
            keep = others
    return geo.canonicalize(keep, p.n_idx, p.n_par, p.param_min)


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


@dataclass
class PlanNode:
    reduction: ReductionEquation
    rho: tuple[int, ...] | None
    residual_system: ResidualSystem | None
    children: list["PlanNode"]
    degree: int
    nominal: int
    bound: int

    def rhos_along_paths(self) -> list[list[tuple[int, ...]]]:
        if self.rho is None:
            return [[]]
        if not self.children:
            return [[self.rho]]
        return [[self.rho] + p for c in self.children for p in c.rhos_along_paths()]

    def derivation(self) -> dict:
        red = self.reduction
        out = {"target": red.target, "degree": self.degree, "nominal_degree": self.nominal, "bound": self.bound}
        if self.rho is None:
            out["rho"] = None
            return out
        rs = self.residual_system
        from .dsl import fmt_constraint

        out["rho"] = list(self.rho)
        out["shift"] = list(rs.shift)
        out["facets"] = [{"index": k, "constraint": fmt_constraint(c, red.names, "N"),
                          "boundary": lab.boundary, "direction": lab.direction} for k, c, lab in rs.labels]
        out["residuals"] = [dict(c.derivation(), role=r.role, facet=r.facet, offset=r.offset)
                            for r, c in zip(rs.residuals, self.children)]
        return out


def _dim(p: Polyhedron) -> int:
    return geo.dimension(p) if not p.empty else 0


def _memo_key(red: ReductionEquation):
    return (red.target_domain, red.domain, red.proj, red.body, red.op)


class Legality:
    """Schedule-compatibility gate for reuse vectors of one lifted reduction.

    Only reductions on a dependence cycle are constrained; for the others the
    new self dependence can always be ordered after everything else.
    """

    def __init__(self, sys_lifted: EquationSystem, enabled: bool = True):
        self.sys = sys_lifted
        self.enabled = enabled
        self._ctx: dict[str, sch.ScheduleContext] = {}

    def applies(self, red: ReductionEquation, ancestors) -> bool:
        if not self.enabled:
            return False
        top = ancestors[0][0].target if ancestors else red.target
        return self.sys.has_var(top) and _on_cycle(self.sys, top)

    def context(self, red: ReductionEquation, ancestors) -> sch.ScheduleContext:
        if red.target not in self._ctx:
            self._ctx[red.target] = sch.build_context(_with_ancestors(self.sys, ancestors))
        return self._ctx[red.target]


def _with_ancestors(sys: EquationSystem, ancestors) -> EquationSystem:
    """``sys`` with each ancestor's rewriting spelled out, residuals left as plain reductions."""
    for red, rs in ancestors:
        pairs = [(Variable(red.target, "local", red.target_names, red.target_domain),
                  _backbone_equation(red, rs, {}))]
        for r in rs.residuals:
            pairs.append((Variable(r.name, "local", red.target_names, red.target_domain), _leaf_equation(r.reduction)))
        sys = _install(sys, pairs)
    return sys


class Search:
    """Plans reuse vectors for one reduction and, recursively, its residuals."""

    def __init__(self, legality: Legality | None = None, forced: tuple[int, ...] | None = None):
        self.legality = legality
        self.forced = forced
        self.memo: dict = {}
        self.nodes = 0
        self.how: dict[tuple[str, tuple[int, ...]], str] = {}

    def candidates(self, red: ReductionEquation, share: LinearSpace, ancestors) -> list[tuple[int, ...]]:
        D, B = red.domain, red.proj
        inv = red.op.has_inverse
        classes = enumerate_sign_classes(D, share, proj=B, invertible=inv)
        reps = preprocess_invariant_boundary(B, [c.representative for c in classes])
        if self.legality is None or not self.legality.applies(red, ancestors):
            return reps
        ctx = self.legality.context(red, ancestors)
        cone_y = sch.project_on_variable(ctx, red.target)
        disj = sch.legality_constraints(cone_y, B.matrix)
        first = {c.signs: c.representative for c in enumerate_sign_classes(D, share, disj, B, inv)}
        out = []
        for c in classes:
            if c.signs in first and any(B.linear(first[c.signs])):
                rho = first[c.signs]
                g = next(k for k, d in enumerate(disj) if dot(d, rho) > 0)
                self.how[(red.target, rho)] = f"generator disjunct {g}"
                out.append(rho)
            elif c.representative in reps:
                verdict = sch.compatible(ctx, red.target, B.linear(c.representative))
                if verdict.ok:
                    self.how[(red.target, c.representative)] = f"schedule row {verdict.level}"
                    out.append(c.representative)
        return sorted(out, key=rho_key)

    def check_forced(self, red: ReductionEquation, rho: tuple[int, ...]) -> None:
        share = intersect_spaces(geo.lineality(red.domain), reuse_space(red.body, red.domain.n_idx))
        if not any(rho) or not share.contains(rho):
            raise RhoRejected(f"{red.target}: {list(rho)} is not in the share space")
        if not preprocess_invariant_boundary(red.proj, [rho]):
            raise RhoRejected(f"{red.target}: {list(rho)} leaves the result index unchanged")
        if self.legality is not None and self.legality.applies(red, []):
            ctx = self.legality.context(red, [])
            verdict = sch.compatible(ctx, red.target, red.proj.linear(rho))
            self.how[(red.target, rho)] = f"schedule row {verdict.level}"
            if not verdict.ok:
                raise RhoRejected(f"{red.target}: reuse vector {list(rho)} is not schedule compatible "
                                  f"(new self dependence {list(red.proj.linear(rho))})")

    def best(self, red: ReductionEquation, ancestors=()) -> PlanNode:
        ancestors = list(ancestors)
        D = red.domain
        nominal = _dim(D)
        share = intersect_spaces(geo.lineality(D), reuse_space(red.body, D.n_idx)) if not D.empty \
            else LinearSpace((), D.n_idx)
        bound = nominal - share.dim
        leaf = PlanNode(red, None, None, [], nominal, nominal, bound)
        if not ancestors and self.forced is not None:
            self.check_forced(red, self.forced)
            return self._expand(red, self.forced, ancestors, nominal, bound)
        if nominal <= 0 or share.dim == 0:
            return leaf
        cyclic = self.legality is not None and self.legality.applies(red, ancestors)
        key = _memo_key(red)
        if not cyclic and key in self.memo:
            rho = self.memo[key]
            return leaf if rho is None else self._expand(red, rho, ancestors, nominal, bound)
        best = None
        for rho in self.candidates(red, share, ancestors):
            try:
                node = self._expand(red, rho, ancestors, nominal, bound)
            except RhoRejected:
                continue
            if best is None or node.degree < best.degree:
                best = node
            if red.op.has_inverse and node.degree < nominal:
                break  # every choice is optimal for invertible operators
        if best is None or best.degree >= nominal:
            best = leaf
        if not cyclic:
            self.memo[key] = best.rho
        return best

    def _expand(self, red, rho, ancestors, nominal, bound) -> PlanNode:
        self.nodes += 1
        rs = apply_reuse(red, rho)
        chain = ancestors + [(red, rs)]
        children = [self.best(r.reduction, chain) for r in rs.residuals]
        deg = max([_dim(red.target_domain)] + [c.degree for c in children])
        return PlanNode(red, tuple(rho), rs, children, deg, nominal, bound)


# ---------------------------------------------------------------------------
# Materialization
# ---------------------------------------------------------------------------

_COMBINE = {"plus": "+", "times": "*", "max": "max", "min": "min"}
_UNCOMBINE = {"plus": "-", "times": "div"}


def _universe(n: int, param_min: int | None) -> Polyhedron:
    return geo.canonicalize([], n, 1, param_min)


def _leaf_equation(red: ReductionEquation) -> Equation:
    e = Reduce(red.op.name, red.names, red.proj, red.domain, red.body)
    return Equation(red.target, red.target_names, (Branch(_universe(len(red.target_names), red.domain.param_min), e),))


def _combine(op: Operator, terms: list[tuple[int, Expr]]) -> Expr:
    acc: Expr | None = None
    for sign, t in terms:
        if acc is None:
            acc = t if sign > 0 else Bin(_UNCOMBINE[op.name], Num(op.identity), t)
        else:
            acc = Bin(_COMBINE[op.name] if sign > 0 else _UNCOMBINE[op.name], acc, t)
    return acc if acc is not None else Num(op.identity)


def _residual_term(res: Residual, region: Polyhedron, forms: dict, used: set) -> Expr | None:
    """Expression for ``res`` over ``region``; None when it is the identity there."""
    m = len(res.reduction.target_names)
    form = forms.get(res.name)
    if form is not None:
        for br in form:
            if region.is_subset(br.guard):
                if isinstance(br.expr, Num) and br.expr.value == res.reduction.op.identity:
                    return None
                return br.expr
    used.add(res.name)
    return Read(res.name, AffineMap.identity(m))


def _backbone_equation(red: ReductionEquation, rs: ResidualSystem, forms: dict, used: set | None = None) -> Equation:
    used = set() if used is None else used
    m = len(red.target_names)
    op = red.op
    DY = red.target_domain
    branches = []
    regions = [(rs.overlap, True)] + [(p, False) for p in rs.fresh]
    for region, prev in regions:
        if region.empty:
            continue
        terms: list[tuple[int, Expr]] = []
        if prev:
            back = AffineMap(tuple(Aff(tuple(int(j == k) for j in range(m + 1)), -rs.shift[k]) for k in range(m)), m)
            terms.append((1, Read(red.target, back)))
        for r in rs.residuals:
            t = _residual_term(r, region, forms, used)
            if t is not None:
                terms.append((-1 if r.role == "sub" else 1, t))
        branches.append(Branch(gist(region, DY), _combine(op, terms)))
    return Equation(red.target, red.target_names, tuple(branches))


def materialize(node: PlanNode) -> list[tuple[Variable, Equation]]:
    """Declarations and equations realizing ``node`` (target first)."""
    red = node.reduction
    decl = Variable(red.target, "local", red.target_names, red.target_domain)
    if node.rho is None:
        form = pointwise_form(red)
        if form is not None:
            eq = Equation(red.target, red.target_names, tuple(Branch(gist(b.guard, red.target_domain), b.expr) for b in form))
            return [(decl, eq)]
        return [(decl, _leaf_equation(red))]
    rs = node.residual_system
    forms = {}
    for r, c in zip(rs.residuals, node.children):
        if c.rho is None:
            f = pointwise_form(r.reduction)
            if f is not None:
                forms[r.name] = f
    used: set[str] = set()
    out = [(decl, _backbone_equation(red, rs, forms, used))]
    for r, c in zip(rs.residuals, node.children):
        if r.name in used:
            out.extend(materialize(c))
    return out


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------


def _producers(sys: EquationSystem) -> dict[str, set[str]]:
    out = {v.name: set() for v in sys.variables}
    for eq in sys.equations:
        for br in eq.branches:
            for e in walk(br.expr):
                if isinstance(e, Read) and sys.var(e.var).role != "input":
                    out[eq.target].add(e.var)
    return out


def _reach(graph: dict[str, set[str]], start: str) -> set[str]:
    seen, todo = set(), list(graph.get(start, ()))
    while todo:
        v = todo.pop()
        if v not in seen:
            seen.add(v)
            todo.extend(graph.get(v, ()))
    return seen


def _on_cycle(sys: EquationSystem, name: str) -> bool:
    return name in _reach(_producers(sys), name)


def dependence_order(sys: EquationSystem) -> list[str]:
    """Defined variables, producers before consumers; declaration order breaks ties and cycles."""
    g = _producers(sys)
    reach = {v: _reach(g, v) for v in g}
    todo = [e.target for e in sorted(sys.equations, key=lambda e: [v.name for v in sys.variables].index(e.target))]
    out = []
    while todo:
        for v in todo:
            if all(p not in todo or p == v or v in reach[p] for p in g[v]):
                out.append(v)
                todo.remove(v)
                break
    return out


def _install(sys: EquationSystem, pairs: Sequence[tuple[Variable, Equation]]) -> EquationSystem:
    """Add or replace declarations and equations; new names go after the existing ones."""
    vars_ = list(sys.variables)
    eqs = list(sys.equations)
    for v, e in pairs:
        idx = next((k for k, x in enumerate(vars_) if x.name == v.name), None)
        if idx is None:
            vars_.append(v)
        else:
            vars_[idx] = v
        idx = next((k for k, x in enumerate(eqs) if x.target == e.target), None)
        if idx is None:
            eqs.append(e)
        else:
            eqs[idx] = e
    return sys.replace(variables=tuple(vars_), equations=tuple(eqs))


def _replace_node(e: Expr, old: Expr, new: Expr) -> Expr:
    if e is old:
        return new
    if isinstance(e, Call):
        return Call(e.func, _replace_node(e.arg, old, new))
    if isinstance(e, Bin):
        return Bin(e.op, _replace_node(e.left, old, new), _replace_node(e.right, old, new))
    return e


def _top_reduces(e: Expr) -> list[Reduce]:
    if isinstance(e, Reduce):
        return [e]
    if isinstance(e, Call):
        return _top_reduces(e.arg)
    if isinstance(e, Bin):
        return _top_reduces(e.left) + _top_reduces(e.right)
    return []


def _fresh(sys: EquationSystem, base: str) -> str:
    name = base
    while sys.has_var(name):
        name += "_"
    return name


@dataclass
class ReductionPlan:
    equation: str
    branch: int
    lifted: str
    node: PlanNode
    forced: bool = False
    legality: str | None = None

    @property
    def transformed(self) -> bool:
        return self.node.rho is not None


@dataclass
class SimplificationPlan:
    original: EquationSystem
    system: EquationSystem
    reductions: list[ReductionPlan] = field(default_factory=list)
    witness: sch.Schedule | None = None
    search_nodes: int = 0

    def for_equation(self, target: str) -> list[ReductionPlan]:
        return [r for r in self.reductions if r.equation == target]


def lift(sys: EquationSystem, target: str, branch: int = 1, k: int = 0) -> tuple[EquationSystem, ReductionEquation]:
    """Move the ``k``-th reduction of ``target``'s ``branch`` (1-based) into its own local array.

    Returns the rewritten system and the reduction as an equation of the new
    array, whose domain is the branch's region.
    """
    var = sys.var(target)
    eq = sys.equation(target)
    br = eq.branches[branch - 1]
    reds = _top_reduces(br.expr)
    e = reds[k]
    region = var.domain.intersect(br.guard)
    name = _fresh(sys, f"{target}_b{branch}" + (f"_{k + 1}" if len(reds) > 1 else ""))
    red = ReductionEquation(name, eq.names, region, operator(e.op, sys.assume_nonzero),
                            e.names, e.proj, effective_domain(e, region), e.body)
    read = Read(name, AffineMap.identity(var.dims))
    new_branch = Branch(br.guard, _replace_node(br.expr, e, read))
    new_eq = replace(eq, branches=eq.branches[:branch - 1] + (new_branch,) + eq.branches[branch:])
    lifted = _install(sys, [(Variable(name, "local", eq.names, region), _leaf_equation(red)), (var, new_eq)])
    return lifted, red


def simplify_system(sys: EquationSystem, force: dict[str, Sequence[int]] | None = None,
                    schedule_check: bool = True, witness: bool = True) -> SimplificationPlan:
    """Simplify every reduction of ``sys``, equations taken in dependence order.

    ``force`` maps an equation (or lifted reduction) name to the reuse vector
    to apply to its reductions.  Raises :class:`RhoRejected` for a forced
    vector that is not applicable, and :class:`~polysimp.schedule.ScheduleError`
    when the result admits no schedule.
    """
    force = {k: tuple(v) for k, v in (force or {}).items()}
    cur = sys
    plans: list[ReductionPlan] = []
    nodes = 0
    for target in dependence_order(sys):
        for b, br in enumerate(cur.equation(target).branches, 1):
            for k in range(len(_top_reduces(br.expr))):
                lifted, red = lift(cur, target, b, k)
                rho = force.get(red.target, force.get(target))
                search = Search(Legality(lifted, schedule_check), rho)
                node = search.best(red)
                nodes += search.nodes
                how = search.how.get((red.target, node.rho)) if node.rho is not None else None
                plans.append(ReductionPlan(target, b, red.target, node, rho is not None, how))
                if node.rho is not None:
                    cur = _install(lifted, materialize(node))
    result = SimplificationPlan(sys, cur, plans, search_nodes=nodes)
    if witness:
        result.witness = sch.schedule_witness(cur)
    return result


def simplify_equation(eq: Equation, sys: EquationSystem, **kw) -> list[ReductionPlan]:
    """Plans for the reductions of one equation (the rest of ``sys`` is left alone)."""
    return simplify_system(sys, witness=False, **kw).for_equation(eq.target)


def _equation_degrees(sys: EquationSystem, target: str, plans: list[ReductionPlan]) -> tuple[int, int, int]:
    var = sys.var(target)
    eq = sys.equation(target)
    pointwise = max((_dim(var.domain.intersect(b.guard)) for b in eq.branches
                     if not var.domain.intersect(b.guard).empty), default=0)
    from .ir import nominal_complexity

    original = nominal_complexity(eq, sys)
    final = max([pointwise] + [p.node.degree for p in plans])
    bound = max([pointwise] + [p.node.bound for p in plans])
    return original, final, bound


def complexity_report(plan: SimplificationPlan) -> dict:
    """Degrees per equation and per reduction, with the reuse bound and the derivation tree."""
    eqs = []
    for eq in plan.original.equations:
        ps = plan.for_equation(eq.target)
        original, final, bound = _equation_degrees(plan.original, eq.target, ps)
        eqs.append({
            "target": eq.target,
            "original_degree": original,
            "final_degree": final,
            "bound": bound,
            "bound_met": final <= bound,
            "reductions": [{
                "branch": p.branch,
                "lifted": p.lifted,
                "op": p.node.reduction.op.name,
                "invertible": p.node.reduction.op.has_inverse,
                "original_degree": p.node.nominal,
                "final_degree": p.node.degree,
                "bound": p.node.bound,
                "bound_met": p.node.degree <= p.node.bound,
                "transformed": p.transformed,
                "forced": p.forced,
                "legality": p.legality,
                "derivation": p.node.derivation(),
            } for p in ps],
        })
    out = {"schema": 1, "equations": eqs, "search_nodes": plan.search_nodes}
    if plan.witness is not None:
        out["schedule"] = {name: [list(r) for r in plan.witness.of(name)] for name in plan.witness.layout.names}
    return out
