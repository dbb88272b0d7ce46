"""Affine schedules: causality cones, reuse-vector compatibility, witnesses.

Schedule rows are laid out per non-input variable as
``(index coefficients..., parameter coefficient, constant)`` and the blocks
are concatenated in declaration order.  A row ``theta`` weakly respects a
dependence when ``theta_consumer(y) - theta_producer(w) >= 0`` over the whole
dependence relation; it strictly satisfies it when the difference is
positive everywhere.  A multidimensional schedule is legal when every
dependence is strictly satisfied at some row and weakly respected by all
earlier rows.

Nonnegativity of an affine form over a polyhedron is turned into linear
constraints on ``theta`` by evaluating the form on the generators of the
homogenized polyhedron (Minkowski-Weyl, the dual view of affine Farkas).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from . import geometry as geo
from .geometry import Cone, Constraint, Polyhedron
from .ir import EquationSystem, Read, Reduce, walk
from .linalg import dot, integerize
from .oracle import CycleError, evaluate


class ScheduleError(RuntimeError):
    """No legal schedule exists (within the row budget) for a system."""

    def __init__(self, msg: str, cycle=None):
        super().__init__(msg)
        self.cycle = cycle


@dataclass(frozen=True)
class Dependence:
    """``consumer[y]`` reads ``producer[w]``.

    ``relation`` lives in ``(y, z, w, N)`` where ``z`` are the indices of an
    enclosing reduction (``n_red`` of them, possibly zero).
    """

    consumer: str
    producer: str
    relation: Polyhedron
    n_cons: int
    n_red: int
    n_prod: int
    uniform_vector: tuple[int, ...] | None = None

    def split(self, x: Sequence) -> tuple[tuple, tuple, object]:
        a, b = self.n_cons, self.n_cons + self.n_red
        c = b + self.n_prod
        return tuple(x[:a]), tuple(x[b:c]), x[c]


@dataclass(frozen=True)
class Layout:
    names: tuple[str, ...]
    dims: tuple[int, ...]

    @staticmethod
    def of(sys: EquationSystem) -> "Layout":
        vs = [v for v in sys.variables if v.role != "input"]
        return Layout(tuple(v.name for v in vs), tuple(v.dims for v in vs))

    def offset(self, name: str) -> int:
        k = self.names.index(name)
        return sum(d + 2 for d in self.dims[:k])

    def block(self, name: str) -> range:
        o = self.offset(name)
        return range(o, o + self.dims[self.names.index(name)] + 2)

    @property
    def size(self) -> int:
        return sum(d + 2 for d in self.dims)

    def row_of(self, theta: Sequence, name: str) -> tuple:
        return tuple(theta[k] for k in self.block(name))


def _pointwise_uniform(access, n: int) -> tuple[int, ...] | None:
    if access.out_dims != n:
        return None
    for k, r in enumerate(access.rows):
        if r.coeffs[:n] != tuple(int(j == k) for j in range(n)) or any(r.coeffs[n:]):
            return None
    return tuple(-r.const for r in access.rows)


def extract_dependences(sys: EquationSystem, extra: Sequence[Dependence] = ()) -> list[Dependence]:
    """One dependence per (read, branch) whose producer is not an input."""
    out: list[Dependence] = []
    for eq in sys.equations:
        var = sys.var(eq.target)
        n = var.dims
        for br in eq.branches:
            region = var.domain.intersect(br.guard)
            if region.empty:
                continue
            inner: set[int] = set()
            for e in walk(br.expr):
                if isinstance(e, Reduce):
                    inner.update(id(r) for r in walk(e.body))
                    for rd in walk(e.body):
                        if isinstance(rd, Read) and sys.var(rd.var).role != "input":
                            out.append(_reduce_dep(sys, eq.target, region, e, rd))
            for e in walk(br.expr):
                if isinstance(e, Read) and id(e) not in inner and sys.var(e.var).role != "input":
                    out.append(_point_dep(sys, eq.target, region, e))
    out.extend(extra)
    return [d for d in out if not d.relation.empty]


def _point_dep(sys, target, region: Polyhedron, rd: Read) -> Dependence:
    n = region.n_idx
    prod = sys.var(rd.var)
    m = prod.dims
    tot = n + m + 1
    cons = []
    for c in region.constraints:
        cons.append(Constraint.make(c.coeffs[:n] + (0,) * m + c.coeffs[n:], c.const, c.eq))
    for c in prod.domain.constraints:
        cons.append(Constraint.make((0,) * n + c.coeffs[:m] + c.coeffs[m:], c.const, c.eq))
    for k, r in enumerate(rd.access.rows):
        # w_k - access_k(y) == 0
        coeffs = [-x for x in r.coeffs[:n]] + [int(j == k) for j in range(m)] + [-r.coeffs[n]]
        cons.append(Constraint.make(coeffs, -r.const, eq=True))
    rel = geo.canonicalize(cons, n + m, 1, sys.param_min)
    uni = _pointwise_uniform(rd.access, n) if rd.var == target else None
    return Dependence(target, rd.var, rel, n, 0, m, uni)


def _reduce_dep(sys, target, region: Polyhedron, red: Reduce, rd: Read) -> Dependence:
    n, r = region.n_idx, len(red.names)
    prod = sys.var(rd.var)
    m = prod.dims

    def place(c: Constraint, at: int, width: int) -> Constraint:
        body = [0] * (n + r + m)
        body[at:at + width] = c.coeffs[:width]
        return Constraint.make(body + [c.coeffs[width]], c.const, c.eq)

    cons = [place(c, 0, n) for c in region.constraints]
    cons += [place(c, n, r) for c in red.domain.constraints]
    cons += [place(c, n + r, m) for c in prod.domain.constraints]
    for k, row in enumerate(red.proj.rows):  # y_k == proj_k(z)
        coeffs = [int(j == k) for j in range(n)] + [-x for x in row.coeffs[:r]] + [0] * m + [-row.coeffs[r]]
        cons.append(Constraint.make(coeffs, -row.const, eq=True))
    for k, row in enumerate(rd.access.rows):  # w_k == access_k(z)
        coeffs = [0] * n + [-x for x in row.coeffs[:r]] + [int(j == k) for j in range(m)] + [-row.coeffs[r]]
        cons.append(Constraint.make(coeffs, -row.const, eq=True))
    rel = geo.canonicalize(cons, n + r + m, 1, sys.param_min)
    return Dependence(target, rd.var, rel, n, r, m, None)


def uniform_dependence(var: str, n: int, vector: Sequence[int], domain: Polyhedron) -> Dependence:
    """``var[y]`` reads ``var[y - vector]`` for ``y`` and ``y - vector`` in ``domain``."""
    cons = []
    for c in domain.constraints:
        cons.append(Constraint.make(c.coeffs[:n] + (0,) * n + c.coeffs[n:], c.const, c.eq))
        cons.append(Constraint.make((0,) * n + c.coeffs[:n] + c.coeffs[n:], c.const, c.eq))
    for k in range(n):
        coeffs = [int(j == k) for j in range(n)] + [-int(j == k) for j in range(n)] + [0]
        cons.append(Constraint.make(coeffs, -vector[k], eq=True))
    rel = geo.canonicalize(cons, 2 * n, 1, domain.param_min)
    return Dependence(var, var, rel, n, 0, n, tuple(vector))


# ---------------------------------------------------------------------------
# Cones of schedule rows
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1024)
def _relation_generators(rel: Polyhedron) -> tuple[tuple[tuple[int, ...], ...], tuple[tuple[int, ...], ...]]:
    homog = []
    for c in list(rel.constraints) + rel.context():
        homog.append(Constraint.make(tuple(c.coeffs) + (c.const,), 0, c.eq))
    homog.append(Constraint.make((0,) * rel.dims + (1,), 0))  # t >= 0
    lin, rays = geo.double_description(homog, rel.dims + 1)
    return tuple(lin), tuple(rays)


def _diff_row(dep: Dependence, layout: Layout, g: Sequence[int]) -> list[int]:
    """Coefficients (over theta) of the homogenized difference at generator ``g``."""
    y, w, _ = dep.split(g[:-1])
    n_val, t = g[-2], g[-1]
    row = [0] * layout.size
    oc = layout.offset(dep.consumer)
    for k, v in enumerate(tuple(y) + (n_val, t)):
        row[oc + k] += v
    op = layout.offset(dep.producer)
    for k, v in enumerate(tuple(w) + (n_val, t)):
        row[op + k] -= v
    return row


def causality_constraints(deps: Sequence[Dependence], layout: Layout) -> list[Constraint]:
    out: list[Constraint] = []
    for d in deps:
        lin, rays = _relation_generators(d.relation)
        for g in lin:
            out.append(Constraint.make(_diff_row(d, layout, g), 0, eq=True))
        for g in rays:
            out.append(Constraint.make(_diff_row(d, layout, g), 0))
    return [c for c in dict.fromkeys(out) if not c.is_trivial()]


def causality_cone(deps: Sequence[Dependence], layout: Layout) -> Cone:
    """Rows weakly respecting every dependence (with generators attached)."""
    return Cone.make(causality_constraints(deps, layout), layout.size).with_generators()


def strictly_satisfies(theta: Sequence[int], dep: Dependence, layout: Layout) -> bool:
    """Is the difference positive on every rational point of the relation?"""
    rc, rp = layout.row_of(theta, dep.consumer), layout.row_of(theta, dep.producer)
    n, r, m = dep.n_cons, dep.n_red, dep.n_prod
    coeffs = list(rc[:n]) + [0] * r + [-x for x in rp[:m]] + [rc[n] - rp[m]]
    const = rc[n + 1] - rp[m + 1]
    # diff <= 0 infeasible?
    viol = Constraint.make([-x for x in coeffs], -const)
    return not geo.is_feasible(list(dep.relation.constraints) + dep.relation.context() + [viol], dep.relation.dims)


def interior_row(cone: Cone) -> tuple[int, ...]:
    """Sum of the extreme rays: strictly positive on every dependence any member can satisfy."""
    _, rays = geo.double_description(cone.constraints, cone.dims)
    tot = [0] * cone.dims
    for r in rays:
        tot = [a + b for a, b in zip(tot, r)]
    return integerize(tot) if any(tot) else tuple(tot)


@dataclass
class ScheduleContext:
    layout: Layout
    deps: list[Dependence]
    cone: Cone
    param_min: int
    var_domains: dict = field(default_factory=dict)

    @property
    def generators(self) -> tuple:
        return self.cone.generators or ()


def build_context(sys: EquationSystem, extra: Sequence[Dependence] = ()) -> ScheduleContext:
    layout = Layout.of(sys)
    deps = extract_dependences(sys, extra)
    return ScheduleContext(layout, deps, causality_cone(deps, layout), sys.param_min,
                           {v.name: v.domain for v in sys.variables})


def project_on_variable(ctx: ScheduleContext, y: str) -> Cone:
    """The causality cone seen through ``y``'s coefficient block."""
    if y not in ctx.layout.names:
        raise KeyError(y)
    proj = geo.project_cone(ctx.cone, list(ctx.layout.block(y)))
    return proj.with_generators()


def is_compatible(cone_y: Cone, r: Sequence[int]) -> bool:
    """First-row generator test: some generator gives ``r`` a positive increment."""
    if not any(r):
        return False
    gens = cone_y.generators if cone_y.generators is not None else tuple(geo.dual_generators(cone_y))
    return any(dot(g[: len(r)], r) > 0 for g in gens)


def legality_constraints(cone_y: Cone, proj_matrix: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """One disjunct per generator: ``rho`` with ``g . (B rho) > 0`` (coefficients on rho)."""
    gens = cone_y.generators if cone_y.generators is not None else tuple(geo.dual_generators(cone_y))
    n_out = len(proj_matrix)
    n_idx = len(proj_matrix[0]) if proj_matrix else 0
    out = []
    for g in gens:
        coeffs = tuple(sum(g[o] * proj_matrix[o][k] for o in range(n_out)) for k in range(n_idx))
        if any(coeffs) and coeffs not in out:
            out.append(coeffs)
    return out


@dataclass
class Compatibility:
    ok: bool
    level: int | None  # schedule row at which r becomes positive
    generator: int | None  # index into the level-one generators, when decided there


def compatible(ctx: ScheduleContext, y: str, r: Sequence[int]) -> Compatibility:
    """Does some legal schedule give the self dependence ``r`` on ``y`` a positive increment?

    Row by row: if a row in the current cone can make ``theta_y . r > 0`` we
    are done; otherwise every row has ``theta_y . r <= 0``, so the next row is
    taken from the face ``theta_y . r == 0`` at a relative-interior point,
    which strictly satisfies as many remaining dependences as possible.
    """
    if not any(r):
        return Compatibility(False, None, None)
    block = list(ctx.layout.block(y))[: len(r)]
    deps = list(ctx.deps)
    level = 0
    cone = ctx.cone
    while True:
        gens = cone.generators if cone.generators is not None else tuple(geo.dual_generators(cone))
        for k, g in enumerate(gens):
            if sum(g[b] * x for b, x in zip(block, r)) > 0:
                return Compatibility(True, level, k if level == 0 else None)
        row = [0] * ctx.layout.size
        for b, x in zip(block, r):
            row[b] = x
        face = Cone.make(list(cone.constraints) + [Constraint.make(row, 0, eq=True)], cone.dims)
        theta = interior_row(face)
        done = [d for d in deps if strictly_satisfies(theta, d, ctx.layout)]
        if not done:
            return Compatibility(False, None, None)
        deps = [d for d in deps if d not in done]
        level += 1
        if not deps:
            return Compatibility(True, level, None)
        cone = causality_cone(deps, ctx.layout)


# ---------------------------------------------------------------------------
# Witness schedules
# ---------------------------------------------------------------------------


@dataclass
class Schedule:
    layout: Layout
    rows: list[tuple[int, ...]]

    def of(self, name: str) -> list[tuple[int, ...]]:
        return [self.layout.row_of(r, name) for r in self.rows]

    def timestamp(self, name: str, point: Sequence[int], N: int) -> tuple[int, ...]:
        return tuple(dot(r, tuple(point) + (N, 1)) for r in self.of(name))


def greedy_schedule(deps: Sequence[Dependence], layout: Layout, budget: int) -> Schedule | None:
    remaining = list(deps)
    rows: list[tuple[int, ...]] = []
    while remaining:
        if len(rows) >= budget:
            return None
        theta = interior_row(causality_cone(remaining, layout))
        done = [d for d in remaining if strictly_satisfies(theta, d, layout)]
        if not done:
            return None
        rows.append(theta)
        remaining = [d for d in remaining if d not in done]
    if not rows:
        rows.append((0,) * layout.size)
    return Schedule(layout, rows)


def verify_schedule(sys: EquationSystem, sched: Schedule, N: int = 6, deps=None) -> bool:
    """Exhaustive causality check of every dependence instance at ``N``."""
    for d in deps if deps is not None else extract_dependences(sys):
        for x in geo.integer_points(d.relation, N):
            y, w, _ = d.split(x + (N,))
            tc = sched.timestamp(d.consumer, y, N)
            tp = sched.timestamp(d.producer, w, N)
            diff = tuple(a - b for a, b in zip(tc, tp))
            if not diff > (0,) * len(diff):
                return False
    return True


def _components(names: Sequence[str], deps: Sequence[Dependence]) -> list[list[str]]:
    """Strongly connected components, producers before consumers."""
    succ: dict[str, set[str]] = {v: set() for v in names}
    for d in deps:
        succ[d.consumer].add(d.producer)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    out: list[list[str]] = []

    def visit(v: str) -> None:
        index[v] = low[v] = len(index)
        stack.append(v)
        for w in sorted(succ[v], key=names.index):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                comp.append(w)
                if w == v:
                    break
            out.append(sorted(comp, key=names.index))

    for v in names:
        if v not in index:
            visit(v)
    return out  # Tarjan emits a component after everything it reads


def schedule_witness(sys: EquationSystem, N_check: int = 6) -> Schedule:
    """A legal multidimensional schedule for ``sys``, checked exhaustively.

    Components of the variable dependence graph are ordered by a leading
    constant row; each component is then scheduled greedily on its own
    dependences, within (largest dimension in it + 1) rows.  Raises
    :class:`ScheduleError` (with an instance-level cycle when one exists at
    ``N_check``) if some component cannot be scheduled.
    """
    layout = Layout.of(sys)
    deps = extract_dependences(sys)
    comps = _components(list(layout.names), deps)
    stage = {v: k for k, comp in enumerate(comps) for v in comp}
    rows: list[list[int]] = []
    if len(comps) > 1:
        row = [0] * layout.size
        for v in layout.names:
            row[layout.offset(v) + layout.dims[layout.names.index(v)] + 1] = stage[v]
        rows.append(row)
    lead = len(rows)
    for comp in comps:
        inner = [d for d in deps if d.consumer in comp and d.producer in comp]
        if not inner:
            continue
        sub = Layout(tuple(comp), tuple(layout.dims[layout.names.index(v)] for v in comp))
        budget = max(sub.dims) + 1
        found = greedy_schedule(inner, sub, budget)
        if found is None:
            _no_schedule(sys, N_check)
        for k, r in enumerate(found.rows):
            while len(rows) <= lead + k:
                rows.append([0] * layout.size)
            for v in comp:
                for src, dst in zip(sub.block(v), layout.block(v)):
                    rows[lead + k][dst] = r[src]
    if not rows:
        rows.append([0] * layout.size)
    sched = Schedule(layout, [tuple(r) for r in rows])
    if not verify_schedule(sys, sched, max(N_check, sys.param_min), deps):
        raise ScheduleError("internal error: witness schedule fails the exhaustive causality check")
    return sched


def _no_schedule(sys: EquationSystem, N_check: int):
    cycle = None
    try:
        evaluate(sys, max(N_check, sys.param_min))
    except CycleError as exc:
        cycle = exc.cycle
    msg = "no legal schedule within the row budget"
    if cycle:
        msg += "; instance-level cycle: " + " -> ".join(f"{v}{list(p)}" for v, p in cycle)
    raise ScheduleError(msg, cycle)
