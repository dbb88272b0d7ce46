"""Equational IR: systems of (piecewise) equations over polyhedral domains.

Every expression lives in an index space: the left-hand-side indices of its
equation, or the local indices of the enclosing ``reduce``.  Affine things
(read subscripts, index-valued terms, projections) are :class:`Aff` rows over
that space followed by the size parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

from . import geometry as geo
from .geometry import Constraint, Polyhedron
from .linalg import LinearSpace, intersect_spaces, kernel


class ValidationError(ValueError):
    """A system breaks one of the structural rules checked by :func:`validate`."""


@dataclass(frozen=True)
class Aff:
    """``coeffs . (indices, N) + const``."""

    coeffs: tuple[int, ...]
    const: int = 0

    @staticmethod
    def var(k: int, n: int, c: int = 0) -> "Aff":
        return Aff(tuple(int(i == k) for i in range(n)), c)

    @staticmethod
    def constant(c: int, n: int) -> "Aff":
        return Aff((0,) * n, c)

    def __call__(self, point: Sequence[int]) -> int:
        return sum(a * b for a, b in zip(self.coeffs, point)) + self.const

    def is_constant(self) -> bool:
        return not any(self.coeffs)

    def __add__(self, o: "Aff") -> "Aff":
        return Aff(tuple(a + b for a, b in zip(self.coeffs, o.coeffs)), self.const + o.const)

    def scale(self, k: int) -> "Aff":
        return Aff(tuple(k * a for a in self.coeffs), k * self.const)


@dataclass(frozen=True)
class AffineMap:
    """Output rows are affine in the source indices and the parameter."""

    rows: tuple[Aff, ...]
    n_idx: int
    n_par: int = 1

    @property
    def matrix(self) -> tuple[tuple[int, ...], ...]:
        return tuple(r.coeffs[: self.n_idx] for r in self.rows)

    @property
    def param_matrix(self) -> tuple[tuple[int, ...], ...]:
        return tuple(r.coeffs[self.n_idx:] for r in self.rows)

    @property
    def constant(self) -> tuple[int, ...]:
        return tuple(r.const for r in self.rows)

    @property
    def out_dims(self) -> int:
        return len(self.rows)

    def __call__(self, point: Sequence[int], params: Sequence[int]) -> tuple[int, ...]:
        full = tuple(point) + tuple(params)
        return tuple(r(full) for r in self.rows)

    def linear(self, v: Sequence[int]) -> tuple[int, ...]:
        """Image of a direction vector (no parameter or constant part)."""
        return tuple(sum(a * b for a, b in zip(row, v)) for row in self.matrix)

    def preimage(self, p: Polyhedron) -> list[Constraint]:
        """Constraints on source points whose image lies in ``p``."""
        out = []
        for c in p.constraints:
            cy, cn = c.coeffs[: p.n_idx], c.coeffs[p.n_idx:]
            coeffs = [sum(cy[o] * self.rows[o].coeffs[k] for o in range(self.out_dims)) for k in range(self.n_idx + self.n_par)]
            for q, v in enumerate(cn):
                coeffs[self.n_idx + q] += v
            const = c.const + sum(cy[o] * self.rows[o].const for o in range(self.out_dims))
            out.append(Constraint.make(coeffs, const, c.eq))
        return out

    @staticmethod
    def identity(n: int, n_par: int = 1) -> "AffineMap":
        return AffineMap(tuple(Aff.var(k, n + n_par) for k in range(n)), n, n_par)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Operator:
    name: str
    identity: Union[int, float]
    has_inverse: bool
    inverse_name: str | None = None

    def combine(self, a, b):
        if self.name == "plus":
            return a + b
        if self.name == "times":
            return a * b
        if self.name == "min":
            return min(a, b)
        return max(a, b)

    def uncombine(self, a, b):
        if not self.has_inverse:
            raise ValueError(f"operator {self.name} has no inverse")
        if self.name == "plus":
            return a - b
        if b == 0 or a % b:
            raise ArithmeticError("inexact or zero division in times-inverse")
        return a // b


OPERATORS = {
    "plus": Operator("plus", 0, True, "minus"),
    "times": Operator("times", 1, False),
    "min": Operator("min", math.inf, False),
    "max": Operator("max", -math.inf, False),
}


def operator(name: str, assume_nonzero: bool = False) -> Operator:
    if name not in OPERATORS:
        raise ValidationError(f"unknown reduction operator {name!r}")
    if name == "times" and assume_nonzero:
        return Operator("times", 1, True, "div")
    return OPERATORS[name]


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: Union[int, float]


@dataclass(frozen=True)
class Idx:
    """An index-valued (affine) term used as a value."""

    aff: Aff


@dataclass(frozen=True)
class Read:
    var: str
    access: AffineMap


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    """``op`` in ``+ - * max min div``."""

    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Reduce:
    """Fold ``body`` with ``op`` over ``{z in domain : proj(z) = y}`` at point ``y``."""

    op: str
    names: tuple[str, ...]
    proj: AffineMap
    domain: Polyhedron
    body: "Expr"


Expr = Union[Num, Idx, Read, Call, Bin, Reduce]


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Call):
        yield from walk(e.arg)
    elif isinstance(e, Bin):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Reduce):
        yield from walk(e.body)


def reads(e: Expr) -> list[Read]:
    return [x for x in walk(e) if isinstance(x, Read)]


# ---------------------------------------------------------------------------
# Declarations, equations, systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str
    role: str  # input | output | local
    names: tuple[str, ...]
    domain: Polyhedron

    @property
    def dims(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Branch:
    guard: Polyhedron
    expr: Expr


@dataclass(frozen=True)
class Equation:
    target: str
    names: tuple[str, ...]
    branches: tuple[Branch, ...]


@dataclass(frozen=True)
class EquationSystem:
    param: str
    param_min: int
    variables: tuple[Variable, ...]
    equations: tuple[Equation, ...]
    funcs: tuple[tuple[str, str], ...] = ()
    assume_nonzero: bool = False

    def var(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def has_var(self, name: str) -> bool:
        return any(v.name == name for v in self.variables)

    def equation(self, name: str) -> Equation:
        for e in self.equations:
            if e.target == name:
                return e
        raise KeyError(name)

    def replace(self, **kw) -> "EquationSystem":
        from dataclasses import replace

        return replace(self, **kw)


# ---------------------------------------------------------------------------
# Reduction views
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReductionEquation:
    """One reduction occurrence lifted out of a branch.

    ``domain`` is the effective iteration space: the reduce's own domain cut
    down to points projecting into ``target_domain`` (branch guard within the
    variable's declared domain).
    """

    target: str
    target_names: tuple[str, ...]
    target_domain: Polyhedron
    op: Operator
    names: tuple[str, ...]
    proj: AffineMap
    domain: Polyhedron
    body: Expr


def effective_domain(red: Reduce, target_domain: Polyhedron) -> Polyhedron:
    return red.domain.add(*red.proj.preimage(target_domain))


def fiber(red: Reduce, point: Sequence[int]) -> Polyhedron:
    """Reduction points contributing to the result at ``point``."""
    eqs = [Constraint.make(r.coeffs, r.const - y, eq=True) for r, y in zip(red.proj.rows, point)]
    return red.domain.add(*eqs)


def body_access(body: Expr) -> AffineMap | None:
    """The single read access of a reduction body, if it has that shape."""
    rs = reads(body)
    if not rs or any(isinstance(x, (Idx, Reduce)) for x in walk(body)):
        return None
    if len({(r.var, r.access) for r in rs}) != 1:
        return None
    return rs[0].access


def reuse_space(body: Expr, n_idx: int) -> LinearSpace:
    """Null space of the linear part of the body's read access."""
    acc = body_access(body)
    if acc is None:
        return LinearSpace((), n_idx)
    if not acc.rows:
        return LinearSpace.full(n_idx)
    return kernel(acc.matrix, n_idx)


def share_space(face: Polyhedron | geo.Face, body: Expr) -> LinearSpace:
    p = face.polyhedron if isinstance(face, geo.Face) else face
    return intersect_spaces(geo.lineality(p), reuse_space(body, p.n_idx))


def nominal_complexity(eq: Equation, sys: EquationSystem) -> int:
    """Degree of the work needed to evaluate ``eq`` as written."""
    dom = sys.var(eq.target).domain
    best = 0
    for br in eq.branches:
        region = dom.intersect(br.guard)
        if region.empty:
            continue
        best = max(best, geo.dimension(region))
        for e in walk(br.expr):
            if isinstance(e, Reduce):
                eff = effective_domain(e, region)
                if not eff.empty:
                    best = max(best, geo.dimension(eff))
    return best


def reduction_degree(r: ReductionEquation) -> int:
    return geo.dimension(r.domain) if not r.domain.empty else 0


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check_points(sys: EquationSystem, N: int) -> None:
    for eq in sys.equations:
        var = sys.var(eq.target)
        pts = geo.integer_points(var.domain, N)
        owners: dict[tuple, int] = {}
        for k, br in enumerate(eq.branches):
            for p in pts:
                if br.guard.contains(p + (N,)):
                    if p in owners:
                        raise ValidationError(
                            f"{eq.target}: guards {owners[p]} and {k} overlap at {p} (N={N})")
                    owners[p] = k
        for p in pts:
            if p not in owners:
                raise ValidationError(f"{eq.target}: no guard covers {p} (N={N})")
        for k, br in enumerate(eq.branches):
            region = var.domain.intersect(br.guard)
            for p in geo.integer_points(region, N):
                _check_expr_reads(sys, br.expr, p, N, eq.target)


def _check_expr_reads(sys, e: Expr, point, N, where) -> None:
    if isinstance(e, Read):
        tgt = sys.var(e.var)
        at = e.access(point, (N,))
        if not tgt.domain.contains(at + (N,)):
            raise ValidationError(f"{where}: read {e.var}{list(at)} outside its domain (N={N})")
    elif isinstance(e, Call):
        _check_expr_reads(sys, e.arg, point, N, where)
    elif isinstance(e, Bin):
        _check_expr_reads(sys, e.left, point, N, where)
        _check_expr_reads(sys, e.right, point, N, where)
    elif isinstance(e, Reduce):
        for z in geo.integer_points(fiber(e, point), N):
            _check_expr_reads(sys, e.body, z, N, where)


def validate(sys: EquationSystem, check_values=(None, 4)) -> EquationSystem:
    """Check the structural invariants; returns ``sys`` unchanged when they hold."""
    names = [v.name for v in sys.variables]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ValidationError(f"variable declared twice: {sorted(dup)[0]}")
    defined: dict[str, int] = {}
    for eq in sys.equations:
        if eq.target not in names:
            raise ValidationError(f"equation for undeclared variable {eq.target}")
        defined[eq.target] = defined.get(eq.target, 0) + 1
        if defined[eq.target] > 1:
            raise ValidationError(f"variable {eq.target} defined twice")
        var = sys.var(eq.target)
        if var.role == "input":
            raise ValidationError(f"input {eq.target} cannot be defined by an equation")
        if len(eq.names) != var.dims:
            raise ValidationError(f"{eq.target}: index count differs from its declaration")
        for br in eq.branches:
            for e in walk(br.expr):
                if isinstance(e, Read):
                    if e.var not in names:
                        raise ValidationError(f"{eq.target}: read of undefined variable {e.var}")
                    if e.access.out_dims != sys.var(e.var).dims:
                        raise ValidationError(f"{eq.target}: {e.var} accessed with wrong arity")
                if isinstance(e, Reduce) and e.op not in OPERATORS:
                    raise ValidationError(f"{eq.target}: unknown operator {e.op}")
    for v in sys.variables:
        if v.role != "input" and v.name not in defined:
            raise ValidationError(f"variable {v.name} has no defining equation")
    for N in sorted({sys.param_min if n is None else max(n, sys.param_min) for n in check_values}):
        _check_points(sys, N)
    return sys
