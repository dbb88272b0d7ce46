"""Reference semantics: naive, memoized, demand-driven evaluation.

Deliberately slow and simple; it is the judge every transformation is
checked against, so it shares nothing with the simplifier beyond integer
point enumeration.
"""

from __future__ import annotations

import math
import random
import statistics
import sys as _sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

from . import geometry as geo
from .ir import Bin, Call, EquationSystem, Expr, Idx, Num, Read, Reduce, effective_domain, operator

FUNCS = {
    "succ": lambda x: x + 1,
    "double": lambda x: 2 * x,
    "sqmod97": lambda x: (x * x) % 97,
    "id": lambda x: x,
}

Point = tuple[int, ...]


@lru_cache(maxsize=4096)
def _region(domain, guard):
    return domain.intersect(guard)


@lru_cache(maxsize=4096)
def _effective(red, region):
    return effective_domain(red, region)


class EvaluationError(RuntimeError):
    pass


class CycleError(EvaluationError):
    def __init__(self, cycle: list[tuple[str, Point]]):
        self.cycle = cycle
        path = " -> ".join(f"{v}{list(p)}" for v, p in cycle)
        super().__init__(f"instance-level dependence cycle: {path}")


class MissingInputError(EvaluationError):
    pass


@dataclass
class Valuation:
    param_value: int
    arrays: dict[str, dict[Point, object]] = field(default_factory=dict)

    def dump(self) -> str:
        lines = []
        for v in sorted(self.arrays):
            for p in sorted(self.arrays[v]):
                lines.append(f"{v} {list(p)} {_fmt_value(self.arrays[v][p])}")
        return "\n".join(lines) + "\n"


def _fmt_value(x) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return str(x)


def random_inputs(sys: EquationSystem, N: int, rng: random.Random, nonzero: bool = False) -> dict[str, dict[Point, int]]:
    """Uniform integers in [-9, 9] for every input point, in a fixed order."""
    values = [v for v in range(-9, 10) if v or not nonzero]
    out: dict[str, dict[Point, int]] = {}
    for var in sorted((v for v in sys.variables if v.role == "input"), key=lambda v: v.name):
        out[var.name] = {p: rng.choice(values) for p in geo.integer_points(var.domain, N)}
    return out


class _Evaluator:
    def __init__(self, sys: EquationSystem, N: int, inputs, funcs: Mapping[str, str] | None):
        self.sys, self.N = sys, N
        self.inputs = inputs
        self.funcs = dict(sys.funcs)
        self.funcs.update(funcs or {})
        self.values: dict[str, dict[Point, object]] = {}
        self.active: dict[tuple[str, Point], int] = {}
        self.stack: list[tuple[str, Point]] = []
        self.ops: dict[str, int] = {}
        self.fibers: dict = {}
        self.eqs = {e.target: e for e in sys.equations}
        self.vars = {v.name: v for v in sys.variables}

    def get(self, var: str, point: Point):
        decl = self.vars.get(var)
        if decl is None:
            raise EvaluationError(f"unknown variable {var}")
        if decl.role == "input":
            try:
                return self.inputs[var][point]
            except KeyError:
                raise MissingInputError(f"no input value for {var}{list(point)}") from None
        memo = self.values.setdefault(var, {})
        if point in memo:
            return memo[point]
        key = (var, point)
        if key in self.active:
            start = self.active[key]
            raise CycleError(self.stack[start:] + [key])
        if not decl.domain.contains(point + (self.N,)):
            raise EvaluationError(f"read of {var}{list(point)} outside its domain (N={self.N})")
        self.active[key] = len(self.stack)
        self.stack.append(key)
        try:
            eq = self.eqs[var]
            br = next((b for b in eq.branches if b.guard.contains(point + (self.N,))), None)
            if br is None:
                raise EvaluationError(f"no branch of {var} covers {list(point)}")
            if not any(isinstance(x, Reduce) for x in _walk(br.expr)):
                self.ops[var] = self.ops.get(var, 0) + 1
            region = _region(decl.domain, br.guard)
            val = self.eval(br.expr, point, region, var)
        finally:
            self.stack.pop()
            del self.active[key]
        memo[point] = val
        return val

    def eval(self, e: Expr, point: Point, region, owner: str):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Idx):
            return e.aff(point + (self.N,))
        if isinstance(e, Read):
            return self.get(e.var, e.access(point, (self.N,)))
        if isinstance(e, Call):
            impl = self.funcs.get(e.func)
            if impl is None:
                raise EvaluationError(f"function {e.func} has no interpretation")
            return FUNCS[impl](self.eval(e.arg, point, region, owner))
        if isinstance(e, Bin):
            a = self.eval(e.left, point, region, owner)
            b = self.eval(e.right, point, region, owner)
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "max":
                return max(a, b)
            if e.op == "min":
                return min(a, b)
            if e.op == "div":
                if b == 0 or a % b:
                    raise EvaluationError(f"inexact division {a} / {b}")
                return a // b
        if isinstance(e, Reduce):
            op = operator(e.op)
            acc = op.identity
            pts = self._fiber(e, region).get(tuple(point), ())
            for z in pts:
                acc = op.combine(acc, self.eval(e.body, z, None, owner))
            self.ops[owner] = self.ops.get(owner, 0) + len(pts)
            return acc
        raise TypeError(e)

    def _fiber(self, e: Reduce, region) -> dict[Point, list[Point]]:
        key = (e, region)
        if key not in self.fibers:
            groups: dict[Point, list[Point]] = {}
            for z in geo.integer_points(_effective(e, region), self.N):
                groups.setdefault(e.proj(z, (self.N,)), []).append(z)
            self.fibers[key] = groups
        return self.fibers[key]


def _walk(e):
    from .ir import walk

    return walk(e)


def _run(sys: EquationSystem, N: int, inputs=None, seed: int | None = None,
         funcs: Mapping[str, str] | None = None, nonzero: bool = False,
         order: str = "forward") -> _Evaluator:
    if N < sys.param_min:
        raise EvaluationError(f"N={N} below the declared bound {sys.param_min}")
    if inputs is None:
        inputs = random_inputs(sys, N, random.Random(seed if seed is not None else 0), nonzero)
    for v in sys.variables:
        if v.role == "input" and v.name not in inputs:
            raise MissingInputError(f"no values supplied for input {v.name}")
    ev = _Evaluator(sys, N, inputs, funcs)
    old = _sys.getrecursionlimit()
    _sys.setrecursionlimit(max(old, 200000))
    try:
        for v in sys.variables:
            if v.role == "input":
                continue
            pts = geo.integer_points(v.domain, N)
            if order == "reverse":
                pts = pts[::-1]
            for p in pts:
                ev.get(v.name, p)
    finally:
        _sys.setrecursionlimit(old)
    return ev


def evaluate(sys: EquationSystem, N: int, inputs=None, seed: int | None = None,
             funcs: Mapping[str, str] | None = None, nonzero: bool = False,
             order: str = "forward") -> Valuation:
    """Values of every non-input variable at parameter value ``N``."""
    ev = _run(sys, N, inputs, seed, funcs, nonzero, order)
    return Valuation(N, {k: dict(sorted(v.items())) for k, v in sorted(ev.values.items())})


def count_ops(sys: EquationSystem, N: int, by_variable: bool = False, funcs=None):
    """Folds performed by reductions plus pointwise evaluations."""
    ev = _run(sys, N, seed=0, funcs=funcs, nonzero=sys.assume_nonzero)
    return dict(ev.ops) if by_variable else sum(ev.ops.values())


def fit_degree(sys: EquationSystem, Ns: Sequence[int] = (8, 16, 32, 64), funcs=None) -> float:
    """Least-squares slope of log(countOps) against log(N)."""
    xs = [math.log(n) for n in Ns]
    ys = [math.log(max(count_ops(sys, n, funcs=funcs), 1)) for n in Ns]
    return statistics.linear_regression(xs, ys).slope


@dataclass
class Verdict:
    equal: bool
    checked: int
    mismatch: tuple | None = None  # (N, trial, variable, point, a-value, b-value)

    def describe(self) -> str:
        if self.equal:
            return f"equivalent ({self.checked} evaluations compared)"
        N, t, var, p, a, b = self.mismatch
        return f"MISMATCH at N={N} trial={t}: {var}{list(p)} = {_fmt_value(a)} vs {_fmt_value(b)}"


def equivalent(a: EquationSystem, b: EquationSystem, Ns: Sequence[int], trials: int = 3,
               seed: int = 7, funcs: Mapping[str, str] | None = None) -> Verdict:
    """Compare every output point of ``a`` and ``b`` on shared random inputs."""
    outs = sorted(v.name for v in a.variables if v.role == "output")
    nonzero = a.assume_nonzero or b.assume_nonzero
    checked = 0
    for N in Ns:
        for t in range(trials):
            rng = random.Random(f"{seed}:{N}:{t}")
            inputs = random_inputs(a, N, rng, nonzero)
            va = evaluate(a, N, inputs, funcs=funcs)
            vb = evaluate(b, N, inputs, funcs=funcs)
            for name in outs:
                xa, xb = va.arrays.get(name, {}), vb.arrays.get(name, {})
                for p in sorted(set(xa) | set(xb)):
                    if xa.get(p) != xb.get(p):
                        return Verdict(False, checked, (N, t, name, p, xa.get(p), xb.get(p)))
            checked += 1
    return Verdict(True, checked)
