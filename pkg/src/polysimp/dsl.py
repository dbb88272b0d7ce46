"""Reader and canonical writer for ``.eqs`` programs.

The grammar is documented in ``docs/grammar.md``.  ``emit`` is deterministic
and ``parse(emit(sys)) == sys`` for every system ``parse`` accepts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from . import geometry as geo
from .geometry import Constraint, Polyhedron
from .ir import (
    OPERATORS, Aff, AffineMap, Bin, Branch, Call, Equation, EquationSystem, Expr, Idx, Num, Read,
    Reduce, ValidationError, Variable, operator, validate,
)

ROLES = {"input": "input", "output": "output", "local": "local", "var": "local"}
KEYWORDS = {"param", "func", "option", "case", "reduce", "true", "inf", "and"} | set(ROLES)
FUNC_LIBRARY = ("succ", "double", "sqmod97", "id")


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line, self.col = line, col


@dataclass
class Tok:
    kind: str  # int, name, op, eof
    text: str
    line: int
    col: int


_TOKEN = re.compile(r"\s*(?:(#[^\n]*)|(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(->|<=|>=|==|[-+*(){}\[\]:;,=<>]))")


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    pos, line, line_start = 0, 1, 0
    while True:
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            # find the offending char
            off = pos + (len(rest) - len(rest.lstrip()))
            line += text.count("\n", pos, off)
            ls = text.rfind("\n", 0, off) + 1
            raise ParseError(f"unexpected character {text[off]!r}", line, off - ls + 1)
        start = m.start(m.lastindex)
        line += text.count("\n", pos, start)
        nl = text.rfind("\n", 0, start)
        if nl >= 0:
            line_start = nl + 1
        col = start - line_start + 1
        if m.group(2):
            toks.append(Tok("int", m.group(2), line, col))
        elif m.group(3):
            toks.append(Tok("name", m.group(3), line, col))
        elif m.group(4):
            toks.append(Tok("op", m.group(4), line, col))
        pos = m.end()
        if pos >= len(text):
            break
    toks.append(Tok("eof", "", line, 1))
    return toks


class _Parser:
    def __init__(self, text: str, require_inverse: bool):
        self.toks = tokenize(text)
        self.i = 0
        self.require_inverse = require_inverse
        self.param: str | None = None
        self.param_min = 0
        self.funcs: dict[str, str] = {}
        self.assume_nonzero = False

    # -- token helpers --
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def err(self, msg: str, tok: Tok | None = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def next(self) -> Tok:
        t = self.tok
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "name")

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.err(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def name(self) -> str:
        if self.tok.kind != "name" or self.tok.text in KEYWORDS:
            self.err(f"expected a name, found {self.tok.text or 'end of input'!r}")
        return self.next().text

    def integer(self) -> int:
        neg = False
        if self.at("-"):
            self.next()
            neg = True
        if self.tok.kind != "int":
            self.err("expected an integer")
        v = int(self.next().text)
        return -v if neg else v

    # -- program --
    def program(self) -> EquationSystem:
        if not self.at("param"):
            raise ParseError("program must start with a 'param' declaration", 1, 1)
        variables: list[Variable] = []
        equations: list[Equation] = []
        while self.tok.kind != "eof":
            t = self.tok
            if self.at("param"):
                self.next()
                if self.param is not None:
                    self.err("only a single size parameter is supported", t)
                self.param = self.name()
                self.expect(">=")
                self.param_min = self.integer()
                self.expect(";")
            elif self.at("func"):
                self.next()
                fname = self.name()
                self.expect("=")
                lib = self.tok
                impl = self.name()
                if impl not in FUNC_LIBRARY:
                    self.err(f"unknown function {impl!r}; choose from {', '.join(FUNC_LIBRARY)}", lib)
                self.funcs[fname] = impl
                self.expect(";")
            elif self.at("option"):
                self.next()
                opt = self.tok
                o = self.name()
                if o != "assume_nonzero":
                    self.err(f"unknown option {o!r}", opt)
                self.assume_nonzero = True
                self.expect(";")
            elif t.kind == "name" and t.text in ROLES:
                self.next()
                vname = self.name()
                if any(v.name == vname for v in variables):
                    self.err(f"variable {vname} declared twice", t)
                self.expect(":")
                names, dom = self.set_literal()
                self.expect(";")
                variables.append(Variable(vname, ROLES[t.text], names, dom))
            elif t.kind == "name":
                equations.append(self.equation(variables))
            else:
                self.err(f"unexpected {t.text!r}")
        return EquationSystem(self.param, self.param_min, tuple(variables), tuple(equations),
                              tuple(sorted(self.funcs.items())), self.assume_nonzero)

    def names_list(self, closer: str) -> tuple[str, ...]:
        out: list[str] = []
        if self.at(closer):
            return ()
        out.append(self.name())
        while self.at(","):
            self.next()
            out.append(self.name())
        if len(set(out)) != len(out) or self.param in out:
            self.err("index names must be distinct and differ from the parameter")
        return tuple(out)

    def set_literal(self) -> tuple[tuple[str, ...], Polyhedron]:
        self.expect("{")
        names = self.names_list(":") if not self.at("}") else ()
        cons: list[Constraint] = []
        if self.at(":"):
            self.next()
            cons = self.constraints(names, "}")
        self.expect("}")
        return names, geo.canonicalize(cons, len(names), 1, self.param_min)

    def constraints(self, names, closer: str) -> list[Constraint]:
        if self.at("true"):
            self.next()
            return []
        out = self.chain(names)
        while self.at("and"):
            self.next()
            out += self.chain(names)
        if not self.at(closer):
            self.err(f"expected 'and' or {closer!r}")
        return out

    def chain(self, names) -> list[Constraint]:
        start = self.tok
        terms = [self.affine(names)]
        rels = []
        while self.tok.text in ("<=", ">=", "<", ">", "=", "=="):
            rels.append(self.next().text)
            terms.append(self.affine(names))
        if not rels:
            self.err("expected a comparison", start)
        out = []
        for (a, b), r in zip(zip(terms, terms[1:]), rels):
            diff = b + a.scale(-1)  # b - a
            if r == "<=":
                out.append(Constraint.make(diff.coeffs, diff.const))
            elif r == "<":
                out.append(Constraint.make(diff.coeffs, diff.const - 1))
            elif r == ">=":
                out.append(Constraint.make(diff.scale(-1).coeffs, -diff.const))
            elif r == ">":
                out.append(Constraint.make(diff.scale(-1).coeffs, -diff.const - 1))
            else:
                out.append(Constraint.make(diff.coeffs, diff.const, eq=True))
        return out

    def affine(self, names) -> Aff:
        t = self.tok
        tree = self.sum()
        aff = _to_aff(tree, names, self.param)
        if aff is None:
            self.err("expected an affine expression", t)
        return aff

    # -- equations --
    def equation(self, variables) -> Equation:
        t = self.tok
        target = self.name()
        var = next((v for v in variables if v.name == target), None)
        if var is None:
            self.err(f"equation for undeclared variable {target}", t)
        self.expect("[")
        names = self.names_list("]")
        self.expect("]")
        if len(names) != var.dims:
            self.err(f"{target} has {var.dims} indices", t)
        self.expect("=")
        branches: list[Branch] = []
        if self.at("case"):
            self.next()
            self.expect("{")
            while not self.at("}"):
                guard = self.constraints(names, ":")
                self.expect(":")
                e = self.expr(names)
                self.expect(";")
                branches.append(Branch(geo.canonicalize(guard, len(names), 1, self.param_min), e))
            self.expect("}")
            if not branches:
                self.err("empty case", t)
        else:
            branches.append(Branch(geo.canonicalize([], len(names), 1, self.param_min), self.expr(names)))
        self.expect(";")
        return Equation(target, names, tuple(branches))

    def expr(self, names) -> Expr:
        t = self.tok
        tree = self.sum()
        return self.to_expr(tree, names, t)

    # generic expression trees: tuples tagged by kind
    def sum(self):
        node = self.product()
        while self.at("+") or self.at("-"):
            op = self.next().text
            node = ("bin", op, node, self.product())
        return node

    def product(self):
        node = self.unary()
        while self.at("*"):
            self.next()
            node = ("bin", "*", node, self.unary())
        return node

    def unary(self):
        if self.at("-"):
            self.next()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        t = self.tok
        if t.kind == "int":
            self.next()
            return ("num", int(t.text))
        if self.at("inf"):
            self.next()
            return ("num", math.inf)
        if self.at("("):
            self.next()
            node = self.sum()
            self.expect(")")
            return node
        if self.at("reduce"):
            return self.reduce()
        if t.kind == "name" and t.text not in KEYWORDS:
            self.next()
            if self.at("["):
                self.next()
                subs = []
                if not self.at("]"):
                    subs.append(self.sum())
                    while self.at(","):
                        self.next()
                        subs.append(self.sum())
                self.expect("]")
                return ("read", t.text, subs, t)
            if self.at("("):
                self.next()
                args = [self.sum()]
                while self.at(","):
                    self.next()
                    args.append(self.sum())
                self.expect(")")
                return ("call", t.text, args, t)
            return ("name", t.text, t)
        self.err(f"unexpected {t.text or 'end of input'!r}")

    def reduce(self):
        t = self.expect("reduce")
        self.expect("(")
        opt = self.tok
        op = self.name() if self.tok.text not in OPERATORS else self.next().text
        if op not in OPERATORS:
            self.err(f"unknown reduction operator {op!r}", opt)
        if self.require_inverse and not operator(op, self.assume_nonzero).has_inverse:
            self.err(f"operator {op} has no inverse (--require-inverse)", opt)
        self.expect(",")
        self.expect("(")
        names = self.names_list("->")
        self.expect("->")
        outs = []
        if not self.at(")"):
            outs.append(self.affine(names))
            while self.at(","):
                self.next()
                outs.append(self.affine(names))
        self.expect(")")
        self.expect(",")
        dt = self.tok
        dnames, dom = self.set_literal()
        if dnames != names:
            self.err("reduce domain indices must repeat the map's indices", dt)
        self.expect(",")
        body = self.expr(names)
        self.expect(")")
        proj = AffineMap(tuple(outs), len(names), 1)
        return ("reduce", Reduce(op, names, proj, dom, body), t)

    def to_expr(self, tree, names, tok) -> Expr:
        aff = _to_aff(tree, names, self.param)
        if aff is not None:
            return Num(aff.const) if aff.is_constant() else Idx(aff)
        kind = tree[0]
        if kind == "num":
            return Num(tree[1])
        if kind == "neg":
            inner = self.to_expr(tree[1], names, tok)
            if isinstance(inner, Num):
                return Num(-inner.value)
            return Bin("-", Num(0), inner)
        if kind == "bin":
            return Bin(tree[1], self.to_expr(tree[2], names, tok), self.to_expr(tree[3], names, tok))
        if kind == "read":
            subs = [_to_aff(s, names, self.param) for s in tree[2]]
            if any(s is None for s in subs):
                self.err("array subscripts must be affine", tree[3])
            return Read(tree[1], AffineMap(tuple(subs), len(names), 1))
        if kind == "call":
            fname, args = tree[1], tree[2]
            if fname in ("max", "min", "div"):
                if len(args) != 2:
                    self.err(f"{fname} takes two arguments", tree[3])
                return Bin(fname, self.to_expr(args[0], names, tok), self.to_expr(args[1], names, tok))
            if len(args) != 1:
                self.err(f"function {fname} takes one argument", tree[3])
            return Call(fname, self.to_expr(args[0], names, tok))
        if kind == "reduce":
            return tree[1]
        if kind == "name":
            self.err(f"unknown name {tree[1]!r}", tree[2])
        self.err("malformed expression", tok)


def _to_aff(tree, names, param) -> Aff | None:
    n = len(names) + 1
    kind = tree[0]
    if kind == "num":
        return None if isinstance(tree[1], float) else Aff.constant(tree[1], n)
    if kind == "name":
        if tree[1] in names:
            return Aff.var(names.index(tree[1]), n)
        if tree[1] == param:
            return Aff.var(n - 1, n)
        return None
    if kind == "neg":
        a = _to_aff(tree[1], names, param)
        return None if a is None else a.scale(-1)
    if kind == "bin":
        a, b = _to_aff(tree[2], names, param), _to_aff(tree[3], names, param)
        if a is None or b is None:
            return None
        if tree[1] == "+":
            return a + b
        if tree[1] == "-":
            return a + b.scale(-1)
        if tree[1] == "*":
            if a.is_constant():
                return b.scale(a.const)
            if b.is_constant():
                return a.scale(b.const)
        return None
    return None


def parse(text: str, require_inverse: bool = False, check: bool = True) -> EquationSystem:
    """Parse and (by default) validate a program."""
    sys = _Parser(text, require_inverse).program()
    if check:
        try:
            validate(sys)
        except ValidationError:
            raise
    return sys


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------


def fmt_aff(a: Aff, names, param: str) -> str:
    labels = list(names) + [param]
    parts: list[tuple[int, str]] = []
    for c, lab in zip(a.coeffs, labels):
        if c:
            parts.append((c, lab if abs(c) == 1 else f"{abs(c)}*{lab}"))
    if a.const or not parts:
        parts.append((a.const, str(abs(a.const))))
    out = ""
    for k, (c, s) in enumerate(parts):
        if k == 0:
            out = ("-" if c < 0 else "") + s
        else:
            out += (" - " if c < 0 else " + ") + s
    return out


def fmt_constraint(c: Constraint, names, param) -> str:
    a = Aff(c.coeffs, c.const)
    return f"{fmt_aff(a, names, param)} {'=' if c.eq else '>='} 0"


def fmt_constraints(p: Polyhedron, names, param) -> str:
    if p.empty:
        return "1 = 0"
    if not p.constraints:
        return "true"
    return " and ".join(fmt_constraint(c, names, param) for c in p.constraints)


def fmt_set(names, p: Polyhedron, param) -> str:
    if not p.constraints and not p.empty:
        return "{ " + ", ".join(names) + " }" if names else "{ }"
    head = ", ".join(names)
    return "{ " + head + " : " + fmt_constraints(p, names, param) + " }"


def _prec(e: Expr) -> int:
    if isinstance(e, Bin) and e.op in ("+", "-"):
        return 1
    if isinstance(e, Bin) and e.op == "*":
        return 2
    if isinstance(e, Idx) and sum(1 for c in e.aff.coeffs if c) + (e.aff.const != 0) > 1:
        return 1
    if isinstance(e, Idx) and any(abs(c) > 1 or c < 0 for c in e.aff.coeffs):
        return 1
    if isinstance(e, Num) and e.value < 0:
        return 1
    return 3


def fmt_expr(e: Expr, names, param) -> str:
    if isinstance(e, Num):
        if isinstance(e.value, float):
            return "inf" if e.value > 0 else "-inf"
        return str(e.value)
    if isinstance(e, Idx):
        return fmt_aff(e.aff, names, param)
    if isinstance(e, Read):
        return f"{e.var}[{', '.join(fmt_aff(r, names, param) for r in e.access.rows)}]"
    if isinstance(e, Call):
        return f"{e.func}({fmt_expr(e.arg, names, param)})"
    if isinstance(e, Bin):
        if e.op in ("max", "min", "div"):
            return f"{e.op}({fmt_expr(e.left, names, param)}, {fmt_expr(e.right, names, param)})"
        p = 1 if e.op in ("+", "-") else 2
        left = fmt_expr(e.left, names, param)
        if _prec(e.left) < p:
            left = f"({left})"
        right = fmt_expr(e.right, names, param)
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    if isinstance(e, Reduce):
        outs = ", ".join(fmt_aff(r, e.names, param) for r in e.proj.rows)
        head = ", ".join(e.names)
        return (f"reduce({e.op}, ({head} -> {outs}), {fmt_set(e.names, e.domain, param)}, "
                f"{fmt_expr(e.body, e.names, param)})")
    raise TypeError(e)


def emit(sys: EquationSystem) -> str:
    lines = [f"param {sys.param} >= {sys.param_min};"]
    for f, impl in sys.funcs:
        lines.append(f"func {f} = {impl};")
    if sys.assume_nonzero:
        lines.append("option assume_nonzero;")
    for v in sys.variables:
        lines.append(f"{v.role} {v.name} : {fmt_set(v.names, v.domain, sys.param)};")
    for eq in sys.equations:
        lhs = f"{eq.target}[{', '.join(eq.names)}]"
        if len(eq.branches) == 1 and not eq.branches[0].guard.constraints:
            lines.append(f"{lhs} = {fmt_expr(eq.branches[0].expr, eq.names, sys.param)};")
            continue
        lines.append(f"{lhs} = case {{")
        for br in eq.branches:
            lines.append(f"  {fmt_constraints(br.guard, eq.names, sys.param)} : "
                         f"{fmt_expr(br.expr, eq.names, sys.param)};")
        lines.append("};")
    return "\n".join(lines) + "\n"
