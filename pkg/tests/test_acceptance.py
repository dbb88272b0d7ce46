"""Acceptance criteria A1-A9, one test each, each printing a PASS/FAIL line."""

from __future__ import annotations

import itertools
import json
import math
import os
import random
import subprocess
import sys
import time
from fractions import Fraction

from polysimp import geometry as geo
from polysimp import schedule as sch
from polysimp.cli import main as cli_main
from polysimp.dsl import emit, parse
from polysimp.ir import Read, Reduce, intersect_spaces, reuse_space, walk
from polysimp.linalg import dot
from polysimp.oracle import FUNCS, equivalent, fit_degree
from polysimp.simplify import Legality, Search, enumerate_sign_classes, lift, simplify_system

from conftest import CORPUS, load
from synthetic import random_polyhedron, random_reduction, uniform_system

BUDGET_S = 10.0


def _run_cli(argv, capsys):
    code = cli_main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_a1_prefix_window_sum(tmp_path, capsys, criterion):
    with criterion("A1", "eq1_plus: degree 2 -> 1, equivalent over N=1..12, fitted slope in [0.8, 1.2]"):
        t0 = time.perf_counter()
        out, rep = tmp_path / "out.eqs", tmp_path / "rep.json"
        code, _, err = _run_cli(["simplify", CORPUS / "eq1_plus.eqs", "--out", out, "--report", rep], capsys)
        assert code == 0, err
        report = json.loads(rep.read_text())
        eq = report["equations"][0]
        assert (eq["original_degree"], eq["final_degree"]) == (2, 1)
        code, msg, err = _run_cli(["check", CORPUS / "eq1_plus.eqs", out, "--n", "1..12", "--trials", "3"], capsys)
        assert code == 0, msg + err
        slope = fit_degree(parse(out.read_text()))
        assert 0.8 <= slope <= 1.2, slope
        assert time.perf_counter() - t0 <= BUDGET_S


def test_a2_max_has_no_inverse(tmp_path, capsys, criterion):
    with criterion("A2", "eq1_max: untransformed, final degree 2 against bound 1, output equals input"):
        t0 = time.perf_counter()
        out, rep = tmp_path / "out.eqs", tmp_path / "rep.json"
        code, _, err = _run_cli(["simplify", CORPUS / "eq1_max.eqs", "--out", out, "--report", rep], capsys)
        assert code == 0, err
        eq = json.loads(rep.read_text())["equations"][0]
        assert eq["final_degree"] == 2
        assert eq["bound"] == 1
        assert eq["bound_met"] is False
        assert all(not r["transformed"] for r in eq["reductions"])
        assert out.read_text() == emit(load("eq1_max.eqs"))
        assert time.perf_counter() - t0 <= BUDGET_S


def _self_shifts(sys, var):
    """Offsets ``d`` of every pointwise self read ``var[i - d]``."""
    shifts = []
    for br in sys.equation(var).branches:
        for e in walk(br.expr):
            if isinstance(e, Read) and e.var == var:
                shifts.append(tuple(-r.const for r in e.access.rows))
    return shifts


def test_a3_dependent_reduction(tmp_path, criterion):
    with criterion("A3", "eq2: single legal reuse direction, no reduction left, X_b2 reads itself at i-1, "
                         "equivalent for every f"):
        t0 = time.perf_counter()
        src = load("eq2.eqs")
        lifted, red = lift(src, "X", 2)
        share = intersect_spaces(geo.lineality(red.domain), reuse_space(red.body, red.domain.n_idx))
        assert len(enumerate_sign_classes(red.domain, share, proj=red.proj)) == 2
        legal = Search(Legality(lifted)).candidates(red, share, [])
        assert [red.proj.linear(r) for r in legal] == [(1,)]

        plan = simplify_system(src)
        out = plan.system
        assert not any(isinstance(e, Reduce) for eq in out.equations for br in eq.branches for e in walk(br.expr))
        assert _self_shifts(out, red.target) == [(1,)]
        text = emit(out)
        assert parse(text) is not None
        for f in sorted(FUNCS):
            verdict = equivalent(src, out, range(1, 13), trials=3, funcs={"f": f})
            assert verdict.equal, (f, verdict.describe())
        assert time.perf_counter() - t0 <= BUDGET_S


def test_a4_illegal_direction(tmp_path, capsys, criterion):
    with criterion("A4", "eq2 with forced rho=(-1,0): rejected (exit 2); without the check, the witness "
                         "reports an instance-level cycle (exit 3)"):
        t0 = time.perf_counter()
        code, _, err = _run_cli(["simplify", CORPUS / "eq2.eqs", "--force-rho", "X=(-1,0)",
                                 "--out", tmp_path / "a.eqs"], capsys)
        assert code == 2, err
        assert "not schedule compatible" in err
        code, _, err = _run_cli(["simplify", CORPUS / "eq2.eqs", "--force-rho", "X=(-1,0)", "--no-schedule-check",
                                 "--out", tmp_path / "b.eqs"], capsys)
        assert code == 3, err
        assert "instance-level cycle" in err
        assert time.perf_counter() - t0 <= BUDGET_S


def _sample_members(cone: geo.Cone, rng: random.Random, k: int):
    lin, rays = geo.double_description(cone.constraints, cone.dims)
    out = []
    for _ in range(k):
        x = [0] * cone.dims
        for r in rays:
            c = rng.randint(0, 3)
            x = [a + c * b for a, b in zip(x, r)]
        for v in lin:
            c = rng.randint(-2, 2)
            x = [a + c * b for a, b in zip(x, v)]
        out.append(tuple(x))
    return out


def _weakly_respects(theta, ctx, N=4):
    for d in ctx.deps:
        rc, rp = ctx.layout.row_of(theta, d.consumer), ctx.layout.row_of(theta, d.producer)
        for x in geo.integer_points(d.relation, N):
            y, w, _ = d.split(x + (N,))
            if dot(rc, tuple(y) + (N, 1)) < dot(rp, tuple(w) + (N, 1)):
                return False
    return True


def test_a5_causality_cone(criterion):
    with criterion("A5", "cones of eq2 and 5 uniform systems: closed under scaling, zero row blunt, "
                         "generators and samples inside"):
        t0 = time.perf_counter()
        rng = random.Random(5)
        systems = [load("eq2.eqs")] + [uniform_system(rng) for _ in range(5)]
        for s in systems:
            ctx = sch.build_context(s)
            cone = ctx.cone
            zero = (0,) * cone.dims
            assert cone.contains(zero)
            assert not any(sch.strictly_satisfies(zero, d, ctx.layout) for d in ctx.deps)
            for g in ctx.generators:
                assert cone.contains(g)
            for theta in _sample_members(cone, rng, 10):
                assert cone.contains(theta)
                assert _weakly_respects(theta, ctx)
                for a in (2, 3, Fraction(1, 2)):
                    assert cone.contains(tuple(a * x for x in theta))
        assert time.perf_counter() - t0 <= BUDGET_S


def _legal_rows(d):
    return [r for r in itertools.product(range(-3, 4), repeat=d)]


def _lex_positive(v):
    for x in v:
        if x:
            return x > 0
    return False


def _brute_compatible(vectors, r, rows):
    """Some d-row schedule with coefficients in [-3, 3] is legal and puts ``r`` lexicographically forward."""
    d = len(r)
    for theta in itertools.product(rows, repeat=d):
        if not _lex_positive([dot(t, r) for t in theta]):
            continue
        if all(_lex_positive([dot(t, v) for t in theta]) for v in vectors):
            return True
    return False


def _schedulable(vectors, rows):
    d = len(vectors[0])
    return any(all(_lex_positive([dot(t, v) for t in theta]) for v in vectors)
               for theta in itertools.product(rows, repeat=d))


def test_a6_compatibility_matches_brute_force(criterion):
    with criterion("A6", "single-array uniform systems: is_compatible and level descent agree with "
                         "enumerated schedules for every r in {-2..2}^d"):
        t0 = time.perf_counter()
        rng = random.Random(6)
        checked = 0
        systems = 0
        while systems < 6:
            d = 1 + systems % 2
            s = uniform_system(rng, n_vars=1, dims=d, self_reads=rng.choice([1, 2, 3]))
            ctx = sch.build_context(s)
            vectors = sorted({dep.uniform_vector for dep in ctx.deps})
            rows = _legal_rows(d)
            if not _schedulable(vectors, rows):
                continue
            systems += 1
            cone_x = sch.project_on_variable(ctx, "X")
            for r in itertools.product(range(-2, 3), repeat=d):
                if not any(r):
                    continue
                expect = _brute_compatible(vectors, r, rows)
                assert sch.is_compatible(cone_x, r) == expect, (vectors, r)
                assert sch.compatible(ctx, "X", r).ok == expect, (vectors, r)
                checked += 1
        assert checked > 0
        assert time.perf_counter() - t0 <= BUDGET_S


def _tight(c, p, N):
    return c.value(tuple(p) + (N,)) == 0


def _growth_exponent(c6: int, c12: int) -> int:
    """Smallest d with c12 <= 2^d * c6: doubling N multiplies a d-dimensional count by at most 2^d."""
    return max(0, math.ceil(math.log2(c12 / c6) - 1e-12))


def test_a7_face_lattice(criterion):
    with criterion("A7", "20 random polyhedra: every face's points at N=6 are exactly the points saturating "
                         "its constraints; point growth from N=6 to 12 matches the root dimension"):
        t0 = time.perf_counter()
        rng = random.Random(7)
        for _ in range(20):
            p = random_polyhedron(rng)
            lattice = geo.face_lattice(p)
            ineqs = p.inequalities
            pts = geo.integer_points(p, 6)
            for key, face in lattice.faces.items():
                expect = {q for q in pts if all(_tight(ineqs[k], q, 6) for k in key)}
                assert set(geo.integer_points(face.polyhedron, 6)) == expect, (p, sorted(key))
            c6, c12 = len(pts), len(geo.integer_points(p, 12))
            assert _growth_exponent(c6, c12) == geo.dimension(p), (p, c6, c12)
        assert time.perf_counter() - t0 <= BUDGET_S


def test_a8_random_reductions_reach_bound(criterion):
    with criterion("A8", "10 random reductions: final degree equals the bound, equivalent over N=1..8"):
        t0 = time.perf_counter()
        rng = random.Random(8)
        for _ in range(10):
            s = random_reduction(rng)
            plan = simplify_system(s)
            (rp,) = plan.reductions
            assert rp.node.degree == rp.node.bound, emit(s)
            verdict = equivalent(s, plan.system, range(1, 9), trials=2)
            assert verdict.equal, (emit(s), verdict.describe())
        assert time.perf_counter() - t0 <= BUDGET_S


def _simplify_subprocess(src, out, rep, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    subprocess.run([sys.executable, "-m", "polysimp.cli", "simplify", str(src), "--out", str(out),
                    "--report", str(rep)], check=True, env=env, capture_output=True)


def test_a9_deterministic_output(tmp_path, criterion):
    with criterion("A9", "every corpus file: byte-identical .eqs and .json across two hash seeds"):
        t0 = time.perf_counter()
        files = sorted(CORPUS.glob("*.eqs"))
        assert files
        for src in files:
            outs = []
            for seed in (1, 2):
                o, r = tmp_path / f"{src.stem}.{seed}.eqs", tmp_path / f"{src.stem}.{seed}.json"
                _simplify_subprocess(src, o, r, seed)
                outs.append((o.read_bytes(), r.read_bytes()))
            assert outs[0] == outs[1], src.name
        assert time.perf_counter() - t0 <= BUDGET_S
