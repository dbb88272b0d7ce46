import random

import pytest

from polysimp import schedule as sch
from polysimp.dsl import parse
from polysimp.simplify import lift

from conftest import load
from synthetic import box, uniform_system

TWO_WAY = ("param N >= 1;\noutput X : { i : 0 <= i <= N };\n"
           "X[i] = case { i = 0 : X[1]; i >= 1 : X[i - 1]; };\n")


def test_eq2_cone_on_x():
    ctx = sch.build_context(load("eq2.eqs"))
    assert ctx.layout.names == ("X",)
    cone = sch.project_on_variable(ctx, "X")
    # rows (a, b, c) over (i, N, 1): only a >= 0 is forced
    assert cone.contains((1, -4, 7)) and not cone.contains((-1, 0, 0))
    assert sch.is_compatible(cone, (1,))
    assert not sch.is_compatible(cone, (-1,))
    assert not sch.is_compatible(cone, (0,))


def test_legality_disjuncts_of_the_lifted_reduction():
    lifted, red = lift(load("eq2.eqs"), "X", 2)
    ctx = sch.build_context(lifted)
    cone = sch.project_on_variable(ctx, red.target)
    assert sch.legality_constraints(cone, red.proj.matrix) == [(1, 0)]


def test_uniform_dependence_strict_satisfaction():
    d = sch.uniform_dependence("X", 2, (1, 0), box(2))
    layout = sch.Layout(("X",), (2,))
    assert sch.strictly_satisfies((1, 0, 0, 0), d, layout)
    assert not sch.strictly_satisfies((0, 1, 0, 0), d, layout)
    assert not sch.strictly_satisfies((0, 0, 0, 0), d, layout)


def test_compatible_descends_a_level():
    # two deps (1,0) and (0,1): r = (1,-1) is fine at level 0; (-1,1) also
    s = parse("param N >= 1;\ninput A : { i, j : 0 <= i <= N and 0 <= j <= N };\n"
              "output X : { i, j : 0 <= i <= N and 0 <= j <= N };\n"
              "X[i,j] = case { i >= 1 and j >= 1 : X[i-1,j] + X[i,j-1]; i = 0 : A[i,j]; "
              "i >= 1 and j = 0 : A[i,j]; };\n")
    ctx = sch.build_context(s)
    assert sch.compatible(ctx, "X", (1, -1)).ok
    assert sch.compatible(ctx, "X", (-1, 1)).ok
    assert not sch.compatible(ctx, "X", (-1, -1)).ok
    assert not sch.compatible(ctx, "X", (-1, 0)).ok


def test_two_way_dependence_has_no_schedule():
    s = parse(TWO_WAY)
    ctx = sch.build_context(s)
    cone = sch.project_on_variable(ctx, "X")
    assert not sch.is_compatible(cone, (1,)) and not sch.is_compatible(cone, (-1,))
    with pytest.raises(sch.ScheduleError, match="instance-level cycle"):
        sch.schedule_witness(s)


def test_witness_for_the_corpus():
    for name in ("eq1_plus.eqs", "eq2.eqs", "eq4.eqs", "window3.eqs"):
        s = load(name)
        w = sch.schedule_witness(s)
        assert sch.verify_schedule(s, w, 5)


def test_witness_for_random_uniform_systems():
    rng = random.Random(3)
    for _ in range(6):
        s = uniform_system(rng)
        w = sch.schedule_witness(s)
        assert sch.verify_schedule(s, w, 4)


def test_interior_row_strictly_satisfies_what_it_can():
    ctx = sch.build_context(load("eq4.eqs"))
    theta = sch.interior_row(ctx.cone)
    assert ctx.cone.contains(theta)
    assert any(sch.strictly_satisfies(theta, d, ctx.layout) for d in ctx.deps)
