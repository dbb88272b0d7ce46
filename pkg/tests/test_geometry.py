import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polysimp import geometry as geo
from polysimp.geometry import Constraint, GeometryError

from synthetic import box


def triangle():
    """{ i, j : 0 <= j <= i <= N }"""
    cons = [Constraint.make([0, 1, 0]), Constraint.make([1, -1, 0]), Constraint.make([-1, 0, 1])]
    return geo.canonicalize(cons, 2, 1, 1)


def test_constraint_normalization():
    c = Constraint.make([2, 4, 0], 3)
    assert (c.coeffs, c.const) == ((1, 2, 0), 1)  # floor(3/2): same integer points
    e = Constraint.make([-2, 4], 6, eq=True)
    assert (e.coeffs, e.const, e.eq) == ((1, -2), -3, True)
    assert Constraint.make([2, 4], 1, eq=True).is_contradiction()


def test_triangle_constraints_and_faces():
    t = triangle()
    assert len(t.inequalities) == 3
    assert not t.equalities
    lat = geo.face_lattice(t)
    assert len(lat.faces) == 7
    dims = sorted(len(v) for v in lat.by_dimension().values())
    assert dims == [1, 3, 3]
    assert geo.dimension(t) == 2
    assert geo.lineality(t).dim == 2


def test_window_domain_has_three_facets():
    from conftest import load
    from polysimp.ir import Reduce, effective_domain, walk

    s = load("eq1_plus.eqs")
    br = s.equations[0].branches[1]
    (red,) = [e for e in walk(br.expr) if isinstance(e, Reduce)]
    d = effective_domain(red, s.var("P").domain.intersect(br.guard))
    assert len(d.inequalities) == 3  # i >= 1 follows from i <= j <= 2i - 1
    lat = geo.face_lattice(d)
    assert len(lat.faces) == 7
    pts = geo.integer_points(d, 6)
    for key, f in lat.faces.items():
        expect = [q for q in pts if all(d.inequalities[k].value(q + (6,)) == 0 for k in key)]
        assert geo.integer_points(f.polyhedron, 6) == expect


def test_lineality_of_a_face_shrinks():
    t = triangle()
    lat = geo.face_lattice(t)
    for f in lat.faces.values():
        assert geo.lineality(f.polyhedron).dim == f.dim


def test_empty_and_contains():
    p = box(2)
    assert p.contains((0, 3, 3)) and not p.contains((4, 0, 3))
    q = p.add(Constraint.make([1, 1, -2], -1))  # i + j >= 2N + 1
    assert q.empty
    assert geo.integer_points(q, 3) == []


def test_integer_points_of_box():
    assert len(geo.integer_points(box(2), 3)) == 16
    assert len(geo.integer_points(box(3), 2)) == 27


def test_double_description_of_quadrant():
    lin, rays = geo.double_description([Constraint.make([1, 0]), Constraint.make([0, 1])], 2)
    assert lin == []
    assert sorted(rays) == [(0, 1), (1, 0)]
    lin, rays = geo.double_description([Constraint.make([1, 0])], 2)
    assert len(lin) == 1 and rays == [(1, 0)]


def test_cone_generators_and_membership():
    cone = geo.Cone.make([Constraint.make([1, -1, 0]), Constraint.make([0, 1, 0])], 3).with_generators()
    for g in cone.generators:
        assert cone.contains(g)
    assert cone.contains((2, 1, -5))
    assert not cone.contains((0, 1, 0))


def test_project_cone_eliminates_coordinates():
    # x >= y >= z >= 0 seen on (x, z): x >= z >= 0
    cs = [Constraint.make([1, -1, 0]), Constraint.make([0, 1, -1]), Constraint.make([0, 0, 1])]
    proj = geo.project_cone(geo.Cone.make(cs, 3), [0, 2])
    assert proj.contains((3, 1)) and proj.contains((0, 0))
    assert not proj.contains((1, 2)) and not proj.contains((1, -1))


def test_translate_intersect_diff_triangle():
    t = triangle()
    tr = geo.translate_intersect_diff(t, (1, 1))
    # the shifted triangle loses the j = 0 edge and gains the i = N + 1 column
    shed_in = [set(geo.integer_points(p, 4)) for _, p in tr.shed_in]
    shed_out = [set(geo.integer_points(p, 4)) for _, p in tr.shed_out]
    pts = set(geo.integer_points(t, 4))
    moved = {(i + 1, j + 1) for i, j in pts}
    assert set().union(*shed_in) == pts - moved
    assert set().union(*shed_out) == moved - pts
    assert set(geo.integer_points(tr.overlap, 4)) == pts & moved


def test_translate_errors():
    t = triangle()
    with pytest.raises(GeometryError):
        geo.translate_intersect_diff(t, (0, 0))
    with pytest.raises(GeometryError):
        geo.translate_intersect_diff(t, (1,))
    edge = t.add(Constraint.make([0, 1, 0], 0, eq=True))
    with pytest.raises(GeometryError):
        geo.translate_intersect_diff(edge, (0, 1))


def test_is_subset():
    t = triangle()
    assert t.is_subset(box(2))
    assert not box(2).is_subset(t)


def test_witness_strict():
    cs = [Constraint.make([1, 0]), Constraint.make([-1, 0], 1)]
    assert geo.is_feasible(cs, 1)
    assert not geo.is_feasible(cs, 1, strict=[Constraint.make([-1, 0], 0), Constraint.make([1, 0])])


coef = st.integers(-3, 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coef, coef, coef, st.integers(-4, 4)), min_size=1, max_size=4))
def test_canonicalize_preserves_points(rows):
    raw = [Constraint.make([a, b, c], k) for a, b, c, k in rows]
    base = box(2, 0)
    p = base.add(*raw)
    for N in (0, 2, 3):
        expect = [(i, j) for i in range(N + 1) for j in range(N + 1)
                  if all(r.holds((i, j, N)) for r in raw)]
        assert geo.integer_points(p, N) == expect


def test_face_saturation_random():
    rng = random.Random(11)
    from synthetic import random_polyhedron

    for _ in range(5):
        p = random_polyhedron(rng)
        lat = geo.face_lattice(p)
        for key, f in lat.faces.items():
            for k in key:
                c = p.inequalities[k]
                assert all(c.value(q + (6,)) == 0 for q in geo.integer_points(f.polyhedron, 6))
