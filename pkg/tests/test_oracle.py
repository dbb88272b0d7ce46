import pytest

from polysimp.dsl import parse
from polysimp.oracle import CycleError, EvaluationError, count_ops, equivalent, evaluate, fit_degree

from conftest import load


def test_eq1_values_on_identity_input():
    s = load("eq1_plus.eqs")
    got = evaluate(s, 3, inputs={"Q": {(j,): j for j in range(6)}})
    assert got.arrays["P"] == {(0,): 0, (1,): 1, (2,): 5, (3,): 12}


def test_eq2_values():
    s = load("eq2.eqs")
    assert evaluate(s, 3).arrays["X"] == {(0,): 1, (1,): 2, (2,): 4, (3,): 8}
    assert set(evaluate(s, 3, funcs={"f": "double"}).arrays["X"].values()) == {0}


def test_hand_simplified_eq2_is_equivalent():
    assert equivalent(load("eq2.eqs"), load("eq4.eqs"), range(1, 9)).equal


def test_mismatch_is_reported():
    plus, mx = load("eq1_plus.eqs"), load("eq1_max.eqs")
    v = equivalent(plus, mx, range(1, 5))
    assert not v.equal
    assert v.describe().startswith("MISMATCH")


def test_cycle_detection():
    s = parse("param N >= 1;\noutput X : { i : 0 <= i <= N };\n"
              "X[i] = case { i = 0 : X[1]; i >= 1 : X[i - 1]; };\n")
    with pytest.raises(CycleError) as exc:
        evaluate(s, 2)
    names = [v for v, _ in exc.value.cycle]
    assert names[0] == names[-1] == "X"


def test_below_param_min():
    with pytest.raises(EvaluationError):
        evaluate(load("eq1_plus.eqs"), 0)


def test_count_ops_and_slope():
    assert count_ops(load("eq1_plus.eqs"), 4) == 11
    assert count_ops(load("eq2.eqs"), 4) == 11
    assert 1.8 <= fit_degree(load("eq1_plus.eqs")) <= 2.2
    assert 0.8 <= fit_degree(load("eq4.eqs")) <= 1.2


def test_evaluation_order_is_irrelevant():
    s = load("eq2.eqs")
    assert evaluate(s, 5, order="reverse").arrays == evaluate(s, 5).arrays
