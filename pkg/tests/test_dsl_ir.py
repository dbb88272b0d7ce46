import pytest

from polysimp.dsl import ParseError, emit, parse
from polysimp.ir import Reduce, ValidationError, walk
from polysimp.simplify import simplify_system

from conftest import CORPUS

CORPUS_FILES = sorted(p.name for p in CORPUS.glob("*.eqs"))


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_corpus_parses_and_round_trips(name):
    s = parse((CORPUS / name).read_text())
    text = emit(s)
    assert emit(parse(text)) == text
    assert parse(text) == s


@pytest.mark.parametrize("name", CORPUS_FILES)
def test_simplified_output_round_trips(name):
    out = simplify_system(parse((CORPUS / name).read_text())).system
    text = emit(out)
    assert emit(parse(text)) == text


def test_eq1_structure():
    s = parse((CORPUS / "eq1_plus.eqs").read_text())
    assert s.param == "N" and s.param_min == 1
    assert [v.role for v in s.variables] == ["input", "output"]
    (eq,) = s.equations
    assert len(eq.branches) == 2
    (red,) = [e for e in walk(eq.branches[1].expr) if isinstance(e, Reduce)]
    assert red.op == "plus" and red.names == ("i", "j")


@pytest.mark.parametrize("text, line, col, fragment", [
    ("output X : { i : 0 <= i <= N };\nX[i] = i;\n", 1, 1, "param"),
    ("param N >= 1;\noutput X : { i : 0 <= i <= N };\nX[i] = i $ 1;\n", 3, 10, "unexpected character"),
    ("param N >= 1;\noutput X : { i : 0 <= i <= N };\nX[i] = X[i*i];\n", 3, 8, "affine"),
])
def test_parse_errors_carry_positions(text, line, col, fragment):
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert (exc.value.line, exc.value.col) == (line, col)
    assert fragment in str(exc.value)


def test_require_inverse_rejects_max():
    text = (CORPUS / "eq1_max.eqs").read_text()
    with pytest.raises(ParseError) as exc:
        parse(text, require_inverse=True)
    assert exc.value.line == 7
    assert "no inverse" in str(exc.value)
    parse((CORPUS / "eq1_plus.eqs").read_text(), require_inverse=True)


@pytest.mark.parametrize("body, fragment", [
    ("output X : { i : 0 <= i <= N };\nX[i] = Y[i];\n", "undefined variable Y"),
    ("output X : { i : 0 <= i <= N };\nX[i] = X[i+1];\n", "outside its domain"),
    ("output X : { i : 0 <= i <= N };\noutput Y : { i : 0 <= i <= N };\nX[i] = i;\n", "no defining equation"),
    ("output X : { i : 0 <= i <= N };\nX[i] = i;\nX[i] = 2;\n", "defined twice"),
])
def test_validation_errors(body, fragment):
    with pytest.raises(ValidationError, match=fragment):
        parse("param N >= 1;\n" + body)
