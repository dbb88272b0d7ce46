import json

import pytest

from polysimp.cli import EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main
from polysimp.dsl import parse

from conftest import CORPUS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_simplify_to_stdout(capsys):
    code, out, _ = run(capsys, "simplify", CORPUS / "prefix_sum.eqs")
    assert code == EXIT_OK
    assert "reduce" not in out
    parse(out)


def test_report_and_timing(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, _, _ = run(capsys, "simplify", CORPUS / "eq1_plus.eqs", "--out", tmp_path / "o.eqs", "--report", rep,
                     "--timing")
    assert code == EXIT_OK
    data = json.loads(rep.read_text())
    assert data["schema"] == 1 and data["wall_time_s"] >= 0
    assert set(data) == {"schema", "equations", "search_nodes", "schedule", "wall_time_s"}


def test_check_exit_codes(capsys):
    assert run(capsys, "check", CORPUS / "eq2.eqs", CORPUS / "eq4.eqs", "--n", "1..6")[0] == EXIT_OK
    code, out, _ = run(capsys, "check", CORPUS / "eq1_plus.eqs", CORPUS / "eq1_max.eqs")
    assert code == EXIT_MISMATCH
    assert out.startswith("MISMATCH")


def test_check_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("POLYSIMP_SEED", "99")
    assert run(capsys, "check", CORPUS / "eq2.eqs", CORPUS / "eq4.eqs", "--n", "2,3")[0] == EXIT_OK


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "simplify", tmp_path / "missing.eqs")[0] == EXIT_USAGE
    bad = tmp_path / "bad.eqs"
    bad.write_text("output X : { i : 0 <= i <= N };\n")
    code, _, err = run(capsys, "simplify", bad)
    assert code == EXIT_USAGE and "line 1" in err
    code, _, err = run(capsys, "simplify", CORPUS / "eq1_max.eqs", "--require-inverse")
    assert code == EXIT_USAGE and "no inverse" in err
    with pytest.raises(SystemExit) as exc:
        main(["check", str(CORPUS / "eq2.eqs"), str(CORPUS / "eq4.eqs"), "--func", "f=nope"])
    assert exc.value.code == EXIT_USAGE


def test_lattice_and_cone(capsys):
    code, out, _ = run(capsys, "lattice", CORPUS / "eq1_plus.eqs", "--var", "P")
    assert code == EXIT_OK
    assert out.count("dim=0") == 6 and out.count("dim=1") == 3
    code, out, _ = run(capsys, "cone", CORPUS / "eq2.eqs", "--var", "X")
    assert code == EXIT_OK
    assert "constraint: 1 0 0 >= 0" in out
    assert run(capsys, "cone", CORPUS / "eq1_plus.eqs", "--var", "Q")[0] == EXIT_USAGE
    assert run(capsys, "lattice", CORPUS / "eq1_plus.eqs", "--var", "Z")[0] == EXIT_USAGE


def test_assume_nonzero_enables_window_product(tmp_path, capsys):
    src = tmp_path / "prod.eqs"
    src.write_text((CORPUS / "eq1_plus.eqs").read_text().replace("plus", "times"))
    rep = tmp_path / "r.json"
    run(capsys, "simplify", src, "--out", tmp_path / "a.eqs", "--report", rep)
    plain = json.loads(rep.read_text())["equations"][0]["final_degree"]
    run(capsys, "simplify", src, "--assume-nonzero", "--out", tmp_path / "b.eqs", "--report", rep)
    nonzero = json.loads(rep.read_text())["equations"][0]["final_degree"]
    assert (plain, nonzero) == (2, 1)
    assert "div(" in (tmp_path / "b.eqs").read_text()
    assert run(capsys, "check", src, tmp_path / "b.eqs", "--n", "1..8")[0] == EXIT_OK
