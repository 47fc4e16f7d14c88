import json

import pytest

from walker_soliton.cli import main

from conftest import FIXTURES

FIXTURE_FILES = sorted(FIXTURES.glob("*.json"))


@pytest.mark.parametrize("path", FIXTURE_FILES, ids=lambda p: p.stem)
def test_fixture_matches_expectations(path, capsys):
    assert main(["suite", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"]
    for c in report["checks"]:
        assert c["passed"] == (c["expect"] == "pass")


def test_output_is_byte_stable(capsys):
    path = str(FIXTURES / "quadratic_f2.json")
    main(["suite", path])
    first = capsys.readouterr().out
    main(["suite", path])
    assert capsys.readouterr().out == first


def _write(tmp_path, data):
    p = tmp_path / "s.json"
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(p)


def test_failing_check_exits_one(tmp_path, capsys):
    sc = {"name": "bad", "metric": {"f1": "x^2", "f2": "0", "f3": "0"}, "field": {"f": "0"},
          "soliton": {"lambda": 0.0, "beta1": 1.0}, "checks": ["trace_residual"]}
    assert main(["soliton", _write(tmp_path, sc)]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["checks"][0]["max_residual"] == pytest.approx(2.0)


@pytest.mark.parametrize("data, message", [
    ('{"metric": {"f1": "x"', "invalid JSON"),
    ({"metric": {"f1": "0", "f2": "0", "f3": "0"}, "colour": 1}, "colour"),
    ({"name": "k", "metric": {"f1": "K*x", "f2": "0", "f3": "0"}, "checks": ["ricci_closed"]}, "K"),
    ({"name": "p", "metric": {"f1": "x +", "f2": "0", "f3": "0"}}, "f1"),
])
def test_malformed_input_exits_two(tmp_path, capsys, data, message):
    assert main(["curvature", _write(tmp_path, data)]) == 2
    assert message in capsys.readouterr().err


def test_construct_writes_tables(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["construct", str(FIXTURES / "c_coefficient.json"), "--out", str(out), "--grid", "2"]) == 0
    exprs = json.loads((out / "expressions.json").read_text())
    assert "c" in exprs
    rows = (out / "samples.csv").read_text().splitlines()
    assert rows[0].startswith("x,y,u,v") and len(rows) == 1 + 16


def test_text_report(capsys):
    assert main(["curvature", str(FIXTURES / "flat.json"), "--text"]) == 0
    assert capsys.readouterr().out.rstrip().endswith("ALL OK")
