import io
import json

import numpy as np
import pytest

from calderon.cli import main
from calderon.errors import ParameterError
from calderon.instances import InstanceShape, generate_instances, parse_weight
from calderon.weights import Constant, Exponential, Power


def test_instances_are_deterministic():
    a = generate_instances(7, 4, "d=1,J=4,K=2,nnz=10")
    b = generate_instances(7, 6, InstanceShape(1, 4, 2, nnz=10))
    for x, y in zip(a, b):
        assert x.entries() == y.entries()
    assert generate_instances(7, 0) == []
    assert a[0].entries() != a[1].entries()
    assert all(lam.nnz == 10 for lam in a)


def test_magnitude_range():
    lam = generate_instances(1, 1, InstanceShape(1, 5, 2, nnz=None))[0]
    vals = np.abs(np.concatenate([a.ravel() for a in lam.levels]))
    assert vals.min() >= 2.0**-8 and vals.max() <= 2.0**8


def test_dense_shape_fills_the_levels():
    shape = InstanceShape.parse("dense,levels=1..2,d=2,J=3,K=1")
    lam = generate_instances(0, 1, shape)[0]
    win = shape.window
    assert lam.nnz == win.count(1) + win.count(2)
    assert {idx.j for idx in lam.support()} == {1, 2}


def test_shape_parse_errors():
    with pytest.raises(ParameterError):
        InstanceShape.parse("d=1,colour=2")
    with pytest.raises(ParameterError):
        InstanceShape.parse("levels=3-1")
    with pytest.raises(ParameterError):
        InstanceShape(J=2, levels=(1, 4)).level_range()


def test_parse_weight():
    assert parse_weight("const:2") == Constant(2.0)
    assert parse_weight("power:0.5") == Power(0.5)
    assert parse_weight("power:0.5:axis") == Power(0.5, axis=True)
    assert parse_weight("exp:-1") == Exponential(-1.0)
    for bad in ("power", "exp:x", "gauss:1"):
        with pytest.raises(ParameterError):
            parse_weight(bad)


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_gap_command():
    code, out, err = run("gap", "--J", "8")
    assert code == 0
    recs = records(out)
    assert recs[-1]["value"] == "strict inclusion witnessed"
    assert err.startswith("experiment,metric,")


def test_norm_of_an_empty_sequence_file(tmp_path):
    f = tmp_path / "empty.seq"
    f.write_text("window 1 3 1\n")
    code, out, _ = run("norm", "--seq", str(f))
    assert code == 0
    assert records(out)[0]["value"] == 0.0


def test_failed_assertion_exits_one():
    code, out, _ = run("apconst", "--weight", "power:1.5", "--expect", "bounded")
    assert code == 1
    assert any(not r["pass"] for r in records(out))


def test_config_errors_exit_two(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run("norm", "--config", str(bad))[0] == 2
    bad.write_text("no separator\n")
    assert run("norm", "--config", str(bad))[0] == 2
    assert run("norm", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    assert run("norm", "--weight", "gauss:1")[0] == 2
    assert run("norm", "--p", "banana")[0] == 2
    assert run("frobnicate")[0] == 2


def test_config_then_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# norms\ns = 1.5\nq = inf\ncount = 2\n")
    code, out, _ = run("norm", "--config", str(cfg), "--count", "3")
    assert code == 0
    recs = records(out)
    assert len(recs) == 3
    assert recs[0]["params"]["s"] == 1.5 and recs[0]["params"]["q"] == "inf"


def test_quick_suite_single_criterion(tmp_path):
    code, out, _ = run("suite", "--quick", "--only", "8", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "suite.jsonl").exists() and (tmp_path / "suite.csv").exists()
    recs = records((tmp_path / "suite.jsonl").read_text())
    assert recs and all(r["pass"] for r in recs)


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CALDERON_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run("factorize-b", "--count", "3")
    assert code == 0
    assert "reports in" in out
    recs = records((tmp_path / "factorize-b.jsonl").read_text())
    assert all(r["pass"] for r in recs)
    assert (tmp_path / "factorize-b.csv").read_text().startswith("experiment,metric,")


@pytest.mark.parametrize("argv", [
    ["factorize-f", "--count", "3"],
    ["factorize-lp", "--count", "2"],
    ["oracle", "--count", "1", "--nnz", "4"],
    ["holder", "--count", "3"],
    ["apconst", "--weight", "exp:1", "--scope", "local", "--expect", "bounded"],
    ["wclass", "--J", "4"],
    ["maximal", "--count", "2", "--J", "4"],
    ["embed", "--count", "3", "--J", "4"],
])
def test_commands_run(argv):
    code, out, err = run(*argv)
    assert code == 0, err
    assert records(out)
