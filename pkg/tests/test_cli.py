import json

import pytest
from click.testing import CliRunner

from lmahler import cli
from lmahler.convex_core.grid import GrowthError, load_grid


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False) if "mix_stderr" in CliRunner.__init__.__code__.co_varnames else CliRunner()


def _records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_transform_writes_grids(runner, tmp_path):
    out = str(tmp_path / "run")
    res = runner.invoke(cli.main, ["transform", "--spec", "pnorm p=1", "--n", "2", "--nodes", "65", "--out", out])
    assert res.exit_code == 0, res.output
    rec = _records((tmp_path / "run.jsonl").read_text())[0]
    assert rec["fenchel_young_violation"] <= 1e-12
    assert load_grid(out + ".primal.lmgf").shape == (65, 65)
    assert load_grid(out + ".dual.lmgf").dim == 2


def test_bad_spec_exit_code(runner):
    res = runner.invoke(cli.main, ["transform", "--spec", "bogus kind"])
    assert res.exit_code == cli.EXIT_PARSE


def test_dual_range_too_small_exit_code(runner):
    res = runner.invoke(cli.main, ["transform", "--spec", "gaussian", "--nodes", "65", "--dual-range", "0.5"])
    assert res.exit_code == cli.EXIT_CLIPPING
    assert "at least" in (res.stderr if hasattr(res, "stderr") else res.output)


@pytest.mark.parametrize("nodes", ["32", "31", "64"])
def test_node_validation(runner, nodes):
    res = runner.invoke(cli.main, ["volume-product", "--spec", "gaussian", "--nodes", nodes])
    assert res.exit_code == 2


def test_tol_validation(runner):
    res = runner.invoke(cli.main, ["equipartition", "--spec", "gaussian", "--tol", "0"])
    assert res.exit_code == 2


def test_volume_product_record(runner):
    res = runner.invoke(cli.main, ["volume-product", "--spec", "pnorm p=1", "--scale-sweep", "0.5:2:3"])
    assert res.exit_code == 0
    recs = _records(res.stdout if hasattr(res, "stdout") else res.output)
    assert recs[0]["value"] == 16.0 and recs[0]["lower_bound"] == 16.0
    assert recs[0]["upper_margin"] == pytest.approx(4 * 3.141592653589793 ** 2 - 16)
    assert [r["t"] for r in recs[1:]] == pytest.approx([0.5, 1.0, 2.0])


def test_floats_have_seventeen_digits():
    assert cli._format(0.1) == "0.10000000000000001"
    assert cli._format({"a": [1.0, 2]}) == '{"a": [1.0, 2]}'
    assert cli._format(float("inf")) == "Infinity"


def test_config_file_and_override(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": "gaussian", "n": 1, "nodes": 129}))
    res = runner.invoke(cli.main, ["--config", str(cfg), "volume-product", "--nodes", "257"])
    assert res.exit_code == 0
    rec = _records(res.stdout if hasattr(res, "stdout") else res.output)[0]
    assert rec["grid"]["counts"] == [257]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert runner.invoke(cli.main, ["--config", str(bad), "volume-product"]).exit_code == 2


def test_equipartition_command(runner):
    res = runner.invoke(cli.main, ["equipartition", "--spec", "gaussian"])
    assert res.exit_code == 0
    rec = _records(res.stdout if hasattr(res, "stdout") else res.output)[0]
    assert rec["strong"] is True
    assert rec["T"][0][0] == pytest.approx(1.2533141373155, rel=1e-9)


def test_equipartition_requires_plane(runner):
    assert runner.invoke(cli.main, ["equipartition", "--spec", "gaussian", "--n", "3"]).exit_code == 2


def test_nonconvergence_exit_code(runner, monkeypatch):
    from lmahler import equipartition

    def boom(*a, **k):
        raise equipartition.NonConvergenceError("no root")

    monkeypatch.setattr(equipartition, "strong_equipartition_map", boom)
    res = runner.invoke(cli.main, ["equipartition", "--spec", "gaussian"])
    assert res.exit_code == cli.EXIT_NONCONVERGENCE


def test_growth_exit_code(runner, monkeypatch):
    from lmahler.measures import integrals

    def boom(*a, **k):
        raise GrowthError("integral diverges")

    monkeypatch.setattr(integrals, "build_pair", boom)
    res = runner.invoke(cli.main, ["volume-product", "--spec", "gaussian"])
    assert res.exit_code == cli.EXIT_INTEGRABILITY


def test_verify_smoke_writes_reports(runner, tmp_path):
    out = str(tmp_path / "v")
    res = runner.invoke(cli.main, ["verify", "--suite", "smoke", "--out", out])
    assert res.exit_code == 0
    assert len((tmp_path / "v.jsonl").read_text().splitlines()) == len((tmp_path / "v.csv").read_text().splitlines()) - 1


def test_verify_failure_exit_code(runner, monkeypatch):
    from lmahler import verify
    from lmahler.verify import VerificationReport

    monkeypatch.setitem(verify.SUITES, "smoke", lambda seed: [VerificationReport("x", "s", 1.0, 0.0, 0.1)])
    assert runner.invoke(cli.main, ["verify", "--suite", "smoke"]).exit_code == cli.EXIT_FAILED
