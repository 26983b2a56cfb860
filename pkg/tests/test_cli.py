import csv
import hashlib
import json
import logging

import pytest

from quatma import cli


def run(tmp_path, *argv, config=None, name="out"):
    args = list(argv) + ["--out", str(tmp_path / name), "--quiet"]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(config if isinstance(config, str) else json.dumps(config))
        args += ["--config", str(path)]
    return cli.main(args), tmp_path / name


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


SOLVE = {"n": 1, "N": 8, "F": {"family": "cosine", "params": {"amplitude": 0.5}}}


def test_verify_writes_report_and_digests(tmp_path):
    code, out = run(tmp_path, "verify", "moore")
    assert code == 0
    report = json.loads((out / "verify_moore.json").read_text())
    assert report["passed"]
    m = manifest(out)
    digest = hashlib.sha256((out / "verify_moore.json").read_bytes()).hexdigest()
    assert m["outputs"]["verify_moore.json"] == digest
    assert m["config"] == {"suite": "moore"} and m["seed"] == 0


def test_verify_is_deterministic(tmp_path):
    _, a = run(tmp_path, "verify", "calculus", name="a")
    _, b = run(tmp_path, "verify", "calculus", name="b")
    assert (a / "verify_calculus.json").read_bytes() == (b / "verify_calculus.json").read_bytes()
    ma, mb = manifest(a), manifest(b)
    ma.pop("timings"), mb.pop("timings")
    assert ma == mb


def test_unknown_suite_is_usage_error(tmp_path, capsys):
    code, _ = run(tmp_path, "verify", "bogus")
    assert code == 2
    assert "unknown suite 'bogus'" in capsys.readouterr().err


def test_failed_invariant_exits_1(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "run_suite", lambda name, seed: {
        "suite": name, "seed": seed, "passed": False,
        "suites": {"moore": {"passed": False, "checks": [
            {"name": "x", "value": 1.0, "threshold": 0.0, "relation": "<=", "passed": False}]}},
    })
    assert run(tmp_path, "verify", "moore")[0] == 1


def test_solve_outputs(tmp_path):
    code, out = run(tmp_path, "solve", config=SOLVE)
    assert code == 0
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["converged"] and rep["residual_history"][-1] < 1e-8
    assert set(manifest(out)["outputs"]) >= {"solve_report.json", "phi.bin", "phi.json"}


def test_solve_numerical_failure_exits_3(tmp_path):
    code, out = run(tmp_path, "solve", config=SOLVE | {"solver": {"max_iters": 0}})
    assert code == 3
    assert json.loads((out / "solve_report.json").read_text())["status"] == "MaxIterationsExceeded"


@pytest.mark.parametrize(
    "config",
    [
        '{"n": 1, "N": 8,',
        {"n": 1, "N": 8, "F": {"family": "zero"}, "colour": "red"},
        {"n": 1, "N": 8, "F": {"family": "zero"}, "solver": {"tolerance": 1e-3}},
        {"n": 3, "N": 8, "F": {"family": "zero"}},
        {"n": 1, "N": "8", "F": {"family": "zero"}},
        {"n": 1, "N": 8, "F": {"family": "spiral"}},
        {},
    ],
)
def test_bad_configs_exit_2(tmp_path, config):
    assert run(tmp_path, "solve", config=config)[0] == 2


def test_malformed_json_reports_position(tmp_path, capsys):
    run(tmp_path, "solve", config='{"n": 1,\n  "N": }')
    assert "line 2" in capsys.readouterr().err


def test_verify_rejects_config(tmp_path):
    assert run(tmp_path, "verify", "moore", config={})[0] == 2


def test_sweep_dedups_and_warns(tmp_path, caplog):
    cfg = {"n": 1, "N": 8, "F": {"family": "cosine"}, "scales": [0, 0.5, 0.5, 1]}
    with caplog.at_level(logging.WARNING):
        code, out = run(tmp_path, "sweep", config=cfg)
    assert code == 0
    assert "duplicate scales" in caplog.text
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [float(r["s"]) for r in rows] == [0.0, 0.5, 1.0]
    assert all(float(r["envelope"]) >= float(r["normphi_inf"]) for r in rows)


def test_abp_command(tmp_path):
    code, out = run(tmp_path, "abp", config={"perturbed": 1})
    assert code == 0
    rows = list(csv.DictReader((out / "abp.csv").open()))
    assert [r["kind"] for r in rows] == ["proposition", "lemma"] * 2
    assert json.loads((out / "abp.json").read_text())["passed"]


def test_abp_rejects_n2(tmp_path):
    assert run(tmp_path, "abp", config={"n": 2})[0] == 2


def test_bench_single_repetition_is_low_confidence(tmp_path):
    code, out = run(tmp_path, "bench", "--threads", "1", config={"N": 6, "repetitions": 1})
    assert code == 0
    rows = list(csv.DictReader((out / "bench.csv").open()))
    assert {r["phase"] for r in rows} == {"hessian_assembly", "moore_evaluation", "linear_solve"}
    assert all(r["low_confidence"] == "True" for r in rows)
    assert manifest(out)["threads"] == 1


def test_seed_override_and_validation(tmp_path):
    code, out = run(tmp_path, "bench", "--seed", "7", config={"N": 4, "repetitions": 2})
    assert code == 0 and manifest(out)["seed"] == 7
    assert run(tmp_path, "bench", "--seed", "-1")[0] == 2
    assert run(tmp_path, "bench", "--threads", "0")[0] == 2


def test_missing_command_is_usage_error():
    assert cli.main([]) == 2
