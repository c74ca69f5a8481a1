"""CLI contract: commands, flags, config files, exit codes, artifacts."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from sigmapaths.cli import main
from sigmapaths.experiments import EXPERIMENTS
from sigmapaths.grids import read_paths_csv
from sigmapaths.reports import reports_equal_ignoring_meta


@pytest.fixture
def runner():
    return CliRunner()


def test_simulate_writes_csv(runner, tmp_path):
    out = tmp_path / "sim"
    r = runner.invoke(main, [
        "simulate", "--family", "brownian", "--n-steps", "64", "--horizon", "1",
        "--paths", "5", "--seed", "42", "--out", str(out),
    ])
    assert r.exit_code == 0, r.output
    paths = read_paths_csv(out / "paths.csv")
    assert len(paths) == 5
    assert all(p.values[0] == 0.0 for p in paths)
    doc = json.loads((out / "simulate.json").read_text())
    assert doc["schema"] == 1
    assert doc["spec"]["family"] == "brownian"


def test_simulate_same_seed_same_bytes(runner, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        r = runner.invoke(main, [
            "simulate", "--family", "bessel3", "--x0", "1", "--n-steps", "32",
            "--paths", "3", "--seed", "9", "--out", str(out),
        ])
        assert r.exit_code == 0, r.output
        outs.append((out / "paths.csv").read_bytes())
    assert outs[0] == outs[1]


def test_unknown_command_exits_2(runner):
    r = runner.invoke(main, ["frobnicate"])
    assert r.exit_code == 2


def test_unknown_family_exits_2(runner, tmp_path):
    r = runner.invoke(main, ["simulate", "--family", "levy", "--out", str(tmp_path)])
    assert r.exit_code == 2


def test_unwritable_output_exits_4(runner, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    r = runner.invoke(main, [
        "simulate", "--family", "brownian", "--n-steps", "8", "--paths", "2",
        "--out", str(blocker / "sub"),
    ])
    assert r.exit_code == 4


def test_verify_passes_and_fails_cleanly(runner):
    r = runner.invoke(main, ["verify", "skorokhod"])
    assert r.exit_code == 0
    assert "[PASS] skorokhod" in r.output


def test_experiment_help_lists_registry(runner):
    r = runner.invoke(main, ["experiment", "--help"])
    assert r.exit_code == 0
    for name in EXPERIMENTS:
        assert name in r.output


def test_experiment_lemma_balance_report(runner, tmp_path):
    out = tmp_path / "rep"
    r = runner.invoke(main, [
        "experiment", "lemma-balance", "--family", "exp_martingale",
        "--horizon", "1", "--n-steps", "128", "--paths", "1000",
        "--seed", "3", "--out", str(out), "--formats", "json,csv",
    ])
    assert r.exit_code == 0, r.output
    doc = json.loads((out / "lemma_balance.json").read_text())
    assert doc["schema"] == 1
    assert "ci_agreement" in doc["results"]
    assert (out / "lemma_balance_estimates.csv").exists()
    assert "lemma-balance:" in r.output


def test_experiment_svg_emission(runner, tmp_path):
    out = tmp_path / "svg"
    r = runner.invoke(main, [
        "experiment", "two-infinity", "--horizon", "8", "--n-steps", "512",
        "--paths", "100", "--seed", "4", "--out", str(out),
        "--formats", "json,svg",
    ])
    assert r.exit_code == 0, r.output
    svg = (out / "two_infinity_gaps.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_experiment_rerun_byte_identical_modulo_meta(runner, tmp_path):
    docs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        r = runner.invoke(main, [
            "experiment", "tail", "--kind", "T_a_heavy_tail", "--horizon", "8",
            "--dt", "0.002", "--paths", "500", "--seed", "11", "--out", str(out),
        ])
        assert r.exit_code == 0, r.output
        docs.append(json.loads((out / "tail.json").read_text()))
    assert reports_equal_ignoring_meta(docs[0], docs[1])


def test_config_file_defaults_and_flag_override(runner, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# experiment defaults\n"
        "paths = 600\n"
        "seed = 21\n"
        "n-steps = 128\n"
        "horizon = 1.0\n"
    )
    out1 = tmp_path / "c1"
    r = runner.invoke(main, [
        "experiment", "lemma-balance", "--config", str(cfg), "--out", str(out1),
    ])
    assert r.exit_code == 0, r.output
    doc = json.loads((out1 / "lemma_balance.json").read_text())
    assert doc["seed"] == 21
    assert doc["n_paths"] == 600

    out2 = tmp_path / "c2"
    r = runner.invoke(main, [
        "experiment", "lemma-balance", "--config", str(cfg),
        "--seed", "99", "--out", str(out2),
    ])
    assert r.exit_code == 0, r.output
    doc2 = json.loads((out2 / "lemma_balance.json").read_text())
    assert doc2["seed"] == 99  # explicit flag beats the config file


def test_seed_env_var_fallback(runner, tmp_path):
    out = tmp_path / "env"
    r = runner.invoke(main, [
        "experiment", "lemma-balance", "--n-steps", "64", "--paths", "400",
        "--out", str(out),
    ], env={"SIGMA_SEED": "1234"})
    assert r.exit_code == 0, r.output
    doc = json.loads((out / "lemma_balance.json").read_text())
    assert doc["seed"] == 1234


def test_decompose_writes_classd_report(runner, tmp_path):
    out = tmp_path / "dec"
    r = runner.invoke(main, [
        "decompose", "--family", "exp_martingale", "--n-steps", "128",
        "--horizon", "1", "--paths", "500", "--seed", "6", "--out", str(out),
    ])
    assert r.exit_code == 0, r.output
    doc = json.loads((out / "classd_report.json").read_text())
    res = doc["results"]
    assert {"e_mc", "e_int", "e_log_inv_i", "e_qv_u"} <= set(res)
    assert res["n_paths"] == 500
    table = (out / "decomposition_path0.csv").read_text().splitlines()
    assert table[0] == "t,M,I,X,A,N"
    assert len(table) == 130


def test_decompose_rejects_non_martingale_family(runner, tmp_path):
    r = runner.invoke(main, [
        "decompose", "--family", "brownian", "--out", str(tmp_path / "x"),
    ])
    assert r.exit_code == 2


def test_run_config_programmatic_entry(tmp_path):
    from sigmapaths.cli import RunConfig, run

    cfg = RunConfig(command="simulate", family="brownian", n_paths=3, n_steps=32,
                    horizon=1.0, seed=5, output_dir=str(tmp_path / "rc"))
    assert run(cfg) == 0
    assert (tmp_path / "rc" / "paths.csv").exists()

    exp = RunConfig(command="experiment", name="lemma-balance", n_paths=400,
                    n_steps=64, horizon=1.0, seed=5, output_dir=str(tmp_path / "rce"))
    assert run(exp) == 0
    assert (tmp_path / "rce" / "lemma_balance.json").exists()

    assert run(RunConfig(command="verify", name="skorokhod")) == 0
    assert run(RunConfig(command="simulate", family="no_such", output_dir=str(tmp_path))) == 2


def test_run_config_validates_numerics():
    from sigmapaths.cli import RunConfig

    with pytest.raises(ValueError, match="n_steps"):
        RunConfig(command="simulate", n_steps=0)
    with pytest.raises(ValueError, match="command"):
        RunConfig(command="explode")


def test_simulate_size_cap(runner, tmp_path):
    r = runner.invoke(main, [
        "simulate", "--family", "brownian", "--n-steps", "1000000",
        "--paths", "1000", "--out", str(tmp_path / "big"),
    ])
    assert r.exit_code == 2
    assert "cap" in r.output
