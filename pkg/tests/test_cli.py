import json

import pytest
from click.testing import CliRunner

from feedflow.cli import main

SYNTH_CONFIG = """
initiator = 0.9, 0.5, 0.5, 0.3
k = 5
target_edges = 120
graph_seed = 1

mu = 2.0
sigma = 0.5
lambda_c = 30
beta0 = 0.1
gamma = 0.65
horizon_hours = 6

delay_bin.0.lo = 0
delay_bin.0.hi = inf
delay_bin.0.mu1 = 3.0
delay_bin.0.sigma1 = 0.5
delay_bin.0.mu2 = 2.0
delay_bin.0.sigma2 = 0.5

contagion.0.token = tok
contagion.0.n_seeds = 3
contagion.0.hazard = 0.3
"""

SIM_CONFIG = """
mu = 1.0
sigma = 0.25
lambda_c = 30
beta0 = 0.1
gamma = 0.65
n_cascades = 50

delay_bin.0.lo = 0
delay_bin.0.hi = inf
delay_bin.0.mu1 = 3.0
delay_bin.0.sigma1 = 0.5
delay_bin.0.mu2 = 2.0
delay_bin.0.sigma2 = 0.5
"""


def all_output(result):
    """stdout plus stderr, tolerant of click versions that split the streams."""
    try:
        return result.output + result.stderr
    except ValueError:
        return result.output


def graph_nodes(path):
    nodes = set()
    for line in path.read_text().splitlines():
        a, b = line.split("\t")
        nodes.update((a, b))
    return nodes


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workspace(tmp_path, runner):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text(SYNTH_CONFIG)
    result = runner.invoke(main, [
        "synth", "--config", str(cfg), "--seed", "11",
        "--out", str(tmp_path / "log.tsv"),
        "--graph-out", str(tmp_path / "graph.tsv"),
        "--truth-out", str(tmp_path / "truth.txt"),
    ])
    assert result.exit_code == 0, result.output
    return tmp_path


def test_synth_outputs_and_manifest(workspace):
    assert (workspace / "log.tsv").stat().st_size > 0
    assert (workspace / "graph.tsv").stat().st_size > 0
    assert "beta_curve.gamma = 0.65" in (workspace / "truth.txt").read_text()
    manifest = json.loads((workspace / "log.tsv.manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 11
    assert len(manifest["outputs"]) == 3


def test_synth_is_deterministic(workspace, tmp_path, runner):
    cfg = tmp_path / "again.cfg"
    cfg.write_text(SYNTH_CONFIG)
    result = runner.invoke(main, [
        "synth", "--config", str(cfg), "--seed", "11",
        "--out", str(tmp_path / "log2.tsv"),
    ])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "log2.tsv").read_bytes() == (workspace / "log.tsv").read_bytes()


def test_validate(workspace, runner):
    result = runner.invoke(main, [
        "validate", "--log", str(workspace / "log.tsv"),
        "--graph", str(workspace / "graph.tsv"),
    ])
    assert result.exit_code == 0
    assert "events" in result.output
    n = len(graph_nodes(workspace / "graph.tsv"))
    assert f"{n} users, 120 follow edges" in result.output


def test_validate_reports_rejects(tmp_path, runner):
    log = tmp_path / "bad.tsv"
    log.write_text("100\ta\tT\t1\nnot a log line\n")
    result = runner.invoke(main, ["validate", "--log", str(log)])
    assert result.exit_code == 0
    assert "1 events" in result.output
    assert "1 lines rejected" in result.output


def test_flows_and_curve(workspace, runner):
    result = runner.invoke(main, [
        "flows", "--log", str(workspace / "log.tsv"),
        "--graph", str(workspace / "graph.tsv"),
        "--out", str(workspace / "flows.csv"),
        "--curve-out", str(workspace / "curve.csv"),
        "--min-received", "5",
    ])
    assert result.exit_code == 0, result.output
    lines = (workspace / "flows.csv").read_text().splitlines()
    assert lines[0] == "user,lambda,lambda_r,beta_r,F"
    assert len(lines) == 1 + len(graph_nodes(workspace / "graph.tsv"))
    curve = (workspace / "curve.csv").read_text().splitlines()
    assert curve[0] == "bin_lo,bin_hi,n,mean,median,p10,p90"
    assert len(curve) > 1


def test_queues_csv(workspace, runner):
    result = runner.invoke(main, [
        "queues", "--log", str(workspace / "log.tsv"),
        "--graph", str(workspace / "graph.tsv"),
        "--out", str(workspace / "queues.csv"),
    ])
    assert result.exit_code == 0, result.output
    assert "queue records" in result.output
    lines = (workspace / "queues.csv").read_text().splitlines()
    assert lines[0] == "user,retweet_id,orig_id,q,delay_s"
    assert len(lines) > 1


def test_sources_csv(workspace, runner):
    result = runner.invoke(main, [
        "sources", "--log", str(workspace / "log.tsv"),
        "--graph", str(workspace / "graph.tsv"),
        "--out", str(workspace / "sources.csv"),
    ])
    assert result.exit_code == 0, result.output
    lines = (workspace / "sources.csv").read_text().splitlines()
    assert lines[0] == "user,F,S_r,p_src,out_of_feed"
    assert len(lines) == 1 + len(graph_nodes(workspace / "graph.tsv"))


def test_exposure_csv(workspace, runner):
    result = runner.invoke(main, [
        "exposure", "--log", str(workspace / "log.tsv"),
        "--graph", str(workspace / "graph.tsv"),
        "--token", "tok", "--ranges", "0.001:10000",
        "--out", str(workspace / "exposure.csv"),
    ])
    assert result.exit_code == 0, result.output
    lines = (workspace / "exposure.csv").read_text().splitlines()
    assert lines[0] == "group_lo,group_hi,k,E,I,P"
    assert len(lines) > 1


def test_exposure_unknown_token_fails(workspace, runner):
    result = runner.invoke(main, [
        "exposure", "--log", str(workspace / "log.tsv"),
        "--graph", str(workspace / "graph.tsv"),
        "--token", "missing-token",
        "--out", str(workspace / "x.csv"),
    ])
    assert result.exit_code == 1
    assert "error:" in all_output(result)


def test_graphgen_cli(tmp_path, runner):
    args = [
        "graphgen", "--initiator", "0.9,0.5,0.5,0.3", "--k", "6",
        "--target-edges", "300", "--seed", "4",
        "--out", str(tmp_path / "g.tsv"),
    ]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert "64 nodes, 300 edges" in result.output
    first = (tmp_path / "g.tsv").read_bytes()
    result = runner.invoke(main, args)
    assert result.exit_code == 0
    assert (tmp_path / "g.tsv").read_bytes() == first


def test_simulate_cli_models_and_workers(workspace, tmp_path, runner):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(SIM_CONFIG)
    outputs = {}
    for model in ("ic", "ct"):
        for workers in ("1", "3"):
            out = tmp_path / f"{model}_{workers}.csv"
            result = runner.invoke(main, [
                "simulate", "--model", model,
                "--graph", str(workspace / "graph.tsv"),
                "--config", str(cfg), "--seed", "21", "--workers", workers,
                "--out", str(out),
                "--report", str(tmp_path / f"{model}_{workers}_rep.csv"),
            ])
            assert result.exit_code == 0, result.output
            outputs[(model, workers)] = out.read_bytes()
    assert outputs[("ic", "1")] == outputs[("ic", "3")]
    assert outputs[("ct", "1")] == outputs[("ct", "3")]
    lines = (tmp_path / "ic_1.csv").read_text().splitlines()
    assert lines[0] == "cascade_id,seed_node,size,duration"
    assert len(lines) == 51
    rep = (tmp_path / "ct_1_rep.csv").read_text().splitlines()
    assert rep[0] == "metric,value,ccdf"


def test_bad_window_is_a_clean_error(workspace, runner):
    result = runner.invoke(main, [
        "flows", "--log", str(workspace / "log.tsv"),
        "--graph", str(workspace / "graph.tsv"),
        "--window", "zero,ten",
        "--out", str(workspace / "f.csv"),
    ])
    assert result.exit_code == 1
    assert "error: --window" in all_output(result)


def test_missing_config_key_is_a_clean_error(workspace, tmp_path, runner):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("mu = 1.0\n")
    result = runner.invoke(main, [
        "simulate", "--model", "ic",
        "--graph", str(workspace / "graph.tsv"),
        "--config", str(cfg), "--seed", "1",
        "--out", str(tmp_path / "o.csv"),
    ])
    assert result.exit_code == 1
    assert "error:" in all_output(result)


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "feedflow" in result.output
