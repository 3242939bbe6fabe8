"""Command-line front end: reproducible file-in/file-out pipelines.

Every command reads and writes plain files, digests its inputs before
processing, and drops a RunManifest JSON next to its primary output. Plots
are never rendered here; commands emit CSV for external plotting.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .config import (
    ConfigError,
    beta_curve_from,
    delay_model_from,
    get_float,
    get_int,
    initiator_from,
    parse_config,
)
from .events import EventLog, LogFormatError, SocialGraph, parse_event_log
from .exposure import aggregate_curves, build_trace, exposure_curve, group_users_by_inflow
from .flows import compute_flow_stats, log_binned_curve
from .graphgen import KroneckerParams, kronecker_generate
from .manifest import RunManifest, file_digest, manifest_path_for
from .queues import fit_lognormal_convolution, queue_positions
from .simulate import SimConfig, distribution_report, simulate_ct_bg, simulate_ic_bg
from .sources import source_stats
from .synth import ContagionPlan, WorkloadSpec, generate_workload, ground_truth_text


def _fail(message: str) -> "click.exceptions.Exit":
    click.echo(f"error: {message}", err=True)
    return click.exceptions.Exit(1)


def command_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, LogFormatError, ValueError, KeyError) as exc:
            raise _fail(str(exc))
        except OSError as exc:
            raise _fail(f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc))

    return wrapper


def _load_log(path: str) -> EventLog:
    with open(path, "r", encoding="utf-8") as fh:
        log, report = parse_event_log(fh)
    for rej in report.rejects:
        click.echo(f"warning: line {rej.line_no} rejected: {rej.reason}", err=True)
    return log


def _load_graph(path: str) -> SocialGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return SocialGraph.from_tsv(fh)


def _parse_window(window: Optional[str], log: EventLog) -> tuple[int, int]:
    if window is None:
        return log.span()
    try:
        lo, hi = (int(part) for part in window.split(","))
    except ValueError:
        raise _fail(f"--window must be 'start,end' integers, got {window!r}")
    return (lo, hi)


def _write_manifest(command: str, cfg: dict, inputs: list[str], seed, outputs: list[str]):
    manifest = RunManifest(
        command=command,
        config=cfg,
        inputs={p: file_digest(p) for p in inputs},
        seed=seed,
        outputs=[str(o) for o in outputs],
    )
    manifest.write(manifest_path_for(outputs[0]))


def _read_config(path: Optional[str]) -> dict[str, str]:
    if path is None:
        return parse_config("")
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


@click.group()
@click.version_option(__version__, prog_name="feedflow")
def main():
    """Feed-queue analytics and contagion simulation toolkit."""


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", type=click.Path(exists=True))
@command_errors
def validate(log_path, graph_path):
    """Parse and validate an event log (and optionally a graph); report counts."""
    with open(log_path, "r", encoding="utf-8") as fh:
        log, report = parse_event_log(fh)
    click.echo(f"{len(log)} events")
    if report.rejects:
        click.echo(f"{report.n_rejected} lines rejected:")
        for rej in report.rejects:
            click.echo(f"  line {rej.line_no}: {rej.reason}")
    if graph_path:
        graph = _load_graph(graph_path)
        click.echo(f"{len(graph.nodes)} users, {graph.n_edges()} follow edges")


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--window", default=None, help="start,end seconds (default: log span)")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--curve-out", "curve_path", type=click.Path(),
              help="binned retweet-probability curve CSV")
@click.option("--min-received", default=10, show_default=True,
              help="exclude users with fewer received tweets from the curve")
@click.option("--bins-per-decade", default=10, show_default=True)
@click.option("--originals-only", is_flag=True,
              help="exclude followee retweets from the in-flow")
@command_errors
def flows(log_path, graph_path, window, out_path, curve_path, min_received,
          bins_per_decade, originals_only):
    """Per-user rate statistics and the population retweet-probability curve."""
    log = _load_log(log_path)
    graph = _load_graph(graph_path)
    win = _parse_window(window, log)
    hours = (win[1] - win[0]) / 3600.0
    stats = [
        compute_flow_stats(u, log, graph, win, include_retweets=not originals_only)
        for u in sorted(graph.nodes)
    ]
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("user,lambda,lambda_r,beta_r,F\n")
        for st in stats:
            fh.write(f"{st.user},{st.lam:.10g},{st.lam_r:.10g},{st.beta_r:.10g},{st.followees}\n")
    outputs = [out_path]
    if curve_path:
        eligible = [st for st in stats if st.lam * hours >= min_received]
        curve = log_binned_curve(
            [st.lam for st in eligible],
            [st.beta_r for st in eligible],
            bins_per_decade=bins_per_decade,
        )
        with open(curve_path, "w", encoding="utf-8") as fh:
            fh.write("bin_lo,bin_hi,n,mean,median,p10,p90\n")
            for b in curve:
                fh.write(
                    f"{b.lo:.10g},{b.hi:.10g},{b.n},{b.mean:.10g},"
                    f"{b.median:.10g},{b.p10:.10g},{b.p90:.10g}\n"
                )
        outputs.append(curve_path)
    _write_manifest("flows", {"window": list(win), "min_received": min_received},
                    [log_path, graph_path], None, outputs)


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--window", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--source", type=click.Choice(["immediate", "root"]), default="immediate",
              show_default=True, help="measure against the feed item or the chain root")
@click.option("--fit-delays", "fit_path", type=click.Path(),
              help="write a lognormal-convolution fit report for the pooled delays")
@command_errors
def queues(log_path, graph_path, window, out_path, source, fit_path):
    """Queue positions and delays for every forward in the window."""
    log = _load_log(log_path)
    graph = _load_graph(graph_path)
    win = _parse_window(window, log)
    all_records = []
    n_out_of_feed = 0
    for u in sorted(graph.nodes):
        records, report = queue_positions(u, log, graph, win, source=source)
        all_records.extend(records)
        n_out_of_feed += report.n_out_of_feed
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("user,retweet_id,orig_id,q,delay_s\n")
        for r in all_records:
            fh.write(f"{r.user},{r.retweet_id},{r.orig_id},{r.q},{r.delay_s}\n")
    click.echo(f"{len(all_records)} queue records, {n_out_of_feed} out-of-feed forwards")
    outputs = [out_path]
    if fit_path:
        fit = fit_lognormal_convolution([r.delay_s for r in all_records])
        with open(fit_path, "w", encoding="utf-8") as fh:
            for key in ("mu1", "sigma1", "mu2", "sigma2", "loglik", "n", "n_rejected"):
                fh.write(f"{key} = {getattr(fit, key)}\n")
        outputs.append(fit_path)
    _write_manifest("queues", {"window": list(win), "source": source},
                    [log_path, graph_path], None, outputs)


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--window", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@command_errors
def sources(log_path, graph_path, window, out_path):
    """Retweet source-set statistics per user."""
    log = _load_log(log_path)
    graph = _load_graph(graph_path)
    win = _parse_window(window, log)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("user,F,S_r,p_src,out_of_feed\n")
        for u in sorted(graph.nodes):
            st = source_stats(u, log, graph, win)
            fh.write(f"{st.user},{st.followees},{st.source_set},"
                     f"{st.p_src:.10g},{st.out_of_feed}\n")
    _write_manifest("sources", {"window": list(win)}, [log_path, graph_path],
                    None, [out_path])


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--window", default=None)
@click.option("--token", "tokens", multiple=True, required=True)
@click.option("--ranges", default="1:10,10:100,100:200,1000:2500", show_default=True,
              help="in-flow (lo:hi] groups, comma-separated")
@click.option("--aggregate", type=click.Choice(["mean", "pooled"]), default="mean",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@command_errors
def exposure(log_path, graph_path, window, tokens, ranges, aggregate, out_path):
    """Ordinal-time exposure curves per in-flow group, aggregated across tokens."""
    log = _load_log(log_path)
    graph = _load_graph(graph_path)
    win = _parse_window(window, log)
    try:
        bounds = [
            (float(lo), float(hi))
            for lo, hi in (part.split(":") for part in ranges.split(","))
        ]
    except ValueError:
        raise _fail(f"--ranges must look like '1:10,10:100', got {ranges!r}")
    stats = [compute_flow_stats(u, log, graph, win) for u in sorted(graph.nodes)]
    groups = group_users_by_inflow(stats, bounds)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("group_lo,group_hi,k,E,I,P\n")
        for (lo, hi) in bounds:
            users = groups[(lo, hi)]
            if not users:
                continue
            curves = []
            for token in tokens:
                trace = build_trace(token, log, graph, win)
                curves.append(exposure_curve(trace, users, label=token))
            agg = aggregate_curves(curves, mode=aggregate)
            for k in range(agg.k_max + 1):
                p = agg.p[k]
                fh.write(f"{lo:.10g},{hi:.10g},{k},{agg.e[k]:.10g},{agg.i[k]:.10g},"
                         f"{'' if p != p else format(p, '.10g')}\n")
    _write_manifest("exposure", {"window": list(win), "tokens": list(tokens),
                                 "ranges": ranges, "aggregate": aggregate},
                    [log_path, graph_path], None, [out_path])


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="config with initiator, k, target_edges")
@click.option("--initiator", default=None, help="four comma-separated probabilities")
@click.option("--k", "power", type=int, default=None)
@click.option("--target-edges", type=int, default=None)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@command_errors
def graphgen(config_path, initiator, power, target_edges, seed, out_path):
    """Generate a stochastic Kronecker follow graph as graph TSV."""
    cfg = _read_config(config_path)
    if initiator is not None:
        cfg["initiator"] = initiator
    if power is not None:
        cfg["k"] = str(power)
    if target_edges is not None:
        cfg["target_edges"] = str(target_edges)
    params = KroneckerParams(
        initiator=initiator_from(cfg),
        k=get_int(cfg, "k"),
        target_edges=get_int(cfg, "target_edges"),
        seed=seed,
    )
    graph = kronecker_generate(params)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(graph.to_tsv())
    click.echo(f"{len(graph.nodes)} nodes, {graph.n_edges()} edges")
    _write_manifest("graphgen", dict(cfg), [p for p in [config_path] if p],
                    seed, [out_path])


@main.command()
@click.option("--model", type=click.Choice(["ic", "ct"]), required=True)
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, required=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path(),
              help="CCDF tables of cascade size and duration")
@command_errors
def simulate(model, graph_path, config_path, seed, workers, out_path, report_path):
    """Simulate cascades under background traffic on a follow graph."""
    cfg = _read_config(config_path)
    graph = _load_graph(graph_path)
    delay_model = None
    if model == "ct" or any(k.startswith("delay_bin.") for k in cfg):
        delay_model = delay_model_from(cfg)
    sim_cfg = SimConfig(
        mu=get_float(cfg, "mu"),
        sigma=get_float(cfg, "sigma", get_float(cfg, "mu") / 4.0),
        beta_curve=beta_curve_from(cfg),
        n_cascades=get_int(cfg, "n_cascades"),
        seed=seed,
        delay_model=delay_model,
        max_time=get_float(cfg, "max_time", float("inf")),
    )
    run = simulate_ic_bg if model == "ic" else simulate_ct_bg
    records = run(graph, sim_cfg, workers=workers)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("cascade_id,seed_node,size,duration\n")
        for r in records:
            fh.write(f"{r.cascade_id},{r.seed_node},{r.size},{r.duration:.10g}\n")
    outputs = [out_path]
    if report_path:
        rep = distribution_report(records)
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write("metric,value,ccdf\n")
            for v, c in rep.size_ccdf:
                fh.write(f"size,{v:.10g},{c:.10g}\n")
            for v, c in rep.duration_ccdf:
                fh.write(f"duration,{v:.10g},{c:.10g}\n")
        if rep.duration_empty:
            click.echo("note: no cascades with 2+ nodes; duration table empty", err=True)
        outputs.append(report_path)
    _write_manifest("simulate", dict(cfg) | {"model": model, "workers": workers},
                    [graph_path, config_path], seed, outputs)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--graph", "graph_path", type=click.Path(exists=True),
              help="follow graph TSV; omit to generate from Kronecker keys in config")
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--graph-out", "graph_out", type=click.Path(),
              help="write the (possibly generated) graph TSV here")
@click.option("--truth-out", "truth_path", type=click.Path(),
              help="write the ground-truth key-value report here")
@command_errors
def synth(config_path, graph_path, seed, out_path, graph_out, truth_path):
    """Generate a synthetic event log with known ground truth."""
    cfg = _read_config(config_path)
    if graph_path:
        graph = _load_graph(graph_path)
    else:
        params = KroneckerParams(
            initiator=initiator_from(cfg),
            k=get_int(cfg, "k"),
            target_edges=get_int(cfg, "target_edges"),
            seed=get_int(cfg, "graph_seed", seed),
        )
        graph = kronecker_generate(params)
    plans = []
    idx = 0
    while f"contagion.{idx}.token" in cfg:
        p = f"contagion.{idx}."
        over_h = cfg.get(p + "overload_hazard")
        plans.append(
            ContagionPlan(
                token=cfg[p + "token"],
                n_seeds=get_int(cfg, p + "n_seeds"),
                hazard=get_float(cfg, p + "hazard"),
                overload_hazard=float(over_h) if over_h is not None else None,
                overload_threshold=(
                    get_float(cfg, p + "overload_threshold")
                    if over_h is not None else None
                ),
                adopt_jitter_s=get_int(cfg, p + "adopt_jitter_s", 600),
            )
        )
        idx += 1
    spec = WorkloadSpec(
        graph=graph,
        beta_curve=beta_curve_from(cfg),
        delay_model=delay_model_from(cfg),
        horizon_hours=get_float(cfg, "horizon_hours"),
        seed=seed,
        mu=get_float(cfg, "mu"),
        sigma=get_float(cfg, "sigma", get_float(cfg, "mu") / 4.0),
        contagions=tuple(plans),
    )
    log, truth = generate_workload(spec)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(log.to_tsv())
    click.echo(f"{len(log)} events")
    outputs = [out_path]
    if graph_out:
        with open(graph_out, "w", encoding="utf-8") as fh:
            fh.write(graph.to_tsv())
        outputs.append(graph_out)
    if truth_path:
        with open(truth_path, "w", encoding="utf-8") as fh:
            fh.write(ground_truth_text(truth))
        outputs.append(truth_path)
    _write_manifest("synth", dict(cfg),
                    [p for p in [config_path, graph_path] if p], seed, outputs)


if __name__ == "__main__":
    main()
