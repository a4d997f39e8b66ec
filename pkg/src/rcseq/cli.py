"""Command-line pipeline orchestration.

Subcommands: synth, label, discover, subgraph, sequence, tune,
compare-states, run-all. Exit codes: 0 success, 2 configuration error,
3 data error, 4 analysis error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import PipelineConfig, apply_overrides, load_config
from .errors import AnalysisError, ConfigError, DataError, RcseqError
from .panel import LabeledPanel, SlaRule, apply_sla_rule, label_states, load_csv, save_csv
from .rcd import rcd_runs, FrequencyTable
from .report import (
    OutputBundle,
    cis_to_dict,
    diff_to_dict,
    runs_to_dict,
    subgraph_to_dict,
    write_cis,
    write_cis_dot,
    write_frequency_csv,
    write_histograms_csv,
    write_json,
    write_subgraph_dot,
    write_traces_csv,
    write_tuning_csv,
    write_tuning_params,
)
from .scm import Scenario, make_scenario, scenario_from_mapping
from .sequence import assemble_cis, detect_events, deviation_traces, order_events
from .subgraph import build_subgraph, graph_diff
from .tuner import consolidate, prominent_sources, run_grid, tuning_rows, variance_trend

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ANALYSIS = 4


def _load_scenario(cfg: PipelineConfig) -> Scenario | None:
    if cfg.scenario:
        return make_scenario(cfg.scenario)
    if cfg.scenario_file:
        try:
            text = Path(cfg.scenario_file).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"scenario file not found: {cfg.scenario_file}") from None
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"could not parse scenario file: {exc}") from exc
        return scenario_from_mapping(doc or {})
    return None


def _load_input(cfg: PipelineConfig):
    """Resolve the configured input into (panel, sla, scenario-or-None)."""
    scenario = _load_scenario(cfg)
    if scenario is not None:
        panel, _ = scenario.build(cfg.seed)
        sla = cfg.sla or scenario.spec.sla
        if sla is None:
            raise ConfigError("scenario defines no SLA rule and none was configured")
        return panel, sla, scenario
    if cfg.input_csv:
        panel = load_csv(
            cfg.input_csv,
            missing=cfg.missing,
            granularity_seconds=cfg.granularity_seconds,
        )
        if cfg.sla is None:
            raise ConfigError("CSV input requires an sla section in the config")
        return panel, cfg.sla, None
    raise ConfigError("no input configured: set input.csv, input.scenario, or input.scenario_file")


def _label_geometry(cfg: PipelineConfig, scenario: Scenario | None):
    lab = cfg.label
    if scenario is not None:
        return (
            lab.normal_len if lab.normal_len is not None else scenario.normal_len,
            lab.abnormal_len if lab.abnormal_len is not None else scenario.abnormal_len,
            lab.lead_ticks if lab.lead_ticks is not None else scenario.lead_ticks,
        )
    return (
        lab.normal_len if lab.normal_len is not None else 120,
        lab.abnormal_len if lab.abnormal_len is not None else 120,
        lab.lead_ticks if lab.lead_ticks is not None else 0,
    )


def _stage_label(cfg: PipelineConfig, panel, sla: SlaRule, scenario):
    """Returns (labeled, breaches) or (None, []) when the SLA never breaches."""
    breaches = apply_sla_rule(panel, sla)
    if not breaches:
        return None, []
    if cfg.label.breach_index >= len(breaches):
        raise DataError(
            f"breach_index {cfg.label.breach_index} out of range "
            f"({len(breaches)} breach ranges found)"
        )
    normal_len, abnormal_len, lead = _label_geometry(cfg, scenario)
    labeled = label_states(
        panel,
        breaches[cfg.label.breach_index],
        normal_len,
        abnormal_len,
        lead_ticks=lead,
    )
    return labeled, breaches


def _stage_discover(cfg: PipelineConfig, labeled: LabeledPanel, sla: SlaRule):
    exclude = () if cfg.include_sla_in_rcd else (sla.metric,)
    runs = rcd_runs(labeled, cfg.rcd, exclude=exclude, jobs=cfg.jobs)
    names = tuple(k for k in labeled.panel.kpi_names if k not in exclude)
    counts = [sum(1 for cand in runs if kpi in cand.kpis) for kpi in names]
    table = FrequencyTable(kpi_names=names, counts=np.asarray(counts), n_runs=cfg.rcd.n_runs)
    candidates = [
        kpi
        for kpi, count in zip(names, counts)
        if count / cfg.rcd.n_runs >= cfg.candidate_threshold
    ]
    return table, runs, candidates


def _scan_set(candidates, sla: SlaRule) -> list[str]:
    return list(dict.fromkeys([*candidates, sla.metric]))


def _empty_cis(cfg: PipelineConfig) -> dict:
    return {
        "steps": [],
        "nodes": [],
        "edges": [],
        "config": _cis_config_echo(cfg),
    }


def _cis_config_echo(cfg: PipelineConfig) -> dict:
    return {
        "cis_alpha": cfg.cis.alpha,
        "window": cfg.cis.window,
        "stride": cfg.cis.stride,
        "correction": cfg.cis.correction,
        "z_thr": cfg.cis.z_thr,
    }


def _metadata(cfg: PipelineConfig, **extra) -> dict:
    doc = {"version": __version__, "config": cfg.echo()}
    doc.update(extra)
    return doc


def cmd_synth(cfg: PipelineConfig) -> int:
    scenario = _load_scenario(cfg)
    if scenario is None:
        raise ConfigError("synth requires input.scenario or input.scenario_file")
    panel, truth = scenario.build(cfg.seed)
    bundle = OutputBundle(cfg.out_dir)
    try:
        save_csv(panel, bundle.path(f"{scenario.name}_panel.csv"))
        write_json(
            bundle.path(f"{scenario.name}_truth.json"),
            {
                "scenario": scenario.name,
                "seed": cfg.seed,
                "horizon": scenario.horizon,
                "normal_len": scenario.normal_len,
                "abnormal_len": scenario.abnormal_len,
                "lead_ticks": scenario.lead_ticks,
                "sla": asdict(scenario.spec.sla) if scenario.spec.sla else None,
                "interventions": [asdict(iv) for iv in truth.interventions],
                "edges": [list(e) for e in truth.edges],
                "propagation": [[n, t] for n, t in truth.propagation],
            },
        )
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


def cmd_label(cfg: PipelineConfig) -> int:
    panel, sla, scenario = _load_input(cfg)
    labeled, breaches = _stage_label(cfg, panel, sla, scenario)
    bundle = OutputBundle(cfg.out_dir)
    try:
        write_json(
            bundle.path("labels.json"),
            {
                "sla": asdict(sla),
                "breaches": [list(b) for b in breaches],
                "normal_window": list(labeled.normal_window) if labeled else None,
                "abnormal_window": list(labeled.abnormal_window) if labeled else None,
            },
        )
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


def cmd_discover(cfg: PipelineConfig) -> int:
    panel, sla, scenario = _load_input(cfg)
    labeled, _ = _stage_label(cfg, panel, sla, scenario)
    if labeled is None:
        raise DataError("no SLA breach found; nothing to discover")
    table, runs, candidates = _stage_discover(cfg, labeled, sla)
    bundle = OutputBundle(cfg.out_dir)
    try:
        write_frequency_csv(bundle, table)
        write_json(
            bundle.path("rcd_runs.json"),
            _metadata(cfg, candidates=candidates, runs=runs_to_dict(runs)),
        )
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


def cmd_subgraph(cfg: PipelineConfig) -> int:
    panel, sla, scenario = _load_input(cfg)
    labeled, _ = _stage_label(cfg, panel, sla, scenario)
    if labeled is None:
        raise DataError("no SLA breach found; nothing to analyze")
    _, _, candidates = _stage_discover(cfg, labeled, sla)
    nodes = _scan_set(candidates, sla)
    graph = build_subgraph(
        labeled.window_panel("normal"),
        nodes,
        cfg.subgraph.tau_max,
        cfg.subgraph.alpha,
        cfg.subgraph.max_cond,
    )
    bundle = OutputBundle(cfg.out_dir)
    try:
        write_subgraph_dot(bundle, graph, "subgraph.dot")
        write_json(bundle.path("subgraph.json"), subgraph_to_dict(graph))
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


def _run_pipeline(cfg: PipelineConfig):
    """Shared label -> discover -> subgraph -> sequence execution."""
    panel, sla, scenario = _load_input(cfg)
    labeled, breaches = _stage_label(cfg, panel, sla, scenario)
    if labeled is None:
        return None
    table, runs, candidates = _stage_discover(cfg, labeled, sla)
    nodes = _scan_set(candidates, sla)
    graph = build_subgraph(
        labeled.window_panel("normal"),
        nodes,
        cfg.subgraph.tau_max,
        cfg.subgraph.alpha,
        cfg.subgraph.max_cond,
    )
    events = detect_events(
        labeled,
        nodes,
        window=cfg.cis.window,
        stride=cfg.cis.stride,
        cis_alpha=cfg.cis.alpha,
        correction=cfg.cis.correction,
        z_thr=cfg.cis.z_thr,
    )
    steps = order_events(events)
    report = assemble_cis(graph, steps, sla.metric, config=_cis_config_echo(cfg))
    return {
        "panel": panel,
        "sla": sla,
        "labeled": labeled,
        "breaches": breaches,
        "table": table,
        "runs": runs,
        "candidates": candidates,
        "graph": graph,
        "events": events,
        "report": report,
        "nodes": nodes,
    }


def cmd_sequence(cfg: PipelineConfig) -> int:
    state = _run_pipeline(cfg)
    bundle = OutputBundle(cfg.out_dir)
    try:
        if state is None:
            write_json(bundle.path("cis.json"), _empty_cis(cfg))
            return EXIT_OK
        write_cis(bundle, state["report"])
        traces, kpis = deviation_traces(
            state["labeled"],
            state["events"],
            state["nodes"],
            window=cfg.cis.window,
            z_thr=cfg.cis.z_thr,
        )
        write_traces_csv(bundle, state["labeled"].panel.ticks, traces, kpis)
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


def cmd_run_all(cfg: PipelineConfig) -> int:
    state = _run_pipeline(cfg)
    bundle = OutputBundle(cfg.out_dir)
    try:
        if state is None:
            write_json(bundle.path("cis.json"), _empty_cis(cfg))
            write_json(
                bundle.path("run_metadata.json"),
                _metadata(cfg, breaches=[], no_breach=True),
            )
            return EXIT_OK
        labeled = state["labeled"]
        write_cis(bundle, state["report"])
        write_cis_dot(bundle, state["report"], "subgraph.dot")
        traces, kpis = deviation_traces(
            labeled,
            state["events"],
            state["nodes"],
            window=cfg.cis.window,
            z_thr=cfg.cis.z_thr,
        )
        write_traces_csv(bundle, labeled.panel.ticks, traces, kpis)
        write_histograms_csv(bundle, labeled, state["nodes"])
        write_json(
            bundle.path("run_metadata.json"),
            _metadata(
                cfg,
                breaches=[list(b) for b in state["breaches"]],
                normal_window=list(labeled.normal_window),
                abnormal_window=list(labeled.abnormal_window),
                candidates=state["candidates"],
                frequencies={
                    k: c / state["table"].n_runs
                    for k, c in zip(state["table"].kpi_names, state["table"].counts.tolist())
                },
                runs=runs_to_dict(state["runs"]),
            ),
        )
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


def cmd_tune(cfg: PipelineConfig) -> int:
    panel, sla, scenario = _load_input(cfg)
    labeled, _ = _stage_label(cfg, panel, sla, scenario)
    if labeled is None:
        raise DataError("no SLA breach found; nothing to tune against")
    exclude = () if cfg.include_sla_in_rcd else (sla.metric,)
    v = panel.n_kpis
    g_values = cfg.mc.g_values if cfg.mc.g_values is not None else tuple(range(3, v + 1))
    grid = run_grid(
        labeled,
        g_values=g_values,
        n_values=cfg.mc.n_values,
        base_cfg=cfg.rcd,
        seed=cfg.seed,
        exclude=exclude,
        jobs=cfg.jobs,
    )
    rows = tuning_rows(grid, n_mode=cfg.mc.n_mode)
    prominent = prominent_sources(rows, p_thr=cfg.mc.p_thr)
    params = None
    if prominent:
        params = consolidate(rows, prominent, p_thr=cfg.mc.p_thr)
    trends = None
    if len(grid.n_values) >= 3:
        trends = [variance_trend(grid, kpi) for kpi in grid.kpi_names]
    bundle = OutputBundle(cfg.out_dir)
    try:
        write_tuning_csv(bundle, rows)
        write_tuning_params(bundle, params, trends, cfg.mc.p_thr)
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


def cmd_compare_states(cfg: PipelineConfig) -> int:
    panel, sla, scenario = _load_input(cfg)
    labeled, _ = _stage_label(cfg, panel, sla, scenario)
    if labeled is None:
        raise DataError("no SLA breach found; nothing to compare")
    nodes = tuple(panel.kpi_names)
    normal = build_subgraph(
        labeled.window_panel("normal"),
        nodes,
        cfg.subgraph.tau_max,
        cfg.subgraph.alpha,
        cfg.subgraph.max_cond,
    )
    abnormal = build_subgraph(
        labeled.window_panel("abnormal"),
        nodes,
        cfg.subgraph.tau_max,
        cfg.subgraph.alpha,
        cfg.subgraph.max_cond,
    )
    diff = graph_diff(normal, abnormal)
    bundle = OutputBundle(cfg.out_dir)
    try:
        write_subgraph_dot(bundle, normal, "subgraph_normal.dot")
        write_subgraph_dot(bundle, abnormal, "subgraph_abnormal.dot")
        write_json(bundle.path("graph_diff.json"), diff_to_dict(diff))
    except BaseException:
        bundle.discard()
        raise
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "label": cmd_label,
    "discover": cmd_discover,
    "subgraph": cmd_subgraph,
    "sequence": cmd_sequence,
    "tune": cmd_tune,
    "compare-states": cmd_compare_states,
    "run-all": cmd_run_all,
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="YAML config file")
    sub.add_argument("--seed", type=int, help="master seed override")
    sub.add_argument("--out", help="output directory override")
    sub.add_argument("--jobs", type=int, help="worker parallelism cap")
    sub.add_argument("--cis-alpha", type=float, help="CIS significance override")
    sub.add_argument("--input", help="input panel CSV (overrides config)")
    sub.add_argument("--scenario", help="canned scenario name (overrides config)")
    sub.add_argument("--scenario-file", help="declarative scenario YAML (overrides config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcseq",
        description="Root-cause sequence analysis for multivariate KPI telemetry",
    )
    parser.add_argument("--version", action="version", version=f"rcseq {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    help_text = {
        "synth": "generate a synthetic fault scenario (panel CSV + ground truth JSON)",
        "label": "evaluate the SLA rule and emit the window labeling",
        "discover": "run root-cause discovery and emit the frequency table",
        "subgraph": "build the normal-state causal subgraph over the candidates",
        "sequence": "emit the causal intervention sequence report",
        "tune": "Monte Carlo parameter sweep and consolidated g*/n*",
        "compare-states": "diff normal-state vs abnormal-state subgraphs",
        "run-all": "full pipeline: label, discover, subgraph, sequence, reports",
    }
    for name, fn in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text[name])
        _add_common(sub)
        sub.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(
            cfg,
            seed=args.seed,
            out_dir=args.out,
            jobs=args.jobs,
            cis_alpha=args.cis_alpha,
            input_csv=args.input,
            scenario=args.scenario,
            scenario_file=args.scenario_file,
        )
        return args.fn(cfg)
    except ConfigError as exc:
        print(f"rcseq: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"rcseq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AnalysisError, RcseqError) as exc:
        print(f"rcseq: analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
