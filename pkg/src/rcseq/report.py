"""Report emission: CIS JSON, DOT graphs, tuning CSV, histogram and
deviation-trace data files.

Everything written here is byte-deterministic for identical inputs: JSON is
dumped with sorted keys, CSV floats use repr, DOT ordering is lexicographic,
and no timestamps or environment details are embedded.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .panel import LabeledPanel
from .sequence import CisReport
from .subgraph import CausalSubgraph, GraphDiff, to_dot
from .tuner import ConsolidatedParams, TrendResult, TuningRow

TABLE_COLUMNS = ("KPI Name", "Parameter g", "Probability Estimation", "Optimal n")


class OutputBundle:
    """Tracks files written by one command so a failed stage can clean up."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.written.append(p)
        return p

    def discard(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)
        self.written.clear()


def write_json(path, payload) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cis_to_dict(report: CisReport) -> dict:
    flagged_nodes = set(report.flagged_nodes)
    flagged_edges = set(report.flagged_edges)
    return {
        "steps": [
            {
                "step": i + 1,
                "kpi": e.kpi,
                "onset_tick": e.onset_tick,
                "direction": e.direction,
                "ks_d": e.ks_d,
                "p_adj": e.p_adj,
            }
            for i, e in enumerate(report.steps)
        ],
        "nodes": [
            {"kpi": n, "flagged": n in flagged_nodes} for n in report.subgraph.nodes
        ],
        "edges": [
            {
                "src": e.source,
                "dst": e.target,
                "lag": e.lag,
                "flagged": e.key in flagged_edges,
            }
            for e in report.subgraph.edges
        ],
        "config": report.config,
    }


def write_cis(bundle: OutputBundle, report: CisReport) -> None:
    write_json(bundle.path("cis.json"), cis_to_dict(report))


def write_cis_dot(bundle: OutputBundle, report: CisReport, name="cis.dot") -> None:
    write_text(
        bundle.path(name),
        to_dot(
            report.subgraph,
            flagged_nodes=report.flagged_nodes,
            flagged_edges=report.flagged_edges,
        ),
    )


def write_subgraph_dot(bundle: OutputBundle, graph: CausalSubgraph, name: str) -> None:
    write_text(bundle.path(name), to_dot(graph))


def subgraph_to_dict(graph: CausalSubgraph) -> dict:
    return {
        "nodes": list(graph.nodes),
        "edges": [
            {"src": e.source, "dst": e.target, "lag": e.lag, "r": e.r, "p": e.p}
            for e in graph.edges
        ],
    }


def diff_to_dict(diff: GraphDiff) -> dict:
    def triples(items):
        return [{"src": s, "dst": t, "lag": lag} for s, t, lag in items]

    return {
        "added": triples(diff.added),
        "removed": triples(diff.removed),
        "common": triples(diff.common),
    }


def write_frequency_csv(bundle: OutputBundle, table, name="frequency.csv") -> None:
    with bundle.path(name).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("kpi", "count", "n_runs", "proportion"))
        for kpi, count in zip(table.kpi_names, table.counts):
            writer.writerow((kpi, int(count), table.n_runs, repr(int(count) / table.n_runs)))


def runs_to_dict(runs) -> list[dict]:
    return [
        {
            "run": i,
            "candidates": list(cand.kpis),
            "p_values": {k: p for k, p in cand.p_values},
            "warnings": list(cand.warnings),
        }
        for i, cand in enumerate(runs)
    ]


def write_tuning_csv(bundle: OutputBundle, rows: list[TuningRow], name="tuning.csv") -> None:
    with bundle.path(name).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow((row.kpi, row.g, repr(row.p_hat), row.n_opt))


def write_tuning_params(
    bundle: OutputBundle,
    params: ConsolidatedParams | None,
    trends: list[TrendResult] | None,
    p_thr: float,
    name="tuning_params.json",
) -> None:
    payload = {
        "consolidated": (
            {
                "g_star": params.g_star,
                "n_star": params.n_star,
                "prominent": list(params.prominent),
                "p_thr": p_thr,
            }
            if params is not None
            else {"g_star": None, "n_star": None, "prominent": [], "p_thr": p_thr}
        ),
        "slopes": (
            {
                t.kpi: {
                    "per_g": {str(g): s for g, s in t.slopes},
                    "negative_fraction": t.negative_fraction,
                    "reliable": t.reliable,
                }
                for t in trends
            }
            if trends is not None
            else None
        ),
    }
    write_json(bundle.path(name), payload)


def write_histograms_csv(
    bundle: OutputBundle, labeled: LabeledPanel, kpis, name="histograms.csv"
) -> None:
    """Shared-bin normal/abnormal counts per KPI (Freedman-Diaconis edges
    over the pooled windows; constant KPIs collapse to a single bin)."""
    with bundle.path(name).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("kpi", "bin_left", "bin_right", "normal_count", "abnormal_count"))
        for kpi in kpis:
            normal = labeled.normal_values(kpi)
            abnormal = labeled.abnormal_values(kpi)
            pooled = np.concatenate([normal, abnormal])
            edges = np.histogram_bin_edges(pooled, bins="fd")
            n_counts, _ = np.histogram(normal, bins=edges)
            a_counts, _ = np.histogram(abnormal, bins=edges)
            for left, right, nc, ac in zip(edges[:-1], edges[1:], n_counts, a_counts):
                writer.writerow((kpi, repr(float(left)), repr(float(right)), int(nc), int(ac)))


def write_traces_csv(
    bundle: OutputBundle, ticks, traces: np.ndarray, kpis, name="deviation_traces.csv"
) -> None:
    with bundle.path(name).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("tick", *kpis))
        for tick, row in zip(ticks, traces):
            writer.writerow((int(tick), *(int(v) for v in row)))
