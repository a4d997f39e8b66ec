"""Deviation-onset detection and causal intervention sequence assembly.

A window slides over each KPI's abnormal segment and is compared to the
full normal-window baseline with the two-sample K-S test. Raw p-values are
corrected across the whole batch (every window of every scanned KPI), the
earliest window whose adjusted p clears the significance level marks the
onset, a Z-score codes the deviation direction, and the resulting events
are STEP-ordered and overlaid on the causal subgraph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnalysisError
from .panel import LabeledPanel
from .stats import bh_adjust, bonferroni, direction_code, ks_two_sample, z_score
from .subgraph import CausalSubgraph

CORRECTIONS = ("bonferroni", "bh_fdr", "none")

__all__ = [
    "DeviationEvent",
    "CisReport",
    "window_offsets",
    "rolling_ks_onset",
    "detect_events",
    "direction_at_onset",
    "order_events",
    "assemble_cis",
]


@dataclass(frozen=True)
class DeviationEvent:
    """One KPI's detected deviation: onset tick (panel row), direction in
    {-1, 0, +1}, the K-S statistic and adjusted p at the onset window, and
    the correction that produced the adjusted p. `hard_constant` marks a
    KPI whose normal window had zero variance."""

    kpi: str
    onset_tick: int
    direction: int
    ks_d: float
    p_adj: float
    correction: str
    hard_constant: bool = False


@dataclass(frozen=True)
class CisReport:
    """STEP-ordered deviation events overlaid on the causal subgraph."""

    steps: tuple[DeviationEvent, ...]
    subgraph: CausalSubgraph
    flagged_nodes: tuple[str, ...]
    flagged_edges: tuple[tuple[str, str, int], ...]
    sla_metric: str
    config: dict


def window_offsets(segment_len: int, window: int, stride: int) -> list[int]:
    """Start offsets of every full window inside a segment."""
    if window < 8:
        raise AnalysisError(f"window must be >= 8 ticks, got {window}")
    if stride < 1:
        raise AnalysisError(f"stride must be >= 1, got {stride}")
    return list(range(0, segment_len - window + 1, stride))


def _adjust(p_raw: np.ndarray, correction: str, m_total: int) -> np.ndarray:
    if correction == "bonferroni":
        return bonferroni(p_raw, m=m_total)
    if correction == "bh_fdr":
        return bh_adjust(p_raw)
    if correction == "none":
        return np.asarray(p_raw, dtype=float)
    raise AnalysisError(f"correction must be one of {CORRECTIONS}, got {correction!r}")


def rolling_ks_onset(
    series,
    baseline,
    window: int,
    stride: int,
    cis_alpha: float,
    correction: str = "bh_fdr",
):
    """Scan one KPI's abnormal segment (batch of one).

    Returns (onset offset or None, raw p per window, adjusted p per window,
    K-S d per window). The onset is the start of the earliest window whose
    adjusted p-value is <= cis_alpha.
    """
    series = np.asarray(series, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if baseline.size < window:
        raise AnalysisError(
            f"baseline sample ({baseline.size}) must be at least one window ({window})"
        )
    if series.size < window:
        raise AnalysisError(
            f"abnormal segment ({series.size}) shorter than one window ({window})"
        )
    offsets = window_offsets(series.size, window, stride)
    results = [ks_two_sample(series[o : o + window], baseline) for o in offsets]
    p_raw = np.array([r.p_raw for r in results])
    d = np.array([r.d for r in results])
    p_adj = _adjust(p_raw, correction, m_total=len(offsets))
    hits = np.nonzero(p_adj <= cis_alpha)[0]
    onset = int(offsets[hits[0]]) if hits.size else None
    return onset, p_raw, p_adj, d


def direction_at_onset(
    series,
    onset: int,
    window: int,
    mu: float,
    sigma: float,
    z_thr: float,
) -> tuple[int, bool]:
    """Direction of the onset window's mean relative to the normal state.

    With sigma = 0 (hard-constant normal window) the direction is the sign
    of the raw difference and the event is flagged hard-constant.
    """
    series = np.asarray(series, dtype=float)
    win_mean = float(series[onset : onset + window].mean())
    if sigma == 0.0:
        return int(np.sign(win_mean - mu)), True
    return direction_code(z_score(win_mean, mu, sigma), z_thr), False


def detect_events(
    labeled: LabeledPanel,
    kpis,
    window: int = 16,
    stride: int = 4,
    cis_alpha: float = 0.1,
    correction: str = "bh_fdr",
    z_thr: float = 3.0,
) -> tuple[DeviationEvent, ...]:
    """Batch onset scan over the given KPIs.

    The correction is applied jointly across all windows of all KPIs
    (m = #KPIs x #windows); onsets are reported as absolute panel rows.
    """
    if correction not in CORRECTIONS:
        raise AnalysisError(f"correction must be one of {CORRECTIONS}, got {correction!r}")
    kpis = list(kpis)
    if not kpis:
        return ()
    a0, a1 = labeled.abnormal_window
    offsets = window_offsets(a1 - a0, window, stride)
    n0, n1 = labeled.normal_window
    if n1 - n0 < window:
        raise AnalysisError(
            f"baseline window ({n1 - n0} ticks) must be at least one window ({window})"
        )
    raw = np.empty((len(kpis), len(offsets)))
    dstat = np.empty_like(raw)
    for i, kpi in enumerate(kpis):
        baseline = labeled.normal_values(kpi)
        segment = labeled.abnormal_values(kpi)
        for j, off in enumerate(offsets):
            res = ks_two_sample(segment[off : off + window], baseline)
            raw[i, j] = res.p_raw
            dstat[i, j] = res.d
    adjusted = _adjust(raw.ravel(), correction, m_total=raw.size).reshape(raw.shape)
    events = []
    for i, kpi in enumerate(kpis):
        hits = np.nonzero(adjusted[i] <= cis_alpha)[0]
        if not hits.size:
            continue
        j = int(hits[0])
        onset = a0 + offsets[j]
        baseline = labeled.normal_values(kpi)
        mu = float(baseline.mean())
        sigma = float(baseline.std(ddof=1)) if baseline.size > 1 else 0.0
        segment = labeled.abnormal_values(kpi)
        direction, hard = direction_at_onset(
            segment, offsets[j], window, mu, sigma, z_thr
        )
        events.append(
            DeviationEvent(
                kpi=kpi,
                onset_tick=int(onset),
                direction=direction,
                ks_d=float(dstat[i, j]),
                p_adj=float(adjusted[i, j]),
                correction=correction,
                hard_constant=hard,
            )
        )
    return tuple(events)


def order_events(events) -> tuple[DeviationEvent, ...]:
    """STEP ordering: ascending onset, ties broken by larger K-S statistic,
    then lexicographic KPI name. Position k is STEP k+1."""
    return tuple(sorted(events, key=lambda e: (e.onset_tick, -e.ks_d, e.kpi)))


def assemble_cis(
    subgraph: CausalSubgraph,
    steps,
    sla_metric: str,
    config: dict | None = None,
) -> CisReport:
    """Overlay ordered events on the subgraph.

    Every step KPI is flagged; an edge is flagged as part of the sequence
    path when both endpoints have events and the source's onset does not
    come after the target's. The SLA metric is the terminal node.
    """
    steps = order_events(steps)
    if sla_metric not in subgraph.nodes:
        raise AnalysisError(f"SLA metric {sla_metric!r} missing from subgraph nodes")
    onsets = {}
    for event in steps:
        if event.kpi not in subgraph.nodes:
            raise AnalysisError(
                f"step KPI {event.kpi!r} is not a subgraph node (stage mismatch)"
            )
        onsets[event.kpi] = event.onset_tick
    flagged_edges = tuple(
        edge.key
        for edge in subgraph.edges
        if edge.source in onsets
        and edge.target in onsets
        and onsets[edge.source] <= onsets[edge.target]
    )
    return CisReport(
        steps=steps,
        subgraph=subgraph,
        flagged_nodes=tuple(e.kpi for e in steps),
        flagged_edges=flagged_edges,
        sla_metric=sla_metric,
        config=dict(config or {}),
    )


def deviation_traces(
    labeled: LabeledPanel,
    events,
    kpis,
    window: int = 16,
    z_thr: float = 3.0,
) -> tuple[np.ndarray, list[str]]:
    """Per-tick deviation traces in {-1, 0, +1} for export.

    Zero before a KPI's detected onset (and everywhere for KPIs without an
    event); from the onset onward each tick carries the direction code of
    the forward window starting there, so a detected shift reads as a
    sustained +1/-1 band once the window clears the transition.
    """
    kpis = list(kpis)
    by_kpi = {e.kpi: e for e in events}
    t = labeled.panel.n_ticks
    traces = np.zeros((t, len(kpis)), dtype=np.int8)
    for j, kpi in enumerate(kpis):
        event = by_kpi.get(kpi)
        if event is None:
            continue
        series = labeled.panel.column(kpi)
        baseline = labeled.normal_values(kpi)
        mu = float(baseline.mean())
        sigma = float(baseline.std(ddof=1)) if baseline.size > 1 else 0.0
        end = labeled.abnormal_window[1]
        for tick in range(event.onset_tick, end):
            chunk = series[tick : min(tick + window, end)]
            mean = float(chunk.mean())
            if sigma == 0.0:
                traces[tick, j] = int(np.sign(mean - mu))
            else:
                traces[tick, j] = direction_code(z_score(mean, mu, sigma), z_thr)
    return traces, kpis
