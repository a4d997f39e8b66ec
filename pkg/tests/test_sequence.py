import numpy as np
import pytest

from rcseq.errors import AnalysisError
from rcseq.panel import KpiPanel, label_states
from rcseq.scm import cascade_scenario
from rcseq.sequence import (
    DeviationEvent,
    assemble_cis,
    detect_events,
    deviation_traces,
    direction_at_onset,
    order_events,
    rolling_ks_onset,
    window_offsets,
)
from rcseq.subgraph import CausalSubgraph, LaggedEdge


def step_change_labeled(seed, t0=160, shift=5.0, t=240, n_kpis=3):
    """KPI 0 steps by `shift` at absolute tick t0; others stay white noise."""
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((t, n_kpis))
    values[t0:, 0] += shift
    panel = KpiPanel(
        ticks=np.arange(t),
        kpi_names=tuple(f"k{i}" for i in range(n_kpis)),
        values=values,
    )
    return label_states(panel, 120, normal_len=120, abnormal_len=120)


def cascade_labeled(seed):
    sc = cascade_scenario()
    panel, truth = sc.build(seed)
    return label_states(panel, 140, normal_len=120, abnormal_len=120, lead_ticks=20), truth


def event(kpi, onset, d=0.9, direction=1):
    return DeviationEvent(
        kpi=kpi, onset_tick=onset, direction=direction, ks_d=d, p_adj=0.01,
        correction="bh_fdr",
    )


class TestWindows:
    def test_offsets(self):
        assert window_offsets(40, 16, 4) == [0, 4, 8, 12, 16, 20, 24]

    def test_window_minimum(self):
        with pytest.raises(AnalysisError, match=">= 8"):
            window_offsets(40, 4, 2)


class TestRollingKsOnset:
    def test_step_change_found(self):
        # detected onset within one window width of the true change point
        hit = 0
        for seed in range(50):
            labeled = step_change_labeled(seed)
            onset, _, _, _ = rolling_ks_onset(
                labeled.abnormal_values("k0"),
                labeled.normal_values("k0"),
                window=16,
                stride=4,
                cis_alpha=0.1,
                correction="bonferroni",
            )
            # absolute onset = 120 + offset; true change at 160
            if onset is not None and abs(120 + onset - 160) <= 16:
                hit += 1
        assert hit >= 45

    def test_no_change_mostly_none(self):
        nones = 0
        for seed in range(50):
            labeled = step_change_labeled(seed)
            onset, _, _, _ = rolling_ks_onset(
                labeled.abnormal_values("k1"),
                labeled.normal_values("k1"),
                window=16,
                stride=4,
                cis_alpha=0.1,
                correction="bh_fdr",
            )
            if onset is None:
                nones += 1
        assert nones >= 45

    def test_identical_segments_all_zero_d(self):
        baseline = np.arange(32.0)
        onset, _, _, d = rolling_ks_onset(
            baseline.copy(), baseline, window=32, stride=1, cis_alpha=0.1
        )
        assert np.all(d == 0.0)
        assert onset is None

    def test_short_baseline_rejected(self):
        with pytest.raises(AnalysisError, match="baseline"):
            rolling_ks_onset(np.zeros(20), np.zeros(4), 16, 4, 0.1)

    def test_short_segment_rejected(self):
        with pytest.raises(AnalysisError, match="segment"):
            rolling_ks_onset(np.zeros(4), np.zeros(20), 16, 4, 0.1)


class TestDirection:
    def test_up_down(self):
        series = np.r_[np.zeros(10), np.full(16, 5.0)]
        assert direction_at_onset(series, 10, 16, mu=0.0, sigma=1.0, z_thr=3.0) == (1, False)
        series = np.r_[np.zeros(10), np.full(16, -5.0)]
        assert direction_at_onset(series, 10, 16, mu=0.0, sigma=1.0, z_thr=3.0) == (-1, False)

    def test_hard_constant_normal_window(self):
        series = np.full(30, 7.0)
        direction, hard = direction_at_onset(series, 0, 16, mu=2.0, sigma=0.0, z_thr=3.0)
        assert (direction, hard) == (1, True)

    def test_small_shift_codes_zero(self):
        series = np.full(30, 1.0)
        direction, hard = direction_at_onset(series, 0, 16, mu=0.0, sigma=1.0, z_thr=3.0)
        assert (direction, hard) == (0, False)


class TestDetectEvents:
    def test_cascade_order_and_onsets(self):
        ok = 0
        for seed in range(20):
            labeled, truth = cascade_labeled(seed)
            events = detect_events(
                labeled,
                kpis=labeled.panel.kpi_names,
                window=16,
                stride=4,
                cis_alpha=0.1,
                correction="bh_fdr",
            )
            ordered = order_events(events)
            names = [e.kpi for e in ordered]
            try:
                good = (
                    names.index("cce_load")
                    < names.index("prb_util")
                    < names.index("dl_throughput")
                )
            except ValueError:
                good = False
            if good:
                for e in ordered:
                    true_onset = truth.onset_of(e.kpi)
                    if true_onset is not None and abs(e.onset_tick - true_onset) > 16:
                        good = False
            if good:
                ok += 1
        assert ok >= 18

    def test_alpha_monotone_event_sets(self):
        for seed in range(10):
            labeled, _ = cascade_labeled(seed)
            tight = detect_events(labeled, labeled.panel.kpi_names, cis_alpha=0.05)
            loose = detect_events(labeled, labeled.panel.kpi_names, cis_alpha=0.1)
            assert {e.kpi for e in tight} <= {e.kpi for e in loose}

    def test_empty_kpi_list(self):
        labeled, _ = cascade_labeled(0)
        assert detect_events(labeled, []) == ()

    def test_direction_signs_on_cascade_traces(self):
        # once the forward window clears the transition, the per-tick codes
        # settle on the true deviation signs
        labeled, _ = cascade_labeled(1)
        events = detect_events(labeled, labeled.panel.kpi_names)
        traces, kpis = deviation_traces(labeled, events, labeled.panel.kpi_names)
        at = 180  # deep inside the deviated region
        assert traces[at, kpis.index("cce_load")] == 1  # soft shift upward
        assert traces[at, kpis.index("prb_util")] == 1  # pinned above its mean
        assert traces[at, kpis.index("dl_throughput")] == -1  # throughput collapse


class TestOrderEvents:
    def test_sort_by_onset(self):
        ordered = order_events([event("B", 120), event("A", 50)])
        assert [e.kpi for e in ordered] == ["A", "B"]

    def test_tie_broken_by_statistic(self):
        ordered = order_events([event("weak", 50, d=0.4), event("strong", 50, d=0.9)])
        assert [e.kpi for e in ordered] == ["strong", "weak"]

    def test_tie_broken_by_name_last(self):
        ordered = order_events([event("b", 50, d=0.5), event("a", 50, d=0.5)])
        assert [e.kpi for e in ordered] == ["a", "b"]

    def test_single_event(self):
        assert [e.kpi for e in order_events([event("x", 1)])] == ["x"]


class TestAssembleCis:
    def graph(self):
        return CausalSubgraph(
            nodes=("A", "B", "SLA", "N"),
            edges=(
                LaggedEdge("A", "B", 2, 0.8, 0.001),
                LaggedEdge("B", "SLA", 2, -0.8, 0.001),
            ),
        )

    def test_cascade_flags_both_edges(self):
        report = assemble_cis(
            self.graph(),
            [event("A", 10), event("B", 14), event("SLA", 18)],
            sla_metric="SLA",
        )
        assert report.flagged_nodes == ("A", "B", "SLA")
        assert set(report.flagged_edges) == {("A", "B", 2), ("B", "SLA", 2)}

    def test_event_without_edges(self):
        report = assemble_cis(self.graph(), [event("N", 5)], sla_metric="SLA")
        assert report.flagged_nodes == ("N",)
        assert report.flagged_edges == ()

    def test_empty_steps(self):
        report = assemble_cis(self.graph(), [], sla_metric="SLA")
        assert report.steps == ()
        assert report.flagged_nodes == ()

    def test_onset_rule_blocks_reverse_edges(self):
        report = assemble_cis(
            self.graph(), [event("A", 30), event("B", 10)], sla_metric="SLA"
        )
        assert ("A", "B", 2) not in report.flagged_edges

    def test_unknown_step_kpi(self):
        with pytest.raises(AnalysisError, match="stage mismatch"):
            assemble_cis(self.graph(), [event("ghost", 3)], sla_metric="SLA")

    def test_missing_sla(self):
        with pytest.raises(AnalysisError, match="SLA metric"):
            assemble_cis(self.graph(), [], sla_metric="nope")


class TestTraces:
    def test_zero_before_onset_and_for_quiet_kpis(self):
        labeled, _ = cascade_labeled(0)
        events = [event("cce_load", 130)]
        traces, kpis = deviation_traces(labeled, events, ["cce_load", "sinr_avg"])
        col = traces[:, kpis.index("cce_load")]
        assert np.all(col[:130] == 0)
        assert np.all(col[140:220] == 1)  # +4 sigma soft shift reads as +1
        assert np.all(traces[:, kpis.index("sinr_avg")] == 0)

    def test_values_in_code_alphabet(self):
        labeled, _ = cascade_labeled(2)
        events = detect_events(labeled, labeled.panel.kpi_names)
        traces, _ = deviation_traces(labeled, events, labeled.panel.kpi_names)
        assert set(np.unique(traces)) <= {-1, 0, 1}
