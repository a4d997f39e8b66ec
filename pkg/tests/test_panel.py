import numpy as np
import pytest

from rcseq.errors import DataError
from rcseq.panel import (
    KpiPanel,
    LabeledPanel,
    SlaRule,
    apply_sla_rule,
    label_states,
    load_csv,
    save_csv,
)


def write_csv(tmp_path, text, name="panel.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def make_panel(values, names=None):
    values = np.asarray(values, dtype=float)
    names = tuple(names or (f"k{i}" for i in range(values.shape[1])))
    return KpiPanel(ticks=np.arange(values.shape[0]), kpi_names=names, values=values)


class TestLoadCsv:
    def test_basic_parse(self, tmp_path):
        p = write_csv(tmp_path, "t,A,B\n0,1.0,2.0\n1,1.5,2.5\n2,2.0,3.0\n")
        panel = load_csv(p)
        assert panel.n_ticks == 3
        assert panel.n_kpis == 2
        assert panel.kpi_names == ("A", "B")
        assert np.array_equal(panel.column("A"), [1.0, 1.5, 2.0])

    def test_duplicate_kpi_name(self, tmp_path):
        p = write_csv(tmp_path, "t,A,A\n0,1,2\n")
        with pytest.raises(DataError, match="duplicate KPI name"):
            load_csv(p)

    def test_linear_interpolation(self, tmp_path):
        p = write_csv(tmp_path, "t,A\n0,1.0\n1,\n2,3.0\n")
        panel = load_csv(p, missing="linear-interpolate")
        assert panel.column("A")[1] == 2.0

    def test_missing_fails_by_default(self, tmp_path):
        p = write_csv(tmp_path, "t,A\n0,1.0\n1,\n2,3.0\n")
        with pytest.raises(DataError, match="line 3.*'A'"):
            load_csv(p)

    def test_missing_drop_row(self, tmp_path):
        p = write_csv(tmp_path, "t,A,B\n0,1.0,5.0\n1,,6.0\n2,3.0,7.0\n")
        panel = load_csv(p, missing="drop-row")
        assert panel.n_ticks == 2
        assert np.array_equal(panel.ticks, [0, 2])

    def test_edge_missing_not_interpolatable(self, tmp_path):
        p = write_csv(tmp_path, "t,A\n0,\n1,2.0\n")
        with pytest.raises(DataError, match="line 2"):
            load_csv(p, missing="linear-interpolate")

    def test_malformed_value_names_line(self, tmp_path):
        p = write_csv(tmp_path, "t,A\n0,1.0\n1,oops\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(p)

    def test_ragged_row(self, tmp_path):
        p = write_csv(tmp_path, "t,A,B\n0,1.0\n")
        with pytest.raises(DataError, match="line 2"):
            load_csv(p)

    def test_non_monotone_timestamps(self, tmp_path):
        p = write_csv(tmp_path, "t,A\n0,1.0\n2,2.0\n1,3.0\n")
        with pytest.raises(DataError, match="strictly increasing"):
            load_csv(p)

    def test_iso_timestamps_normalize(self, tmp_path):
        p = write_csv(
            tmp_path,
            "time,A\n2025-01-01T00:00:00,1.0\n2025-01-01T00:00:15,2.0\n"
            "2025-01-01T00:00:30,3.0\n",
        )
        panel = load_csv(p, granularity_seconds=15)
        assert np.array_equal(panel.ticks, [0, 1, 2])

    def test_iso_off_grid(self, tmp_path):
        p = write_csv(
            tmp_path,
            "time,A\n2025-01-01T00:00:00,1.0\n2025-01-01T00:00:07,2.0\n",
        )
        with pytest.raises(DataError, match="granularity"):
            load_csv(p, granularity_seconds=15)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "nope.csv")

    def test_round_trip_value_identical(self, tmp_path):
        rng = np.random.default_rng(31)
        panel = make_panel(rng.normal(size=(40, 3)) * 1234.5678, names=("a", "b", "c"))
        out = tmp_path / "rt.csv"
        save_csv(panel, out)
        back = load_csv(out)
        assert back.kpi_names == panel.kpi_names
        assert np.array_equal(back.ticks, panel.ticks)
        assert np.array_equal(back.values, panel.values)


class TestPanelInvariants:
    def test_values_read_only(self):
        panel = make_panel([[1.0, 2.0]])
        with pytest.raises(ValueError):
            panel.values[0, 0] = 9.0

    def test_non_finite_rejected(self):
        with pytest.raises(DataError, match="finite"):
            make_panel([[1.0], [np.inf]])

    def test_restrict_preserves_order(self):
        panel = make_panel([[1.0, 2.0, 3.0]], names=("a", "b", "c"))
        sub = panel.restrict(["c", "a"])
        assert sub.kpi_names == ("c", "a")
        assert np.array_equal(sub.values, [[3.0, 1.0]])


class TestApplySlaRule:
    def test_breach_range(self):
        panel = make_panel(np.array([[600.0], [480.0], [470.0], [520.0]]), names=("DL",))
        rule = SlaRule(metric="DL", comparator="<", threshold=500.0, min_duration_ticks=2)
        assert apply_sla_rule(panel, rule) == [(1, 3)]

    def test_no_breach(self):
        panel = make_panel(np.array([[600.0], [700.0]]), names=("DL",))
        rule = SlaRule("DL", "<", 500.0, 2)
        assert apply_sla_rule(panel, rule) == []

    def test_maximal_run(self):
        panel = make_panel(np.array([[450.0], [450.0], [450.0]]), names=("DL",))
        rule = SlaRule("DL", "<", 500.0, 2)
        assert apply_sla_rule(panel, rule) == [(0, 3)]

    def test_short_runs_filtered(self):
        panel = make_panel(
            np.array([[450.0], [600.0], [450.0], [450.0], [600.0]]), names=("DL",)
        )
        rule = SlaRule("DL", "<", 500.0, 2)
        assert apply_sla_rule(panel, rule) == [(2, 4)]

    def test_unknown_metric(self):
        panel = make_panel([[1.0]], names=("A",))
        with pytest.raises(DataError, match="unknown metric.*'B'"):
            apply_sla_rule(panel, SlaRule("B", "<", 0.0, 1))

    def test_idempotent_and_column_local(self):
        rng = np.random.default_rng(4)
        values = rng.normal(size=(50, 3))
        panel = make_panel(values, names=("a", "b", "c"))
        rule = SlaRule("b", ">", 0.5, 2)
        first = apply_sla_rule(panel, rule)
        assert apply_sla_rule(panel, rule) == first
        # perturbing other columns must not change the result
        perturbed = values.copy()
        perturbed[:, [0, 2]] += 100.0
        assert apply_sla_rule(make_panel(perturbed, names=("a", "b", "c")), rule) == first

    def test_bad_comparator(self):
        with pytest.raises(DataError, match="comparator"):
            SlaRule("A", "!=", 0.0, 1)

    def test_unicode_comparators_normalized(self):
        assert SlaRule("A", "≤", 0.0, 1).comparator == "<="
        assert SlaRule("A", "≥", 0.0, 1).comparator == ">="


class TestLabelStates:
    def test_paper_scale_windows(self):
        panel = make_panel(np.zeros((240, 1)))
        labeled = label_states(panel, 120, normal_len=120, abnormal_len=120)
        assert labeled.normal_window == (0, 120)
        assert labeled.abnormal_window == (120, 240)
        assert int(labeled.fnode[:120].sum()) == 0
        assert int(labeled.fnode[120:].sum()) == 120

    def test_insufficient_preceding(self):
        panel = make_panel(np.zeros((240, 1)))
        with pytest.raises(DataError, match="insufficient preceding.*50"):
            label_states(panel, 50, normal_len=120, abnormal_len=60)

    def test_insufficient_following(self):
        panel = make_panel(np.zeros((100, 1)))
        with pytest.raises(DataError, match="insufficient following"):
            label_states(panel, 90, normal_len=10, abnormal_len=60)

    def test_minimal_case(self):
        panel = make_panel(np.zeros((2, 1)))
        labeled = label_states(panel, 1, normal_len=1, abnormal_len=1)
        assert np.array_equal(labeled.fnode, [0, 1])

    def test_breach_range_accepted(self):
        panel = make_panel(np.zeros((240, 1)))
        labeled = label_states(panel, (120, 140), normal_len=100, abnormal_len=100)
        assert labeled.abnormal_window == (120, 220)

    def test_lead_offset(self):
        panel = make_panel(np.zeros((240, 1)))
        labeled = label_states(panel, 140, normal_len=100, abnormal_len=100, lead_ticks=20)
        assert labeled.abnormal_window == (120, 220)
        assert labeled.normal_window == (20, 120)

    def test_partition_counts(self):
        panel = make_panel(np.zeros((200, 1)))
        labeled = label_states(panel, 100, normal_len=80, abnormal_len=90)
        a0, a1 = labeled.abnormal_window
        n0, n1 = labeled.normal_window
        assert int(labeled.fnode.sum()) == a1 - a0 == 90
        assert (n1 - n0) == 80
        assert np.all(labeled.fnode[n0:n1] == 0)

    def test_fnode_invariant_enforced(self):
        panel = make_panel(np.zeros((10, 1)))
        bad = np.zeros(10, dtype=np.uint8)
        bad[3] = 1
        with pytest.raises(DataError, match="fnode"):
            LabeledPanel(panel, bad, (0, 4), (5, 8))
