"""KPI panel ingestion, SLA rule evaluation, and normal/abnormal labeling.

A panel is a rectangular multivariate time series: one row per tick at a
uniform granularity, one column per named KPI. Window arithmetic (breach
ranges, normal/abnormal windows, onsets) is positional, i.e. expressed in
row indices; for the usual 0..T-1 tick column the two coincide.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError

_COMPARATORS = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}

MISSING_POLICIES = ("fail", "drop-row", "linear-interpolate")


@dataclass(frozen=True)
class KpiPanel:
    """Immutable T x V panel of finite KPI values on strictly increasing ticks."""

    ticks: np.ndarray
    kpi_names: tuple[str, ...]
    values: np.ndarray
    granularity_seconds: int = 15

    def __post_init__(self):
        ticks = np.asarray(self.ticks, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("values must be a 2-d matrix")
        if ticks.ndim != 1 or ticks.shape[0] != values.shape[0]:
            raise DataError("ticks must align with the value rows")
        if ticks.size == 0:
            raise DataError("panel has no rows")
        if np.any(np.diff(ticks) <= 0):
            raise DataError("ticks must be strictly increasing")
        names = tuple(self.kpi_names)
        if len(set(names)) != len(names):
            raise DataError("duplicate KPI name")
        if len(names) != values.shape[1]:
            raise DataError("kpi_names must match the value columns")
        if not np.all(np.isfinite(values)):
            raise DataError("panel values must all be finite")
        if self.granularity_seconds <= 0:
            raise DataError("granularity_seconds must be positive")
        ticks = ticks.copy()
        values = values.copy()
        ticks.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "ticks", ticks)
        object.__setattr__(self, "kpi_names", names)
        object.__setattr__(self, "values", values)

    @property
    def n_ticks(self) -> int:
        return self.values.shape[0]

    @property
    def n_kpis(self) -> int:
        return self.values.shape[1]

    def index_of(self, name: str) -> int:
        try:
            return self.kpi_names.index(name)
        except ValueError:
            raise DataError(f"unknown metric: {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index_of(name)]

    def restrict(self, names) -> "KpiPanel":
        """Sub-panel with the given KPI columns, in the given order."""
        idx = [self.index_of(n) for n in names]
        return KpiPanel(
            ticks=self.ticks,
            kpi_names=tuple(names),
            values=self.values[:, idx],
            granularity_seconds=self.granularity_seconds,
        )


_COMPARATOR_ALIASES = {"≤": "<=", "≥": ">="}


@dataclass(frozen=True)
class SlaRule:
    """Service-level rule: breach when `metric <comparator> threshold` holds
    continuously for at least min_duration_ticks."""

    metric: str
    comparator: str
    threshold: float
    min_duration_ticks: int = 1

    def __post_init__(self):
        comparator = _COMPARATOR_ALIASES.get(self.comparator, self.comparator)
        if comparator not in _COMPARATORS:
            raise DataError(
                f"comparator must be one of {sorted(_COMPARATORS)}, got {self.comparator!r}"
            )
        object.__setattr__(self, "comparator", comparator)
        if self.min_duration_ticks < 0:
            raise DataError("min_duration_ticks must be non-negative")


@dataclass(frozen=True)
class LabeledPanel:
    """Panel plus the binary failure indicator and its two analysis windows.

    fnode[t] is 1 exactly on the half-open abnormal window; the normal
    window precedes it and the two are disjoint.
    """

    panel: KpiPanel
    fnode: np.ndarray
    normal_window: tuple[int, int]
    abnormal_window: tuple[int, int]

    def __post_init__(self):
        t = self.panel.n_ticks
        n0, n1 = self.normal_window
        a0, a1 = self.abnormal_window
        if not (0 <= n0 < n1 <= t and 0 <= a0 < a1 <= t):
            raise DataError("windows must be non-empty and lie inside the panel")
        if n1 > a0:
            raise DataError("normal window must precede the abnormal window")
        fnode = np.asarray(self.fnode, dtype=np.uint8)
        if fnode.shape != (t,):
            raise DataError("fnode must have one entry per tick")
        expected = np.zeros(t, dtype=np.uint8)
        expected[a0:a1] = 1
        if not np.array_equal(fnode, expected):
            raise DataError("fnode must be 1 exactly on the abnormal window")
        fnode = fnode.copy()
        fnode.setflags(write=False)
        object.__setattr__(self, "fnode", fnode)
        object.__setattr__(self, "normal_window", (int(n0), int(n1)))
        object.__setattr__(self, "abnormal_window", (int(a0), int(a1)))

    @property
    def normal_slice(self) -> slice:
        return slice(*self.normal_window)

    @property
    def abnormal_slice(self) -> slice:
        return slice(*self.abnormal_window)

    def pooled_rows(self) -> np.ndarray:
        """Row indices of both analysis windows, normal first."""
        return np.r_[
            np.arange(*self.normal_window), np.arange(*self.abnormal_window)
        ]

    def normal_values(self, name: str) -> np.ndarray:
        return self.panel.column(name)[self.normal_slice]

    def abnormal_values(self, name: str) -> np.ndarray:
        return self.panel.column(name)[self.abnormal_slice]

    def window_panel(self, which: str) -> KpiPanel:
        """Sub-panel of one analysis window ('normal' or 'abnormal')."""
        if which not in ("normal", "abnormal"):
            raise DataError(f"window must be 'normal' or 'abnormal', got {which!r}")
        sl = self.normal_slice if which == "normal" else self.abnormal_slice
        return KpiPanel(
            ticks=self.panel.ticks[sl],
            kpi_names=self.panel.kpi_names,
            values=self.panel.values[sl],
            granularity_seconds=self.panel.granularity_seconds,
        )


def _parse_tick_cell(cell: str, line_no: int):
    cell = cell.strip()
    try:
        return int(cell), "int"
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(cell), "iso"
    except ValueError:
        raise DataError(
            f"line {line_no}: cannot parse timestamp {cell!r} as integer tick or ISO-8601"
        ) from None


def _normalize_ticks(raw, kinds, granularity_seconds: int) -> np.ndarray:
    if len(set(kinds)) > 1:
        raise DataError("mixed integer and ISO-8601 timestamps are not supported")
    if kinds[0] == "int":
        return np.asarray(raw, dtype=np.int64)
    base = raw[0]
    ticks = []
    for ts in raw:
        seconds = (ts - base).total_seconds()
        steps = seconds / granularity_seconds
        if abs(steps - round(steps)) > 1e-9:
            raise DataError(
                f"timestamp {ts.isoformat()} is not aligned to the "
                f"{granularity_seconds}s granularity"
            )
        ticks.append(int(round(steps)))
    return np.asarray(ticks, dtype=np.int64)


def _resolve_missing(values: np.ndarray, ticks: np.ndarray, names, line_nos, policy: str):
    """Apply the configured missing-value policy; returns (values, ticks)."""
    nan_mask = np.isnan(values)
    if not nan_mask.any():
        return values, ticks
    if policy == "fail":
        row, col = np.argwhere(nan_mask)[0]
        raise DataError(
            f"missing value at line {line_nos[row]}, column {names[col]!r} "
            "(policy 'fail'; use 'drop-row' or 'linear-interpolate')"
        )
    if policy == "drop-row":
        keep = ~nan_mask.any(axis=1)
        return values[keep], ticks[keep]
    # linear interpolation between the nearest present neighbors per column
    for col in range(values.shape[1]):
        v = values[:, col]
        missing = np.isnan(v)
        if not missing.any():
            continue
        if missing[0] or missing[-1]:
            row = 0 if missing[0] else len(v) - 1
            raise DataError(
                f"missing value at line {line_nos[row]}, column {names[col]!r} "
                "has no neighbor on both sides to interpolate"
            )
        idx = np.arange(len(v))
        v[missing] = np.interp(idx[missing], idx[~missing], v[~missing])
    return values, ticks


def load_csv(
    path,
    *,
    missing: str = "fail",
    granularity_seconds: int = 15,
) -> KpiPanel:
    """Load a panel from CSV: header row, column 1 = timestamp/tick,
    remaining columns = KPI floats.

    Timestamps may be integers (used as ticks directly) or ISO-8601 strings
    (normalized to ticks at `granularity_seconds`). Empty cells are resolved
    per `missing`: 'fail' (default), 'drop-row', or 'linear-interpolate'.
    """
    if missing not in MISSING_POLICIES:
        raise DataError(f"missing policy must be one of {MISSING_POLICIES}, got {missing!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: header must name a tick column and at least one KPI")
        names = tuple(h.strip() for h in header[1:])
        if len(set(names)) != len(names):
            raise DataError("duplicate KPI name in header")

        raw_ticks, kinds, rows, line_nos = [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"line {line_no}: expected {len(header)} fields, got {len(row)}"
                )
            tick, kind = _parse_tick_cell(row[0], line_no)
            raw_ticks.append(tick)
            kinds.append(kind)
            parsed = []
            for name, cell in zip(names, row[1:]):
                cell = cell.strip()
                if cell == "":
                    parsed.append(math.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"line {line_no}: cannot parse value {cell!r} for KPI {name!r}"
                    ) from None
            rows.append(parsed)
            line_nos.append(line_no)

    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=float)
    ticks = _normalize_ticks(raw_ticks, kinds, granularity_seconds)
    values, ticks = _resolve_missing(values, ticks, names, line_nos, missing)
    if values.shape[0] == 0:
        raise DataError(f"{path}: every row was dropped by the missing-value policy")
    if np.any(np.diff(ticks) <= 0):
        bad = int(np.argwhere(np.diff(ticks) <= 0)[0, 0]) + 1
        raise DataError(f"timestamps not strictly increasing at data row {bad + 1}")
    return KpiPanel(
        ticks=ticks,
        kpi_names=names,
        values=values,
        granularity_seconds=granularity_seconds,
    )


def save_csv(panel: KpiPanel, path) -> None:
    """Write a panel to CSV with full float precision (round-trip safe)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("tick", *panel.kpi_names))
        for tick, row in zip(panel.ticks, panel.values):
            writer.writerow((int(tick), *(repr(float(v)) for v in row)))


def apply_sla_rule(panel: KpiPanel, rule: SlaRule) -> list[tuple[int, int]]:
    """Maximal half-open row ranges where the rule holds continuously for at
    least min_duration_ticks. Depends only on the named metric column."""
    series = panel.column(rule.metric)
    mask = _COMPARATORS[rule.comparator](series, rule.threshold)
    ranges: list[tuple[int, int]] = []
    start = None
    for i, hit in enumerate(mask):
        if hit and start is None:
            start = i
        elif not hit and start is not None:
            ranges.append((start, i))
            start = None
    if start is not None:
        ranges.append((start, len(mask)))
    return [(s, e) for s, e in ranges if e - s >= rule.min_duration_ticks]


def label_states(
    panel: KpiPanel,
    breach,
    normal_len: int,
    abnormal_len: int,
    *,
    lead_ticks: int = 0,
) -> LabeledPanel:
    """Label normal/abnormal windows around a breach onset.

    The abnormal window starts `lead_ticks` before the breach onset and
    spans abnormal_len ticks; the normal window of normal_len ticks ends
    exactly where the abnormal window starts.
    """
    breach_start = breach[0] if isinstance(breach, (tuple, list)) else int(breach)
    if normal_len < 1 or abnormal_len < 1:
        raise DataError("window lengths must be at least 1 tick")
    if lead_ticks < 0:
        raise DataError("lead_ticks must be non-negative")
    abnormal_start = breach_start - lead_ticks
    if abnormal_start - normal_len < 0:
        raise DataError(
            f"insufficient preceding data: need {normal_len} ticks before "
            f"tick {abnormal_start}, only {max(abnormal_start, 0)} available"
        )
    abnormal_end = abnormal_start + abnormal_len
    if abnormal_end > panel.n_ticks:
        raise DataError(
            f"insufficient following data: need {abnormal_len} ticks from "
            f"tick {abnormal_start}, only {panel.n_ticks - abnormal_start} available"
        )
    fnode = np.zeros(panel.n_ticks, dtype=np.uint8)
    fnode[abnormal_start:abnormal_end] = 1
    return LabeledPanel(
        panel=panel,
        fnode=fnode,
        normal_window=(abnormal_start - normal_len, abnormal_start),
        abnormal_window=(abnormal_start, abnormal_end),
    )
