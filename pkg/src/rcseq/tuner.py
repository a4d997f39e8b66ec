"""Monte Carlo parameter tuning for the discovery engine.

Sweeps chunk size g and run count n, recording each KPI's causal-source
proportion P[g, n]; convergence is judged by regressing the estimated
variance p(1-p)/n against n per g (reliable when at least 90% of the fitted
slopes are negative). Per KPI, the selected g is the one whose mean
proportion is the median across g, the optimal n is the sweep value with
the greatest proportional variance reduction, and the per-KPI choices
consolidate to global parameters as maxima over the prominent-source set.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import AnalysisError, ConfigError
from .panel import LabeledPanel
from .rcd import RcdConfig, rcd_multi_run
from .stats import binomial_sd

__all__ = [
    "McGrid",
    "TuningRow",
    "TrendResult",
    "ConsolidatedParams",
    "run_grid",
    "estimate_p",
    "variance_trend",
    "select_g",
    "select_n",
    "tuning_rows",
    "prominent_sources",
    "consolidate",
]

DEFAULT_N_SET = (10, 15, 20, 25, 30, 40, 50)


@dataclass(frozen=True)
class McGrid:
    """Causal-source counts per (g, n, KPI) from the Monte Carlo sweep."""

    g_values: tuple[int, ...]
    n_values: tuple[int, ...]
    kpi_names: tuple[str, ...]
    counts: np.ndarray  # shape (len(g_values), len(n_values), len(kpi_names))

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        shape = (len(self.g_values), len(self.n_values), len(self.kpi_names))
        if counts.shape != shape:
            raise ConfigError(f"counts must have shape {shape}, got {counts.shape}")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "g_values", tuple(int(g) for g in self.g_values))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "kpi_names", tuple(self.kpi_names))

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / np.asarray(self.n_values)[None, :, None]

    def proportion(self, g: int, n: int, kpi: str) -> float:
        gi = self.g_values.index(g)
        ni = self.n_values.index(n)
        ki = self.kpi_names.index(kpi)
        return float(self.counts[gi, ni, ki] / n)


@dataclass(frozen=True)
class TuningRow:
    """Per-KPI tuning outcome: selected g, estimated probability, optimal n
    (0 means no variance reduction was observed)."""

    kpi: str
    g: int
    p_hat: float
    n_opt: int


@dataclass(frozen=True)
class TrendResult:
    """Variance-vs-n regression slopes per g and the reliability verdict."""

    kpi: str
    slopes: tuple[tuple[int, float], ...]
    negative_fraction: float
    reliable: bool


@dataclass(frozen=True)
class ConsolidatedParams:
    """Global discovery parameters: maxima over the prominent-source rows."""

    g_star: int
    n_star: int
    prominent: tuple[str, ...]
    p_thr: float


def _cell_seed(seed: int, g: int, n: int) -> int:
    return int(np.random.SeedSequence([seed, g, n]).generate_state(1)[0])


def _cell_task(args):
    labeled, base_cfg, g, n, seed, exclude = args
    cfg = replace(base_cfg, g=g, n_runs=n, seed=_cell_seed(seed, g, n))
    table = rcd_multi_run(labeled, cfg, exclude=exclude)
    return g, n, table.counts


def run_grid(
    labeled: LabeledPanel,
    g_values,
    n_values,
    base_cfg: RcdConfig,
    seed: int,
    exclude=(),
    jobs: int = 1,
) -> McGrid:
    """Execute the (g, n) sweep; each cell runs rcd_multi_run with an RNG
    stream derived from (seed, g, n), so cells are independent and the grid
    is deterministic regardless of execution order."""
    g_values = tuple(int(g) for g in g_values)
    n_values = tuple(sorted(int(n) for n in n_values))
    if not g_values or not n_values:
        raise ConfigError("g and n sweeps must be non-empty")
    excluded = set(exclude)
    names = tuple(k for k in labeled.panel.kpi_names if k not in excluded)
    if any(g < 2 for g in g_values):
        raise ConfigError("all g values must be >= 2")
    if any(g > labeled.panel.n_kpis for g in g_values):
        raise ConfigError(
            f"g values must not exceed the panel KPI count ({labeled.panel.n_kpis})"
        )
    tasks = [
        (labeled, base_cfg, g, n, seed, tuple(exclude))
        for g in g_values
        for n in n_values
    ]
    if jobs <= 1 or len(tasks) == 1:
        results = [_cell_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_cell_task, tasks))
    counts = np.zeros((len(g_values), len(n_values), len(names)), dtype=np.int64)
    for g, n, cell_counts in results:
        counts[g_values.index(g), n_values.index(n)] = cell_counts
    return McGrid(g_values=g_values, n_values=n_values, kpi_names=names, counts=counts)


def estimate_p(grid: McGrid, kpi: str, g: int) -> float:
    """Mean of P[g, n] over the swept n values for this g."""
    if g not in grid.g_values:
        raise AnalysisError(f"g={g} was not swept (grid has {grid.g_values})")
    gi = grid.g_values.index(g)
    ki = grid.kpi_names.index(kpi)
    return float(grid.proportions[gi, :, ki].mean())


def variance_trend(grid: McGrid, kpi: str, *, negative_required: float = 0.9) -> TrendResult:
    """OLS slope of the estimated variance p(1-p)/n against n, per g.

    The KPI is a reliable causal source when at least `negative_required`
    of the per-g slopes are strictly negative.
    """
    if len(grid.n_values) < 3:
        raise AnalysisError(
            f"variance trend needs at least 3 swept n values, got {len(grid.n_values)}"
        )
    ki = grid.kpi_names.index(kpi)
    x = np.asarray(grid.n_values, dtype=float)
    slopes = []
    for gi, g in enumerate(grid.g_values):
        p = grid.proportions[gi, :, ki]
        variance = np.array([binomial_sd(pv, n) ** 2 for pv, n in zip(p, grid.n_values)])
        slope = float(np.polyfit(x, variance, 1)[0])
        slopes.append((g, slope))
    negative = sum(1 for _, s in slopes if s < 0.0)
    fraction = negative / len(slopes)
    return TrendResult(
        kpi=kpi,
        slopes=tuple(slopes),
        negative_fraction=fraction,
        reliable=fraction >= negative_required,
    )


def select_g(grid: McGrid, kpi: str) -> tuple[int, float]:
    """The g whose per-g mean proportion is the median estimate.

    With an even number of estimates the lower of the two middle values is
    taken; ties on the estimate resolve to the smaller g.
    """
    estimates = [(estimate_p(grid, kpi, g), g) for g in grid.g_values]
    values = sorted(p for p, _ in estimates)
    median_value = values[(len(values) - 1) // 2]
    candidates = [g for p, g in estimates if p == median_value]
    return min(candidates), median_value


def select_n(grid: McGrid, kpi: str, g: int, *, mode: str = "proportional") -> int:
    """The swept n with the greatest variance reduction from its predecessor.

    Reduction between consecutive n values is proportional by default
    ((prev - cur) / prev, pairs with prev = 0 skipped) or absolute
    (prev - cur). Returns 0 when no pair shows a strictly positive
    reduction.
    """
    if mode not in ("proportional", "absolute"):
        raise ConfigError(f"mode must be 'proportional' or 'absolute', got {mode!r}")
    if g not in grid.g_values:
        raise AnalysisError(f"g={g} was not swept (grid has {grid.g_values})")
    gi = grid.g_values.index(g)
    ki = grid.kpi_names.index(kpi)
    variances = [
        binomial_sd(float(grid.proportions[gi, ni, ki]), n) ** 2
        for ni, n in enumerate(grid.n_values)
    ]
    best_n = 0
    best_reduction = 0.0
    for k in range(1, len(grid.n_values)):
        prev, cur = variances[k - 1], variances[k]
        if mode == "proportional":
            if prev == 0.0:
                continue
            reduction = (prev - cur) / prev
        else:
            reduction = prev - cur
        if reduction > best_reduction:
            best_reduction = reduction
            best_n = grid.n_values[k]
    return best_n


def tuning_rows(grid: McGrid, *, n_mode: str = "proportional") -> list[TuningRow]:
    """One row per KPI: selected g, estimated p, optimal n."""
    rows = []
    for kpi in grid.kpi_names:
        g, p_hat = select_g(grid, kpi)
        rows.append(
            TuningRow(kpi=kpi, g=g, p_hat=p_hat, n_opt=select_n(grid, kpi, g, mode=n_mode))
        )
    return rows


def prominent_sources(rows, p_thr: float = 0.4) -> tuple[str, ...]:
    """KPIs with estimated p above the threshold that are not poor sources
    (poor: n = 0 with p < 1)."""
    return tuple(
        row.kpi
        for row in rows
        if row.p_hat > p_thr and not (row.n_opt == 0 and row.p_hat < 1.0)
    )


def consolidate(rows, prominent, p_thr: float = 0.4) -> ConsolidatedParams:
    """Global g*/n*: maxima of the prominent rows' selections."""
    prominent = tuple(prominent)
    if not prominent:
        raise AnalysisError("no prominent sources; lower p_thr or increase data")
    chosen = [row for row in rows if row.kpi in prominent]
    missing = set(prominent) - {row.kpi for row in chosen}
    if missing:
        raise AnalysisError(f"prominent KPIs missing from rows: {sorted(missing)}")
    return ConsolidatedParams(
        g_star=max(row.g for row in chosen),
        n_star=max(row.n_opt for row in chosen),
        prominent=prominent,
        p_thr=p_thr,
    )
