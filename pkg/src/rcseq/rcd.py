"""Root Cause Discovery over a labeled KPI panel.

The binary failure indicator F (1 on the abnormal window, 0 on the normal
window) is appended to the variable set; KPI names are shuffled into random
chunks of size g, a localized PC-style skeleton search keeps the chunk
members that stay dependent on F under conditioning, and the union of
survivors is hierarchically refined until a final full pass yields the
run's candidate set. Repeating the run n times with independent RNG streams
gives the per-KPI causal-source frequency table.

F is treated as a sink: survivors adjacent to F are reported as its parents
directly, with no orientation phase.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigError
from .panel import LabeledPanel
from .stats import batch_marginal_ci, ci_test

__all__ = [
    "RcdConfig",
    "CandidateSet",
    "FrequencyTable",
    "partition",
    "local_skeleton",
    "hierarchical_refine",
    "rcd_single_run",
    "rcd_runs",
    "rcd_multi_run",
]


@dataclass(frozen=True)
class RcdConfig:
    """Discovery parameters: chunk size g, number of runs, CI significance,
    conditioning-set cap, and the base seed all RNG streams derive from."""

    g: int = 5
    n_runs: int = 10
    alpha: float = 0.05
    max_cond: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.g < 2:
            raise ConfigError(f"chunk size g must be >= 2, got {self.g}")
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be positive, got {self.n_runs}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_cond < 0:
            raise ConfigError(f"max_cond must be non-negative, got {self.max_cond}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class CandidateSet:
    """KPIs surviving one discovery run, with their final (maximum observed)
    CI p-values against F and any level-skip warnings."""

    kpis: tuple[str, ...]
    p_values: tuple[tuple[str, float], ...]
    warnings: tuple[str, ...] = ()

    def p_value(self, kpi: str) -> float:
        return dict(self.p_values)[kpi]


@dataclass(frozen=True)
class FrequencyTable:
    """Per-KPI count of runs in which it appeared as a causal source."""

    kpi_names: tuple[str, ...]
    counts: np.ndarray
    n_runs: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (len(self.kpi_names),):
            raise ConfigError("counts must align with kpi_names")
        if counts.min(initial=0) < 0 or counts.max(initial=0) > self.n_runs:
            raise ConfigError("counts must lie in [0, n_runs]")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "kpi_names", tuple(self.kpi_names))

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / self.n_runs

    def proportion(self, kpi: str) -> float:
        return float(self.counts[self.kpi_names.index(kpi)] / self.n_runs)


def partition(kpi_names, g: int, rng: np.random.Generator) -> list[list[str]]:
    """Shuffle the names uniformly and split them into ceil(V/g) chunks of
    size at most g, covering every name exactly once."""
    if g < 2:
        raise ConfigError(f"chunk size g must be >= 2, got {g}")
    names = list(kpi_names)
    order = rng.permutation(len(names))
    shuffled = [names[i] for i in order]
    n_chunks = max(1, -(-len(names) // g))
    return [list(c) for c in np.array_split(shuffled, n_chunks) if len(c)]


def _pooled(labeled: LabeledPanel) -> tuple[np.ndarray, np.ndarray]:
    """Pooled normal+abnormal rows of the panel and the matching F vector."""
    rows = labeled.pooled_rows()
    return labeled.panel.values[rows], labeled.fnode[rows].astype(float)


def local_skeleton(
    labeled: LabeledPanel,
    chunk,
    alpha: float,
    max_cond: int,
) -> tuple[dict[str, float], list[str]]:
    """PC-style neighborhood search of F restricted to one chunk.

    Every chunk member starts adjacent to F. For conditioning sizes
    l = 0..max_cond, each member X is tested against F given every size-l
    subset of the other current neighbors; X is dropped once any test fails
    to reject (p > alpha). Removals are applied only after a level
    completes, so results do not depend on within-level order.

    Returns (survivors mapped to their maximum observed p-value, warnings
    for any levels skipped due to sample size).
    """
    chunk = list(chunk)
    if not chunk:
        raise ConfigError("chunk must be non-empty")
    values, f = _pooled(labeled)
    col = {name: values[:, labeled.panel.kpi_names.index(name)] for name in chunk}
    n = f.size
    adjacency = list(chunk)
    p_max: dict[str, float] = {name: 0.0 for name in chunk}
    warnings: list[str] = []

    for level in range(max_cond + 1):
        if level > len(adjacency) - 1:
            break
        if n <= level + 3:
            warnings.append(
                f"conditioning level {level} skipped: pooled sample n={n} too small"
            )
            continue
        removed: list[str] = []
        if level == 0:
            x_matrix = np.column_stack([col[name] for name in adjacency])
            _, p_values = batch_marginal_ci(x_matrix, f)
            for name, p in zip(adjacency, p_values):
                p_max[name] = max(p_max[name], float(p))
                if p > alpha:
                    removed.append(name)
        else:
            for name in adjacency:
                others = [o for o in adjacency if o != name]
                for subset in combinations(others, level):
                    res = ci_test(
                        col[name], f, given=[col[s] for s in subset], names=subset
                    )
                    p_max[name] = max(p_max[name], res.p)
                    if res.p > alpha:
                        removed.append(name)
                        break
        if removed:
            adjacency = [a for a in adjacency if a not in removed]
    return {name: p_max[name] for name in adjacency}, warnings


def hierarchical_refine(
    survivor_union,
    labeled: LabeledPanel,
    g: int,
    alpha: float,
    max_cond: int,
    rng: np.random.Generator,
    *,
    max_passes: int = 16,
) -> CandidateSet:
    """Refine the union of chunk survivors down to the run's candidate set.

    While more than g survivors remain, they are re-partitioned into chunks
    of size g and re-screened; survivors of their own chunk stay. A pass
    that removes nothing ends the loop (re-chunking a genuinely dependent
    set would never terminate otherwise). The final pass screens the
    remaining set as a single chunk and supplies the reported p-values.
    """
    order = {name: i for i, name in enumerate(labeled.panel.kpi_names)}
    survivors = sorted(survivor_union, key=order.__getitem__)
    warnings: list[str] = []
    passes = 0
    while len(survivors) > g and passes < max_passes:
        passes += 1
        kept: list[str] = []
        for chunk in partition(survivors, g, rng):
            surv, warn = local_skeleton(labeled, chunk, alpha, max_cond)
            kept.extend(surv)
            warnings.extend(warn)
        if len(kept) == len(survivors):
            survivors = sorted(kept, key=order.__getitem__)
            break
        survivors = sorted(kept, key=order.__getitem__)
    if not survivors:
        return CandidateSet(kpis=(), p_values=(), warnings=tuple(warnings))
    final, warn = local_skeleton(labeled, survivors, alpha, max_cond)
    warnings.extend(warn)
    kept = sorted(final, key=order.__getitem__)
    return CandidateSet(
        kpis=tuple(kept),
        p_values=tuple((name, float(final[name])) for name in kept),
        warnings=tuple(warnings),
    )


def rcd_single_run(
    labeled: LabeledPanel,
    cfg: RcdConfig,
    run_index: int,
    exclude=(),
) -> CandidateSet:
    """One independent discovery run with its own derived RNG stream."""
    excluded = set(exclude)
    names = [n for n in labeled.panel.kpi_names if n not in excluded]
    if not names:
        raise ConfigError("no KPIs left to analyze after exclusions")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, run_index]))
    union: set[str] = set()
    warnings: list[str] = []
    for chunk in partition(names, cfg.g, rng):
        surv, warn = local_skeleton(labeled, chunk, cfg.alpha, cfg.max_cond)
        union.update(surv)
        warnings.extend(warn)
    result = hierarchical_refine(
        union, labeled, cfg.g, cfg.alpha, cfg.max_cond, rng
    )
    if warnings:
        result = CandidateSet(
            kpis=result.kpis,
            p_values=result.p_values,
            warnings=tuple(warnings) + result.warnings,
        )
    return result


def _run_task(args) -> tuple[int, CandidateSet]:
    labeled, cfg, run_index, exclude = args
    return run_index, rcd_single_run(labeled, cfg, run_index, exclude)


def rcd_runs(
    labeled: LabeledPanel,
    cfg: RcdConfig,
    exclude=(),
    jobs: int = 1,
) -> list[CandidateSet]:
    """All n_runs candidate sets, in run order.

    Runs are pure functions of (data, cfg, run index), so they may execute
    in parallel; results are reassembled by index and identical regardless
    of jobs.
    """
    if jobs <= 1 or cfg.n_runs == 1:
        return [rcd_single_run(labeled, cfg, i, exclude) for i in range(cfg.n_runs)]
    tasks = [(labeled, cfg, i, tuple(exclude)) for i in range(cfg.n_runs)]
    results: dict[int, CandidateSet] = {}
    with ProcessPoolExecutor(max_workers=min(jobs, cfg.n_runs)) as pool:
        for idx, cand in pool.map(_run_task, tasks):
            results[idx] = cand
    return [results[i] for i in range(cfg.n_runs)]


def rcd_multi_run(
    labeled: LabeledPanel,
    cfg: RcdConfig,
    exclude=(),
    jobs: int = 1,
) -> FrequencyTable:
    """Aggregate n_runs independent runs into per-KPI source frequencies."""
    excluded = set(exclude)
    names = tuple(n for n in labeled.panel.kpi_names if n not in excluded)
    counts = np.zeros(len(names), dtype=np.int64)
    index = {name: i for i, name in enumerate(names)}
    for cand in rcd_runs(labeled, cfg, exclude, jobs):
        for kpi in cand.kpis:
            counts[index[kpi]] += 1
    return FrequencyTable(kpi_names=names, counts=counts, n_runs=cfg.n_runs)
