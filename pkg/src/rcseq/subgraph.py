"""Normal-state lagged causal subgraph over the root-cause candidates.

Two-stage time-series discovery: per-target lagged condition selection
(iterative partial-correlation screening against the strongest current
parents), then a momentary-conditional-independence check of every
surviving link conditioned on both endpoints' parents. All edges carry a
lag of at least one tick, so the graph is acyclic by construction.

Self-dependencies (a KPI explaining itself at some lag) participate as
conditioning context but are not emitted as subgraph edges; the subgraph
relates distinct indicators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnalysisError, DataError
from .panel import KpiPanel
from .stats import batch_marginal_ci, ci_test

__all__ = [
    "LaggedParent",
    "LaggedEdge",
    "CausalSubgraph",
    "GraphDiff",
    "select_lagged_parents",
    "mci_edge_test",
    "build_subgraph",
    "graph_diff",
    "to_dot",
]


@dataclass(frozen=True)
class LaggedParent:
    """A surviving lagged predictor of some target: X at lag tau."""

    source: str
    lag: int
    r: float
    p: float
    strength: float  # minimum |r| observed across its screening tests


@dataclass(frozen=True)
class LaggedEdge:
    """Directed lagged edge source -> target with its MCI statistics."""

    source: str
    target: str
    lag: int
    r: float
    p: float

    def __post_init__(self):
        if self.lag < 1:
            raise DataError(f"edge lag must be >= 1, got {self.lag}")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.source, self.target, self.lag)


@dataclass(frozen=True)
class CausalSubgraph:
    """Candidate KPIs plus the SLA indicator, joined by lagged edges."""

    nodes: tuple[str, ...]
    edges: tuple[LaggedEdge, ...]

    def __post_init__(self):
        nodes = tuple(self.nodes)
        if len(set(nodes)) != len(nodes):
            raise DataError("duplicate node")
        for edge in self.edges:
            if edge.source not in nodes or edge.target not in nodes:
                raise DataError(f"edge endpoint missing from node list: {edge.key}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(self.edges))

    def edge_keys(self) -> set[tuple[str, str, int]]:
        return {e.key for e in self.edges}


@dataclass(frozen=True)
class GraphDiff:
    """Set difference of two subgraphs on (source, target, lag) triples."""

    added: tuple[tuple[str, str, int], ...]
    removed: tuple[tuple[str, str, int], ...]
    common: tuple[tuple[str, str, int], ...]


def _lagged_columns(panel: KpiPanel, nodes, tau_max: int):
    """Columns of every (node, lag) candidate aligned on rows tau_max..T."""
    t = panel.n_ticks
    cols = {}
    for name in nodes:
        series = panel.column(name)
        for tau in range(1, tau_max + 1):
            cols[(name, tau)] = series[tau_max - tau : t - tau]
    return cols


def select_lagged_parents(
    panel: KpiPanel,
    target: str,
    tau_max: int,
    alpha: float,
    max_cond: int = 3,
    nodes=None,
) -> tuple[LaggedParent, ...]:
    """Screen all lagged candidates (X, tau) for the target.

    Starting from every (X, tau) with tau in 1..tau_max, each candidate is
    tested against the target conditioned on the `level` strongest other
    survivors, for level = 0..max_cond; candidates with p > alpha drop out
    after each level. The sweep repeats until the survivor set is stable.
    Survivors are ranked by strength (minimum |r| across their tests).
    """
    nodes = tuple(nodes) if nodes is not None else panel.kpi_names
    if target not in nodes:
        raise DataError(f"target {target!r} is not in the node set")
    if tau_max < 1:
        raise AnalysisError(f"tau_max must be >= 1, got {tau_max}")
    t = panel.n_ticks
    minimum = tau_max + max_cond + 3
    if t <= minimum:
        raise AnalysisError(
            f"window too short for parent selection: need more than {minimum} ticks, got {t}"
        )
    y = panel.column(target)[tau_max:]
    cols = _lagged_columns(panel, nodes, tau_max)
    survivors = sorted(cols)
    strength: dict[tuple[str, int], float] = {}
    signed_r: dict[tuple[str, int], float] = {}
    p_max: dict[tuple[str, int], float] = {}

    for _cycle in range(10):
        before = list(survivors)
        for level in range(max_cond + 1):
            if level > len(survivors) - 1:
                break
            ranked = sorted(
                survivors, key=lambda c: (-strength.get(c, np.inf), c)
            )
            removed = set()
            if level == 0:
                x_matrix = np.column_stack([cols[c] for c in survivors])
                r_vec, p_vec = batch_marginal_ci(x_matrix, y)
                for cand, r, p in zip(survivors, r_vec, p_vec):
                    strength[cand] = min(strength.get(cand, np.inf), abs(float(r)))
                    signed_r[cand] = float(r)
                    p_max[cand] = max(p_max.get(cand, 0.0), float(p))
                    if p > alpha:
                        removed.add(cand)
            else:
                for cand in survivors:
                    given = [c for c in ranked if c != cand][:level]
                    res = ci_test(
                        cols[cand],
                        y,
                        given=[cols[c] for c in given],
                        names=tuple(f"{n}@-{tau}" for n, tau in given),
                    )
                    strength[cand] = min(strength[cand], abs(res.r))
                    signed_r[cand] = res.r
                    p_max[cand] = max(p_max[cand], res.p)
                    if res.p > alpha:
                        removed.add(cand)
            if removed:
                survivors = [c for c in survivors if c not in removed]
        if survivors == before:
            break
    ranked = sorted(survivors, key=lambda c: (-strength[c], c))
    return tuple(
        LaggedParent(
            source=name,
            lag=tau,
            r=signed_r[(name, tau)],
            p=p_max[(name, tau)],
            strength=strength[(name, tau)],
        )
        for name, tau in ranked
    )


def mci_edge_test(
    panel: KpiPanel,
    source: tuple[str, int],
    target: str,
    parents_of_target,
    parents_of_source,
    alpha: float,
    max_cond: int = 3,
) -> LaggedEdge | None:
    """Momentary conditional independence check of one lagged link.

    X(t - tau) vs Y(t), conditioned on the strongest parents of Y (the
    tested link excluded) and the strongest parents of X shifted by tau.
    Returns the edge iff p <= alpha.
    """
    x_name, tau = source
    if tau < 1:
        raise AnalysisError(f"lag must be >= 1, got {tau}")
    cond_target = [
        p for p in parents_of_target if (p.source, p.lag) != (x_name, tau)
    ][:max_cond]
    cond_source = list(parents_of_source)[:max_cond]
    shifts = (
        [tau]
        + [p.lag for p in cond_target]
        + [p.lag + tau for p in cond_source]
    )
    t0 = max(shifts)
    t = panel.n_ticks
    n_eff = t - t0
    n_cond = len(cond_target) + len(cond_source)
    if n_eff <= n_cond + 3:
        raise AnalysisError(
            f"insufficient overlap after lag alignment: {n_eff} rows for "
            f"{n_cond} conditioners"
        )
    y = panel.column(target)[t0:]
    x = panel.column(x_name)[t0 - tau : t - tau]
    given = [panel.column(p.source)[t0 - p.lag : t - p.lag] for p in cond_target]
    given += [
        panel.column(p.source)[t0 - p.lag - tau : t - p.lag - tau]
        for p in cond_source
    ]
    names = tuple(f"{p.source}@-{p.lag}" for p in cond_target) + tuple(
        f"{p.source}@-{p.lag + tau}" for p in cond_source
    )
    res = ci_test(x, y, given=given, names=names)
    if res.p <= alpha:
        return LaggedEdge(source=x_name, target=target, lag=tau, r=res.r, p=res.p)
    return None


def build_subgraph(
    normal_panel: KpiPanel,
    nodes,
    tau_max: int,
    alpha: float,
    max_cond: int = 3,
) -> CausalSubgraph:
    """Parent selection for every node, then MCI over every surviving
    cross-KPI link; deterministic for fixed inputs."""
    nodes = tuple(nodes)
    if len(set(nodes)) != len(nodes):
        raise DataError("duplicate node")
    for name in nodes:
        normal_panel.index_of(name)  # raises on unknown names
    parents = {
        name: select_lagged_parents(
            normal_panel, name, tau_max, alpha, max_cond, nodes=nodes
        )
        for name in nodes
    }
    edges = []
    for target in nodes:
        for par in parents[target]:
            if par.source == target:
                continue  # conditioning context only
            edge = mci_edge_test(
                normal_panel,
                (par.source, par.lag),
                target,
                parents[target],
                parents[par.source],
                alpha,
                max_cond,
            )
            if edge is not None:
                edges.append(edge)
    edges.sort(key=lambda e: e.key)
    return CausalSubgraph(nodes=nodes, edges=tuple(edges))


def graph_diff(g_normal: CausalSubgraph, g_abnormal: CausalSubgraph) -> GraphDiff:
    """Edge-set difference on (source, target, lag) triples; the normal
    graph is the baseline, so edges unique to the abnormal graph are
    'added' and edges unique to the normal graph are 'removed'."""
    if set(g_normal.nodes) != set(g_abnormal.nodes):
        only_n = sorted(set(g_normal.nodes) - set(g_abnormal.nodes))
        only_a = sorted(set(g_abnormal.nodes) - set(g_normal.nodes))
        raise DataError(
            f"node universes differ: only in normal {only_n}, only in abnormal {only_a}"
        )
    normal = g_normal.edge_keys()
    abnormal = g_abnormal.edge_keys()
    return GraphDiff(
        added=tuple(sorted(abnormal - normal)),
        removed=tuple(sorted(normal - abnormal)),
        common=tuple(sorted(normal & abnormal)),
    )


def to_dot(
    graph: CausalSubgraph,
    flagged_nodes=(),
    flagged_edges=(),
    name: str = "causal_subgraph",
) -> str:
    """Deterministic DOT rendering; nodes and edges in lexicographic order.

    Flagged nodes carry intervention=true, flagged edges sequence=true
    (flagged_edges holds (source, target, lag) triples).
    """
    flagged_nodes = set(flagged_nodes)
    flagged_edges = set(flagged_edges)
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for node in sorted(graph.nodes):
        attrs = [f'label="{node}"']
        if node in flagged_nodes:
            attrs.append("intervention=true")
        lines.append(f'  "{node}" [{", ".join(attrs)}];')
    for edge in sorted(graph.edges, key=lambda e: e.key):
        attrs = [f'label="lag={edge.lag}, r={edge.r:.3f}"', f"lag={edge.lag}"]
        if edge.key in flagged_edges:
            attrs.append("sequence=true")
        lines.append(f'  "{edge.source}" -> "{edge.target}" [{", ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
