"""Leader-follower graph assembly and structure analysis.

An edge points follower to leader and carries the lagged correlation as
its weight. Acceptance runs in two steps per unordered city pair: each
direction must have a significantly positive mean dot product, and when
both directions qualify a paired test must separate them, the larger
correlation winning. Analyses cover minimum feedback arc set weight,
weighted PageRank and the relation of centrality to city population.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .lagcorr import DyadResult
from .stats import (
    DegenerateSampleError,
    UndefinedCorrelationError,
    one_sample_ttest,
    paired_ttest,
    spearman,
)

DEFAULT_ALPHA = 0.01
EXACT_FAS_MAX_NODES = 20
_REINSERTION_PASSES = 50


@dataclass(frozen=True)
class Edge:
    follower: str
    leader: str
    weight: float
    lag_weeks: int


@dataclass(frozen=True)
class LeadershipGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        known = set(self.nodes)
        for e in self.edges:
            if e.follower == e.leader:
                raise ValueError(f"self-loop on {e.follower!r}")
            if e.follower not in known or e.leader not in known:
                raise ValueError(f"edge {e.follower!r}->{e.leader!r} references unknown node")

    def total_weight(self) -> float:
        return math.fsum(e.weight for e in self.edges)


@dataclass(frozen=True)
class CentralityReport:
    pagerank: Mapping[str, float]
    weighted_in_degree: Mapping[str, float]


@dataclass(frozen=True)
class AcyclicityReport:
    total_weight: float
    fas_weight: float
    percent_removed: float
    removed_edges: tuple[Edge, ...]
    exact: bool


@dataclass(frozen=True)
class SizeLeadershipReport:
    spearman_pagerank: float
    spearman_indegree: float
    percent_weight_larger_leads: float
    cities_used: tuple[str, ...]


def _survives_screen(dyad: DyadResult, alpha: float) -> bool:
    """Step one: mean of best-lag dot products significantly above zero.

    Propagates DegenerateSampleError; callers map it to "no edge".
    """
    values = [s.value for s in dyad.best_samples()]
    result = one_sample_ttest(values)
    return result.reject_at(alpha) and dyad.correlation > 0


def accept_edge(
    forward: DyadResult, backward: DyadResult, alpha: float = DEFAULT_ALPHA
) -> Edge | None:
    """Decide the edge for one unordered pair, or return None.

    `forward` and `backward` must be the two orientations of the same
    pair. Directions surviving the screen go to a paired comparison over
    weeks where both best-lag streams have a sample; a non-rejection
    means the cities move together and no edge is drawn.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    same_pair = (
        forward.follower_candidate == backward.leader_candidate
        and forward.leader_candidate == backward.follower_candidate
    )
    if not same_pair:
        raise ValueError("forward and backward must be orientations of one pair")

    try:
        fwd_ok = _survives_screen(forward, alpha)
        bwd_ok = _survives_screen(backward, alpha)
    except DegenerateSampleError:
        return None
    if not fwd_ok and not bwd_ok:
        return None
    if fwd_ok != bwd_ok:
        winner = forward if fwd_ok else backward
        return Edge(
            follower=winner.follower_candidate,
            leader=winner.leader_candidate,
            weight=winner.correlation,
            lag_weeks=winner.best_lag,
        )

    fwd_by_week = {s.follower_week: s.value for s in forward.best_samples()}
    bwd_by_week = {s.follower_week: s.value for s in backward.best_samples()}
    common = sorted(set(fwd_by_week) & set(bwd_by_week))
    if len(common) < 2:
        return None
    try:
        contest = paired_ttest(
            [fwd_by_week[w] for w in common], [bwd_by_week[w] for w in common]
        )
    except DegenerateSampleError:
        return None
    if not contest.reject_at(alpha):
        return None
    if forward.correlation == backward.correlation:
        return None
    winner = forward if forward.correlation > backward.correlation else backward
    return Edge(
        follower=winner.follower_candidate,
        leader=winner.leader_candidate,
        weight=winner.correlation,
        lag_weeks=winner.best_lag,
    )


def build_graph(
    dyads: Iterable[DyadResult],
    alpha: float = DEFAULT_ALPHA,
    bonferroni: bool = False,
    nodes: Sequence[str] | None = None,
) -> LeadershipGraph:
    """Run edge acceptance over every unordered pair with scored dyads.

    A pair with only one scored orientation is decided by the screen
    alone. With bonferroni=True the level is divided by the number of
    ordered dyads over the node set.
    """
    by_pair: dict[tuple[str, str], DyadResult] = {}
    for d in dyads:
        by_pair[(d.follower_candidate, d.leader_candidate)] = d
    if nodes is None:
        node_set = {c for pair in by_pair for c in pair}
    else:
        node_set = set(nodes)
    ordered = tuple(sorted(node_set))

    level = alpha
    n = len(ordered)
    if bonferroni and n > 1:
        level = alpha / (n * (n - 1))

    edges = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1 :]:
            fwd = by_pair.get((a, b))
            bwd = by_pair.get((b, a))
            if fwd is not None and bwd is not None:
                edge = accept_edge(fwd, bwd, level)
            elif fwd is not None or bwd is not None:
                lone = fwd if fwd is not None else bwd
                edge = None
                try:
                    survives = _survives_screen(lone, level)
                except DegenerateSampleError:
                    survives = False
                if survives:
                    edge = Edge(
                        follower=lone.follower_candidate,
                        leader=lone.leader_candidate,
                        weight=lone.correlation,
                        lag_weeks=lone.best_lag,
                    )
            else:
                continue
            if edge is not None:
                edges.append(edge)
    edges.sort(key=lambda e: (e.follower, e.leader))
    return LeadershipGraph(nodes=ordered, edges=tuple(edges))


def _weight_matrix(nodes: Sequence[str], edges: Iterable[Edge]) -> np.ndarray:
    index = {c: i for i, c in enumerate(nodes)}
    w = np.zeros((len(nodes), len(nodes)))
    for e in edges:
        w[index[e.follower], index[e.leader]] += e.weight
    return w


def _exact_min_fas_order(w: np.ndarray) -> list[int]:
    """Optimal vertex order minimizing backward edge weight, by subset DP.

    dp[S] is the cheapest cost of arranging exactly the vertices of S as
    a prefix; appending v to prefix S pays for every edge from v into S.
    """
    n = w.shape[0]
    size = 1 << n
    lo_bits = n // 2
    lo_mask = (1 << lo_bits) - 1

    sum_lo = np.zeros((n, 1 << lo_bits))
    sum_hi = np.zeros((n, 1 << (n - lo_bits)))
    for v in range(n):
        for s in range(1, 1 << lo_bits):
            low = s & -s
            sum_lo[v, s] = sum_lo[v, s ^ low] + w[v, low.bit_length() - 1]
        for s in range(1, 1 << (n - lo_bits)):
            low = s & -s
            sum_hi[v, s] = sum_hi[v, s ^ low] + w[v, low.bit_length() - 1 + lo_bits]

    dp = np.full(size, np.inf)
    dp[0] = 0.0
    all_sets = np.arange(size, dtype=np.int64)
    pop = np.zeros(size, dtype=np.int64)
    shifted = all_sets.copy()
    for _ in range(n):
        pop += shifted & 1
        shifted >>= 1
    by_level = np.argsort(pop, kind="stable")
    bounds = np.searchsorted(pop[by_level], np.arange(n + 1))

    for k in range(n):
        level_sets = by_level[bounds[k] : bounds[k + 1]]
        base = dp[level_sets]
        for v in range(n):
            bit = 1 << v
            free = (level_sets & bit) == 0
            src = level_sets[free]
            cand = base[free] + sum_lo[v, src & lo_mask] + sum_hi[v, src >> lo_bits]
            np.minimum.at(dp, src | bit, cand)

    order_rev: list[int] = []
    s = size - 1
    while s:
        for v in range(n):
            bit = 1 << v
            if not s & bit:
                continue
            prev = s ^ bit
            cost = sum_lo[v, prev & lo_mask] + sum_hi[v, prev >> lo_bits]
            if abs(dp[s] - (dp[prev] + cost)) <= 1e-9 * max(1.0, abs(dp[s])):
                order_rev.append(v)
                s = prev
                break
        else:
            raise ArithmeticError("subset DP backtrack failed")
    return list(reversed(order_rev))


def _backward_weight(order: Sequence[int], w: np.ndarray) -> float:
    pos = {v: i for i, v in enumerate(order)}
    total = 0.0
    for src in order:
        for dst in order:
            if pos[src] > pos[dst]:
                total += w[src, dst]
    return total


def _greedy_fas_order(w: np.ndarray) -> list[int]:
    """Sink/source peeling plus best-position reinsertion sweeps."""
    n = w.shape[0]
    remaining = set(range(n))
    head: list[int] = []
    tail: list[int] = []
    while remaining:
        moved = True
        while moved:
            moved = False
            for v in sorted(remaining):
                if all(w[v, u] == 0 for u in remaining if u != v):
                    tail.insert(0, v)
                    remaining.remove(v)
                    moved = True
                    break
            for v in sorted(remaining):
                if all(w[u, v] == 0 for u in remaining if u != v):
                    head.append(v)
                    remaining.remove(v)
                    moved = True
                    break
        if remaining:
            best = min(
                sorted(remaining),
                key=lambda v: (
                    -(sum(w[u, v] for u in remaining) - sum(w[v, u] for u in remaining)),
                    v,
                ),
            )
            head.append(best)
            remaining.remove(best)
    order = head + tail

    for _ in range(_REINSERTION_PASSES):
        improved = False
        for v in range(n):
            rest = [u for u in order if u != v]
            # cost(k): edges v->prefix are backward, edges suffix->v are backward.
            suffix_in = sum(w[u, v] for u in rest)
            costs = [suffix_in]
            running = suffix_in
            for u in rest:
                running += w[v, u] - w[u, v]
                costs.append(running)
            k = int(np.argmin(costs))
            candidate = rest[:k] + [v] + rest[k:]
            if _backward_weight(candidate, w) < _backward_weight(order, w) - 1e-15:
                order = candidate
                improved = True
        if not improved:
            break
    return order


def _toposort_check(nodes: Sequence[str], edges: Iterable[Edge]) -> None:
    """Kahn's algorithm; raises if any cycle survives."""
    indeg = {v: 0 for v in nodes}
    out: dict[str, list[str]] = {v: [] for v in nodes}
    for e in edges:
        out[e.follower].append(e.leader)
        indeg[e.leader] += 1
    queue = [v for v in nodes if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for u in out[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                queue.append(u)
    if seen != len(indeg):
        raise RuntimeError("feedback arc set removal left a cycle")


def feedback_arc_set(
    graph: LeadershipGraph, exact_threshold: int = EXACT_FAS_MAX_NODES
) -> AcyclicityReport:
    """Minimum-weight edge set whose removal leaves the graph acyclic.

    The graph splits into strongly connected components first; cycles
    never cross components. Components up to exact_threshold nodes are
    solved exactly by subset DP, larger ones by a peeling heuristic with
    reinsertion sweeps, and the report says which kind of answer it is.
    The removed set is re-verified acyclic on every call.
    """
    total = graph.total_weight()
    if not graph.edges:
        return AcyclicityReport(0.0, 0.0, 0.0, (), True)

    index = {c: i for i, c in enumerate(graph.nodes)}
    n = len(graph.nodes)
    adj = sparse.csr_matrix(
        (
            np.ones(len(graph.edges)),
            (
                [index[e.follower] for e in graph.edges],
                [index[e.leader] for e in graph.edges],
            ),
        ),
        shape=(n, n),
    )
    n_comp, labels = connected_components(adj, directed=True, connection="strong")

    removed: list[Edge] = []
    exact = True
    for comp in range(n_comp):
        members = [i for i in range(n) if labels[i] == comp]
        if len(members) < 2:
            continue
        member_names = {graph.nodes[i] for i in members}
        comp_edges = [
            e for e in graph.edges
            if e.follower in member_names and e.leader in member_names
        ]
        if not comp_edges:
            continue
        local_nodes = sorted(member_names)
        w = _weight_matrix(local_nodes, comp_edges)
        if len(local_nodes) <= exact_threshold:
            order = _exact_min_fas_order(w)
        else:
            order = _greedy_fas_order(w)
            exact = False
        pos = {local_nodes[v]: p for p, v in enumerate(order)}
        removed.extend(e for e in comp_edges if pos[e.follower] > pos[e.leader])

    removed.sort(key=lambda e: (e.follower, e.leader))
    removed_set = set(removed)
    fas_weight = math.fsum(e.weight for e in removed)
    _toposort_check(graph.nodes, [e for e in graph.edges if e not in removed_set])
    percent = 100.0 * fas_weight / total if total > 0 else 0.0
    return AcyclicityReport(
        total_weight=total,
        fas_weight=fas_weight,
        percent_removed=percent,
        removed_edges=tuple(removed),
        exact=exact,
    )


def pagerank(
    graph: LeadershipGraph,
    damping: float = 0.85,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> CentralityReport:
    """Weighted PageRank by power iteration, follower endorsing leader.

    Each node splits its rank over outgoing edges in proportion to their
    weights; nodes with no outgoing edge spread theirs uniformly, as does
    the teleport term.
    """
    if not 0 < damping < 1:
        raise ValueError(f"damping must be in (0, 1), got {damping}")
    nodes = tuple(sorted(graph.nodes))
    n = len(nodes)
    in_degree = {v: 0.0 for v in nodes}
    for e in graph.edges:
        in_degree[e.leader] += e.weight
    if n == 0:
        return CentralityReport(pagerank={}, weighted_in_degree={})

    index = {c: i for i, c in enumerate(nodes)}
    out_weight = np.zeros(n)
    for e in graph.edges:
        out_weight[index[e.follower]] += e.weight
    rows = [index[e.leader] for e in graph.edges]
    cols = [index[e.follower] for e in graph.edges]
    vals = [e.weight / out_weight[index[e.follower]] for e in graph.edges]
    transfer = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    dangling = out_weight == 0

    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        spread = transfer.dot(x) + x[dangling].sum() / n
        nxt = damping * spread + (1.0 - damping) / n
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    else:
        raise ArithmeticError(f"pagerank failed to converge within {max_iter} iterations")

    ranks = {c: float(x[index[c]]) for c in nodes}
    return CentralityReport(
        pagerank=ranks,
        weighted_in_degree={v: float(in_degree[v]) for v in nodes},
    )


def size_leadership(
    graph: LeadershipGraph,
    centrality: CentralityReport,
    populations: Mapping[str, int],
) -> SizeLeadershipReport:
    """Relate centrality to city population over nodes with known sizes.

    Nodes without a population are excluded (with a warning); edges are
    counted toward the larger-leads percentage only when both endpoints
    have populations.
    """
    missing = sorted(v for v in graph.nodes if v not in populations)
    if missing:
        warnings.warn(
            f"no population for {', '.join(missing)}; excluded from size analysis",
            stacklevel=2,
        )
    used = tuple(v for v in graph.nodes if v in populations)
    pops = [float(populations[v]) for v in used]
    for v, p in zip(used, pops):
        if p <= 0:
            raise ValueError(f"population of {v!r} must be positive, got {p}")

    try:
        sp_pr = spearman(pops, [centrality.pagerank[v] for v in used])
        sp_in = spearman(pops, [centrality.weighted_in_degree[v] for v in used])
    except UndefinedCorrelationError:
        raise UndefinedCorrelationError(
            "population or centrality is constant over the usable cities"
        ) from None

    counted = 0.0
    larger_leads = 0.0
    for e in graph.edges:
        if e.follower not in populations or e.leader not in populations:
            continue
        counted += e.weight
        if populations[e.leader] > populations[e.follower]:
            larger_leads += e.weight
    percent = 100.0 * larger_leads / counted if counted > 0 else 0.0
    return SizeLeadershipReport(
        spearman_pagerank=sp_pr.rho,
        spearman_indegree=sp_in.rho,
        percent_weight_larger_leads=percent,
        cities_used=used,
    )
