"""Word Mover Distance: exact optimal transport between sentence nBOWs.

A sentence becomes a normalized bag of words (nBOW): distinct in-vocabulary
tokens weighted by their counts, weights summing to one. The distance between
two sentences is the minimum total cost of transporting one nBOW's mass onto
the other's, with per-unit cost the embedding-space distance between tokens.

The solver works on the dense bipartite transportation graph with successive
shortest augmenting paths and node potentials. Weights are rescaled to exact
integers (count_a[i] * N_b on the supply side, count_b[j] * N_a on the demand
side, equal totals N_a * N_b), so every augmentation moves at least one unit
and the algorithm terminates without the degenerate-pivot cycling that plagues
floating-point flow arithmetic. Costs stay in float64; the optimum of the
integer-supply problem equals the optimum of the weight-1 problem divided by
N_a * N_b because transportation polytopes scale linearly.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from math import inf

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import Sentence
from .embedding import EmbeddingTable
from .errors import SolverError


@dataclass(frozen=True)
class WmdOptions:
    """Ground-cost and token-filtering options.

    metric: "euclidean" (default; makes WMD a true metric) or "cosine".
    stopwords: tokens excluded from nBOWs before weighting, or None.
    """

    metric: str = "euclidean"
    stopwords: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown ground-cost metric {self.metric!r}")


@dataclass(frozen=True)
class NBow:
    """Weighted point cloud: distinct tokens, their vectors, and unit-sum weights."""

    tokens: tuple[str, ...]
    vectors: np.ndarray          # shape (len(tokens), dim)
    weights: np.ndarray          # positive, sums to 1
    counts: tuple[int, ...]      # raw token counts behind the weights

    @property
    def total_count(self) -> int:
        return sum(self.counts)

    def centroid(self) -> np.ndarray:
        return self.weights @ self.vectors


@dataclass(frozen=True)
class TransportPlan:
    """An optimal flow matrix and its objective value."""

    flows: np.ndarray            # shape (|a|, |b|); marginals match the nBOW weights
    objective: float


def nbow(s: Sentence, table: EmbeddingTable, stopwords: frozenset[str] | None = None):
    """Count-normalized bag of in-vocabulary tokens; None when nothing is covered.

    Support order is first occurrence in the sentence, which keeps downstream
    arithmetic deterministic.
    """
    counts: dict[str, int] = {}
    for tok in s.tokens:
        if stopwords is not None and tok in stopwords:
            continue
        if tok in table:
            counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        return None
    tokens = tuple(counts)
    raw = tuple(counts[t] for t in tokens)
    total = sum(raw)
    vectors = np.stack([table[t] for t in tokens])
    weights = np.asarray(raw, dtype=np.float64) / total
    return NBow(tokens=tokens, vectors=vectors, weights=weights, counts=raw)


def cost_matrix(a: NBow, b: NBow, metric: str = "euclidean") -> np.ndarray:
    """Pairwise ground costs between the two supports (c >= 0, c=0 iff equal vectors)."""
    return cdist(a.vectors, b.vectors, metric=metric)


def _min_cost_flow(supply: list[int], demand: list[int], cost: np.ndarray) -> np.ndarray:
    """Exact min-cost flow on the dense bipartite graph (integer supplies).

    Successive shortest augmenting paths with Dijkstra over reduced costs.
    Node potentials keep all residual reduced costs nonnegative; tiny negative
    values from float rounding are clamped to zero, which perturbs the
    objective far below the 1e-9 tolerances used everywhere downstream.
    Returns the integer flow matrix.
    """
    m, n = cost.shape
    flow = np.zeros((m, n), dtype=np.int64)
    pot_a = [0.0] * m
    pot_b = [0.0] * n
    rem_supply = list(supply)
    rem_demand = list(demand)
    outstanding = sum(rem_supply)
    if outstanding != sum(rem_demand):
        raise SolverError("unbalanced transportation problem")

    while outstanding > 0:
        dist_a = [inf] * m
        dist_b = [inf] * n
        done_a = [False] * m
        done_b = [False] * n
        parent_b = [-1] * n      # supply node that reached this demand node
        parent_a = [-1] * m      # demand node that reached this supply node
        heap: list[tuple[float, int, int]] = []
        for i in range(m):
            if rem_supply[i] > 0:
                dist_a[i] = 0.0
                heap.append((0.0, 0, i))
        heapq.heapify(heap)

        target = -1
        target_dist = inf
        while heap:
            d, side, v = heapq.heappop(heap)
            if side == 0:
                if done_a[v] or d > dist_a[v]:
                    continue
                done_a[v] = True
                row_cost = cost[v]
                base = d + pot_a[v]
                for j in range(n):
                    if done_b[j]:
                        continue
                    rc = base + row_cost[j] - pot_b[j]
                    if rc < d:
                        rc = d  # clamp float noise; reduced edge cost is >= 0
                    if rc < dist_b[j]:
                        dist_b[j] = rc
                        parent_b[j] = v
                        heapq.heappush(heap, (rc, 1, j))
            else:
                if done_b[v] or d > dist_b[v]:
                    continue
                done_b[v] = True
                if rem_demand[v] > 0:
                    target = v
                    target_dist = d
                    break
                col_flow = flow[:, v]
                base = d + pot_b[v]
                for i in range(m):
                    if done_a[i] or col_flow[i] <= 0:
                        continue
                    rc = base - cost[i, v] - pot_a[i]
                    if rc < d:
                        rc = d
                    if rc < dist_a[i]:
                        dist_a[i] = rc
                        parent_a[i] = v
                        heapq.heappush(heap, (rc, 0, i))

        if target < 0:
            raise SolverError("no augmenting path in balanced problem")

        for i in range(m):
            pot_a[i] += min(dist_a[i], target_dist)
        for j in range(n):
            pot_b[j] += min(dist_b[j], target_dist)

        # Trace the path back and find the bottleneck.
        path: list[tuple[int, int, bool]] = []  # (i, j, forward)
        j = target
        while True:
            i = parent_b[j]
            path.append((i, j, True))
            if parent_a[i] < 0:
                start = i
                break
            j = parent_a[i]
            path.append((i, j, False))
        delta = min(rem_supply[start], rem_demand[target])
        for i, j, forward in path:
            if not forward:
                delta = min(delta, int(flow[i, j]))
        for i, j, forward in path:
            if forward:
                flow[i, j] += delta
            else:
                flow[i, j] -= delta
        rem_supply[start] -= delta
        rem_demand[target] -= delta
        outstanding -= delta

    return flow


def emd_solve(a: NBow, b: NBow, c: np.ndarray) -> TransportPlan:
    """Exact balanced optimal transport between two nBOWs under ground cost c."""
    na, nb = a.total_count, b.total_count
    supply = [k * nb for k in a.counts]
    demand = [k * na for k in b.counts]
    flow = _min_cost_flow(supply, demand, c)
    scale = float(na * nb)
    flows = flow.astype(np.float64) / scale
    objective = float((flow * c).sum() / scale)
    return TransportPlan(flows=flows, objective=objective)


def wmd(
    s_a: Sentence,
    s_b: Sentence,
    table: EmbeddingTable,
    options: WmdOptions = WmdOptions(),
):
    """Word Mover Distance, or None when either side has zero embedding coverage.

    Callers treat None as an infinite cost: an undefined candidate can never
    win a strict-improvement update.
    """
    a = nbow(s_a, table, options.stopwords)
    b = nbow(s_b, table, options.stopwords)
    if a is None or b is None:
        return None
    c = cost_matrix(a, b, metric=options.metric)
    return emd_solve(a, b, c).objective


def wcd_lower_bound(a: NBow, b: NBow, metric: str = "euclidean") -> float:
    """Distance between weighted centroids; never exceeds the exact WMD.

    Jensen's inequality applied to the transport plan's marginals: moving all
    mass along the straight line between centroids is at most as expensive as
    any feasible plan. Used to skip full solves when even the bound cannot
    beat an incumbent cost. For the cosine metric the analogous bound uses
    the same centroid construction; convexity of 1 - cos on the relevant
    domain is not guaranteed, so pruning is only enabled for euclidean costs.
    """
    if metric != "euclidean":
        raise ValueError("centroid lower bound is only valid for the euclidean metric")
    return float(np.linalg.norm(a.centroid() - b.centroid()))


_MISSING = object()


class WmdScorer:
    """Caching WMD evaluator over one embedding table and option set.

    Sentences repeat heavily across pipeline iterations, so results are
    memoized by token content (order-insensitive key; WMD is symmetric).
    ``best_under`` additionally prunes with the centroid bound: when the
    bound already meets or exceeds an incumbent cost the exact solve is
    skipped and None is returned, which rejecting callers treat the same as
    a non-improving candidate.
    """

    def __init__(self, table: EmbeddingTable, options: WmdOptions = WmdOptions()):
        self.table = table
        self.options = options
        self._nbows: dict[tuple[str, ...], NBow | None] = {}
        self._cache: dict[tuple[tuple[str, ...], tuple[str, ...]], float | None] = {}

    def nbow_for(self, tokens: tuple[str, ...]):
        if tokens not in self._nbows:
            self._nbows[tokens] = nbow(
                Sentence(tokens=tokens, id=0), self.table, self.options.stopwords
            )
        return self._nbows[tokens]

    def _key(self, ta: tuple[str, ...], tb: tuple[str, ...]):
        return (ta, tb) if ta <= tb else (tb, ta)

    def distance(self, s_a: Sentence, s_b: Sentence):
        """WMD between two sentences (None when undefined)."""
        key = self._key(s_a.tokens, s_b.tokens)
        if key not in self._cache:
            a = self.nbow_for(key[0])
            b = self.nbow_for(key[1])
            if a is None or b is None:
                self._cache[key] = None
            else:
                c = cost_matrix(a, b, metric=self.options.metric)
                self._cache[key] = emd_solve(a, b, c).objective
        return self._cache[key]

    def best_under(self, s_a: Sentence, s_b: Sentence, incumbent: float):
        """Exact WMD if it could be < incumbent, else None (pruned or undefined)."""
        key = self._key(s_a.tokens, s_b.tokens)
        cached = self._cache.get(key, _MISSING)
        if cached is not _MISSING:
            return cached
        a = self.nbow_for(key[0])
        b = self.nbow_for(key[1])
        if a is None or b is None:
            self._cache[key] = None
            return None
        if self.options.metric == "euclidean":
            if wcd_lower_bound(a, b) >= incumbent:
                return None  # cannot improve; leave uncached, bound was enough
        c = cost_matrix(a, b, metric=self.options.metric)
        value = emd_solve(a, b, c).objective
        self._cache[key] = value
        return value
