"""Exact k-NN: per-projection best-first streams, threshold aggregation, refine."""

import heapq
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .distributions import exact_emd
from .dominance import MIN_CORNER_SLOPE
from .index import query_summaries
from .projection import combine_projection_bounds, projection_emd

# a bound prunes only when it exceeds the threshold by this margin
PRUNE_RELATIVE = 1e-6
PRUNE_ABSOLUTE = 1e-9


def prunes(bound, threshold):
    return bound > threshold * (1.0 + PRUNE_RELATIVE) + PRUNE_ABSOLUTE


@dataclass
class QuerySummary:
    projected: list
    summaries: list
    points: list


@dataclass
class QueryResult:
    query_id: int
    neighbors: list  # [(object_id, distance)], ascending (distance, id)

    @property
    def ids(self):
        return [i for i, _ in self.neighbors]

    @property
    def distances(self):
        return [d for _, d in self.neighbors]

    def lines(self):
        return [f"{self.query_id}\t{r}\t{oid}\t{dist!r}"
                for r, (oid, dist) in enumerate(self.neighbors, start=1)]


@dataclass
class QueryStats:
    nodes_visited: int = 0
    index_survivors: int = 0
    projection_survivors: int = 0
    exact_emds_performed: int = 0
    stage_seconds: dict = field(default_factory=dict)

    @property
    def total_seconds(self):
        return sum(self.stage_seconds.values())

    def as_dict(self):
        return {
            "nodes_visited": self.nodes_visited,
            "index_survivors": self.index_survivors,
            "projection_survivors": self.projection_survivors,
            "exact_emds_performed": self.exact_emds_performed,
            "stage_seconds": dict(self.stage_seconds),
            "total_seconds": self.total_seconds,
        }


class ProjectionFilter:
    """Refine filter: combined projected EMD over every index axis."""

    name = "projection"

    def bound(self, index, qsum, pos):
        per_axis = [projection_emd(index.projected(j, pos), qsum.projected[j])
                    for j in range(len(index.projections))]
        return max(combine_projection_bounds(per_axis), max(per_axis))


DEFAULT_FILTERS = (ProjectionFilter(),)


class _Stream:
    """Best-first walk of one projection tree, yielding (key, pos) in key order.

    Keys are monotone along any root-to-entry path (each key is the max of the
    parent key and the child's own bound), so pops come out non-decreasing.
    """

    def __init__(self, pj, qsum_j, qpoint):
        self.pj = pj
        self.tree = pj.tree
        self.q = qsum_j
        self.uq = qpoint.u
        self.vq = qpoint.v
        self.q_emin = float(np.min(qsum_j.err_min))
        self.q_emax = float(np.max(qsum_j.err_max))
        g = pj.grid
        self.tmin, self.tmax, self.bounds = g.tmin, g.tmax, g.boundaries
        self.min_slope = MIN_CORNER_SLOPE / (g.tmax - g.tmin)
        self.heap = []
        self.nodes_visited = 0
        self._push_node(0, 0.0)

    def _node_bound(self, k):
        t = self.tree
        ul, uh, vl, vh = t.box[k]
        return kernels.emd_br(ul, uh, vl, vh, t.gmin[k], t.gmax[k], t.ef_min[k], t.ef_max[k],
                              self.uq, self.vq, self.q_emin, self.q_emax, self.q.err_full,
                              self.tmin, self.tmax, self.min_slope)

    def _push_node(self, k, parent_key):
        key = max(parent_key, self._node_bound(k))
        # nodes sort before entries at equal key; ties resolved by index
        heapq.heappush(self.heap, (key, 0, k))

    def frontier(self):
        return self.heap[0][0] if self.heap else math.inf

    def pop_entry(self):
        """Advance to the next entry; returns (key, pos) or None when exhausted."""
        t = self.tree
        pj = self.pj
        q = self.q
        while self.heap:
            key, kind, k = heapq.heappop(self.heap)
            if kind == 1:
                return key, k
            self.nodes_visited += 1
            if t.is_leaf(k):
                ids = t.entries[t.start[k]:t.start[k] + t.count[k]]
                lbs = kernels.emd_lb_many(
                    pj.mu[ids], pj.sigma[ids], pj.err_min[ids], pj.err_max[ids],
                    pj.err_full[ids], q.mu, q.sigma, q.err_min, q.err_max, q.err_full,
                    self.tmin, self.tmax, self.bounds)
                for pos, lb in zip(ids.tolist(), np.maximum(lbs, key).tolist()):
                    heapq.heappush(self.heap, (lb, 1, pos))
            else:
                for c in t.children[k]:
                    if c >= 0:
                        self._push_node(int(c), key)
        return None


def summarize_query(index, query):
    rows = query_summaries(index, query)
    return QuerySummary([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])


def _combined(values):
    return max(combine_projection_bounds(values), max(values))


def knn(index, query, k, filters=DEFAULT_FILTERS):
    """Exact k nearest neighbours of ``query`` under the exact EMD.

    Returns ``(QueryResult, QueryStats)``. Results are sorted by
    (distance, object id).
    """
    n = len(index)
    if n == 0:
        raise ValueError("index is empty")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of indexed objects ({n})")
    stats = QueryStats()
    clock = time.perf_counter
    t0 = clock()
    qsum = summarize_query(index, query)
    P = len(index.projections)
    streams = [_Stream(index.projections[j], qsum.summaries[j], qsum.points[j]) for j in range(P)]
    stats.stage_seconds["summary"] = clock() - t0

    best = []       # max-heap of (-dist, -id) holding the current k best
    seen = {}       # pos -> per-projection bounds
    cands = []      # (combined bound, object id, pos)
    t_index = t_proj = t_exact = 0.0

    def threshold():
        return -best[0][0] if len(best) == k else math.inf

    def offer(pos, dist):
        item = (-dist, -int(index.ids[pos]))
        if len(best) < k:
            heapq.heappush(best, item)
        elif item > best[0]:
            heapq.heapreplace(best, item)

    def refine(pos):
        nonlocal t_proj, t_exact
        t1 = clock()
        for f in filters:
            if prunes(f.bound(index, qsum, pos), threshold()):
                t_proj += clock() - t1
                return
        stats.projection_survivors += 1
        t2 = clock()
        t_proj += t2 - t1
        dist = exact_emd(index.dataset[pos], query)
        stats.exact_emds_performed += 1
        offer(pos, dist)
        t_exact += clock() - t2

    turn = 0
    live = list(range(P))
    ts = clock()
    while True:
        fronts = [s.frontier() for s in streams]
        frontier = _combined(fronts)
        top = cands[0][0] if cands else math.inf
        thr = threshold()
        if min(top, frontier) == math.inf or (len(best) == k and prunes(min(top, frontier), thr)):
            break
        if cands and top <= frontier:
            bound, _, pos = heapq.heappop(cands)
            if prunes(bound, thr):
                continue
            stats.index_survivors += 1
            t_index += clock() - ts
            refine(pos)
            ts = clock()
            continue
        # advance one stream, round-robin over the non-exhausted ones
        j = live[turn % len(live)]
        turn += 1
        got = streams[j].pop_entry()
        if got is None:
            live.remove(j)
            continue
        key, pos = got
        b = seen.get(pos)
        if b is None:
            # random access: this object's bound in every projection
            b = [key if i == j else _entry_lb(index, i, qsum, pos) for i in range(P)]
            seen[pos] = b
            heapq.heappush(cands, (_combined(b), int(index.ids[pos]), pos))
    t_index += clock() - ts
    stats.nodes_visited = sum(s.nodes_visited for s in streams)
    stats.stage_seconds["index"] = t_index
    stats.stage_seconds["projection"] = t_proj
    stats.stage_seconds["exact"] = t_exact

    ranked = sorted((-d, -i) for d, i in best)
    result = QueryResult(query.id, [(int(i), float(d)) for d, i in ranked])
    return result, stats


def _entry_lb(index, j, qsum, pos):
    pj = index.projections[j]
    q = qsum.summaries[j]
    g = pj.grid
    return kernels.emd_lb(float(pj.mu[pos]), float(pj.sigma[pos]), pj.err_min[pos],
                          pj.err_max[pos], float(pj.err_full[pos]), q.mu, q.sigma,
                          q.err_min, q.err_max, q.err_full, g.tmin, g.tmax, g.boundaries)


@dataclass
class BatchReport:
    queries: int
    mean_seconds: float
    median_seconds: float
    mean_exact_emds: float
    mean_index_survivors: float
    mean_projection_survivors: float
    mean_nodes_visited: float
    exact_fraction: list

    def as_dict(self):
        return dict(self.__dict__)


def aggregate(stats, n_objects):
    if not stats:
        raise ValueError("no queries to aggregate")
    times = [s.total_seconds for s in stats]
    return BatchReport(
        queries=len(stats),
        mean_seconds=statistics.fmean(times),
        median_seconds=statistics.median(times),
        mean_exact_emds=statistics.fmean(s.exact_emds_performed for s in stats),
        mean_index_survivors=statistics.fmean(s.index_survivors for s in stats),
        mean_projection_survivors=statistics.fmean(s.projection_survivors for s in stats),
        mean_nodes_visited=statistics.fmean(s.nodes_visited for s in stats),
        exact_fraction=[s.exact_emds_performed / n_objects for s in stats],
    )


def batch_query(index, queries, k, threads=1, filters=DEFAULT_FILTERS):
    """Run many queries; returns ``(list of (QueryResult, QueryStats), BatchReport)``.

    Results come back in input order whatever the thread count.
    """
    queries = list(queries)
    if not queries:
        raise ValueError("no queries given")
    if threads < 1:
        raise ValueError("threads must be positive")
    if k > len(index):
        raise ValueError(f"k={k} exceeds the number of indexed objects ({len(index)})")
    if threads == 1:
        out = [knn(index, q, k, filters) for q in queries]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(lambda q: knn(index, q, k, filters), queries))
    return out, aggregate([s for _, s in out], len(index))
