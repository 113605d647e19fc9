"""Shared workload builders for the soundness tests."""

import numpy as np

from nlbi import kernels
from nlbi.dominance import build_bounding_region, emd_br, emd_br_case, to_dominance_point
from nlbi.normal_bound import SubIntervalGrid, summarize
from nlbi.projection import ProjectedDistribution

CASES = ("complete", "partial", "none", "inside")


def random_projected(rng, tmin=-1.0, tmax=1.0, spill=0.0):
    n = int(rng.integers(1, 48))
    lo, hi = tmin - spill, tmax + spill
    c = rng.uniform(lo, hi)
    width = np.exp(rng.uniform(np.log(0.005), np.log(1.5)))
    locs = np.unique(np.clip(c + rng.normal(size=n) * width, lo, hi))
    w = rng.dirichlet(np.ones(len(locs)) * rng.uniform(0.2, 3))
    return ProjectedDistribution(locs, w, tmin, tmax, ("pool",))


class SummaryPool:
    """Many summaries on one grid, with (u, v) coordinates for region sampling."""

    def __init__(self, rng, size, s):
        self.grid = SubIntervalGrid(-1.0, 1.0, s)
        self.summaries = [summarize(random_projected(rng), self.grid, i) for i in range(size)]
        self.points = [to_dominance_point(sm, (-1.0, 1.0)) for sm in self.summaries]
        self.uv = np.array([(p.u, p.v) for p in self.points])

    def region_around(self, rng, max_members):
        """Members inside a random box around a random anchor, at most ``max_members``."""
        anchor = self.uv[rng.integers(len(self.uv))]
        half = np.exp(rng.uniform(np.log(1e-3), np.log(50.0), size=2))
        inside = np.flatnonzero(np.all(np.abs(self.uv - anchor) <= half, axis=1))
        if len(inside) > max_members:
            inside = rng.choice(inside, size=max_members, replace=False)
        return inside

    def trial(self, rng, max_members, query=None):
        """One (region, query) trial -> (case, bound, min member emd_lb)."""
        members = self.region_around(rng, max_members)
        region = build_bounding_region([self.points[i] for i in members],
                                       [self.summaries[i] for i in members])
        if query is None:
            sq = summarize(random_projected(rng, spill=0.3 * rng.random()), self.grid)
        else:
            sq = query
        qp = to_dominance_point(sq, (-1.0, 1.0))
        g = self.grid
        br = emd_br(region, sq, qp, g)
        best = min(kernels.emd_lb(self.summaries[i].mu, self.summaries[i].sigma,
                                  self.summaries[i].err_min, self.summaries[i].err_max,
                                  self.summaries[i].err_full, sq.mu, sq.sigma, sq.err_min,
                                  sq.err_max, sq.err_full, g.tmin, g.tmax, g.boundaries)
                   for i in members)
        return emd_br_case(region, qp), br, best


def run_region_trials(rng, pool, trials, max_members, per_case):
    """Run until ``trials`` done and every case seen ``per_case`` times (capped)."""
    counts = dict.fromkeys(CASES, 0)
    violations = []
    done = 0
    while (done < trials or min(counts.values()) < per_case) and done < 50 * trials:
        case, br, best = pool.trial(rng, max_members)
        counts[case] += 1
        done += 1
        if br > best + 1e-6:
            violations.append((case, br, best))
    return counts, violations, done
