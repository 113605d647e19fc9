"""Full audit of an index file: structure, stored summaries, bound soundness, oracles."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .distributions import exact_emd
from .dominance import MIN_CORNER_SLOPE, audit_tree
from .index import IndexFormatError, NormalIndex, query_summaries
from .normal_bound import fit_normal, summarize
from .oracle import oracle_emd_1d, oracle_error_extrema, oracle_knn
from .projection import combine_projection_bounds, dataset_range, project, projection_emd
from .query import knn

SLACK_REL = 1e-6
SLACK_ABS = 1e-9


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self):
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"


def _le(a, b):
    return a <= b * (1.0 + SLACK_REL) + SLACK_ABS


def verify_file(path, pairs=200, oracle_queries=None, error_samples=3, seed=0):
    """Audit the index at ``path``; returns a list of :class:`Check`.

    A file that cannot be parsed yields a single failed check.
    """
    layout = {}
    try:
        index = NormalIndex.load(path, layout)
    except IndexFormatError as exc:
        checks = [Check("file format", False, str(exc))]
        if "table_bytes" in layout:
            checks.append(Check("summary table size", False,
                                f"{layout['table_bytes']} bytes stored, "
                                f"{layout['expected_table_bytes']} expected"))
        return checks
    checks = [Check("file format", True, "magic, version and checksum valid")]
    expected = layout["N"] * layout["P"] * (3 + 2 * layout["s"]) * 8
    checks.append(Check("summary table size", layout["table_bytes"] == expected,
                        f"{layout['table_bytes']} bytes = {layout['N']} x {layout['P']} x "
                        f"(3 + 2*{layout['s']}) reals x 8"))
    checks.extend(verify_index(index, pairs, oracle_queries, error_samples, seed))
    return checks


def verify_index(index, pairs=200, oracle_queries=None, error_samples=3, seed=0):
    rng = np.random.default_rng(seed)
    n = len(index)
    checks = []

    problems = []
    for j, pj in enumerate(index.projections):
        problems += [f"axis {j}: {p}" for p in
                     audit_tree(pj.tree, pj.u, pj.v, pj.err_min, pj.err_max, pj.err_full)]
    checks.append(Check("tree structure", not problems,
                        "; ".join(problems[:5]) or "boxes, envelopes and leaf coverage consistent"))

    # stored ranges and summaries must match a recomputation from the embedded data
    bad = []
    for j, pj in enumerate(index.projections):
        lo, hi = dataset_range(index.dataset, pj.axis)
        if (lo, hi) != (pj.grid.tmin, pj.grid.tmax):
            bad.append(f"axis {j}: stored range differs from data")
        for pos in range(n):
            sm = summarize(index.projected(j, pos), pj.grid)
            row = np.concatenate(([sm.mu, sm.sigma, sm.err_full], sm.err_min, sm.err_max))
            if not np.allclose(row, pj.table()[pos], rtol=0, atol=1e-9):
                bad.append(f"axis {j}: summary of object {index.ids[pos]} differs")
                break
    checks.append(Check("stored summaries", not bad, "; ".join(bad) or f"{n} objects recomputed"))

    # bound chain on random pairs
    viol = 0
    P = len(index.projections)
    for _ in range(pairs):
        a, b = rng.integers(0, n, size=2)
        p, q = index.dataset[a], index.dataset[b]
        qrows = query_summaries(index, q)
        proj = []
        for j, pj in enumerate(index.projections):
            lb = kernels.emd_lb(pj.mu[a], pj.sigma[a], pj.err_min[a], pj.err_max[a],
                                pj.err_full[a], qrows[j][1].mu, qrows[j][1].sigma,
                                qrows[j][1].err_min, qrows[j][1].err_max, qrows[j][1].err_full,
                                pj.grid.tmin, pj.grid.tmax, pj.grid.boundaries)
            pe = projection_emd(index.projected(j, a), qrows[j][0])
            viol += not _le(lb, pe)
            proj.append(pe)
        viol += not _le(combine_projection_bounds(proj), exact_emd(p, q))
    checks.append(Check("bound soundness", viol == 0,
                        f"{viol} violations over {pairs} pairs x {P} projections"))

    # node bounds versus member bounds, for a few query objects
    viol = 0
    tested = 0
    for a in rng.integers(0, n, size=min(5, n)):
        qrows = query_summaries(index, index.dataset[a])
        for j, pj in enumerate(index.projections):
            _, qs, qp = qrows[j]
            t = pj.tree
            g = pj.grid
            lbs = kernels.emd_lb_many(pj.mu, pj.sigma, pj.err_min, pj.err_max, pj.err_full,
                                      qs.mu, qs.sigma, qs.err_min, qs.err_max, qs.err_full,
                                      g.tmin, g.tmax, g.boundaries)
            for k in range(t.n_nodes):
                ul, uh, vl, vh = t.box[k]
                br = kernels.emd_br(ul, uh, vl, vh, t.gmin[k], t.gmax[k], t.ef_min[k],
                                    t.ef_max[k], qp.u, qp.v, float(np.min(qs.err_min)),
                                    float(np.max(qs.err_max)), qs.err_full, g.tmin, g.tmax,
                                    MIN_CORNER_SLOPE / (g.tmax - g.tmin))
                members = t.entries[t.start[k]:t.start[k] + t.count[k]]
                tested += 1
                viol += br > lbs[members].min() + 1e-6
    checks.append(Check("node bound soundness", viol == 0,
                        f"{viol} violations over {tested} node/query pairs"))

    # oracle spot checks
    bad = []
    for a in rng.integers(0, n, size=min(error_samples, n)):
        for j, pj in enumerate(index.projections):
            pp = index.projected(j, a)
            emin, emax = oracle_error_extrema(pp, fit_normal(pp, pj.grid.sigma_floor), pj.grid)
            if np.abs(emin - pj.err_min[a]).max() > 1e-6 or np.abs(emax - pj.err_max[a]).max() > 1e-6:
                bad.append(f"error extrema of object {index.ids[a]} on axis {j}")
            b = rng.integers(0, n)
            qp = project(index.dataset[b], pj.axis, pj.grid.tmin, pj.grid.tmax)
            if abs(oracle_emd_1d(pp, qp) - projection_emd(pp, qp)) > 1e-9:
                bad.append(f"projected EMD of ({index.ids[a]}, {index.ids[b]}) on axis {j}")
    if oracle_queries is None:
        oracle_queries = 2 if n <= 10_000 else 0
    k = min(4, n)
    for a in rng.integers(0, n, size=oracle_queries):
        q = index.dataset[a]
        got, _ = knn(index, q, k)
        if got.neighbors != oracle_knn(index.dataset, q, k):
            bad.append(f"k-NN of object {index.ids[a]} differs from linear scan")
    detail = "; ".join(bad) or (f"{error_samples} error tables, {oracle_queries} k-NN scans")
    checks.append(Check("oracle spot checks", not bad, detail))
    return checks
