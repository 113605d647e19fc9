"""Dominance space, bounding regions and the quad-tree over them.

A normal N(mu, sigma) becomes the line y = (t - mu) / sigma, i.e. the point
(m, b) = (1/sigma, -mu/sigma). We work in sheared coordinates
u = y(tmin), v = y(tmax): one normal CDF lies below another on the whole
range exactly when both of its line ends are lower, so dominance regions
and bounding regions are axis-aligned boxes in (u, v).
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels

MAX_DEPTH = 32
DOMINANCE_SLACK = 1e-12
# Synthetic corners flatter than this (relative to the range) are treated as
# invalid: their sigma is so large that the closed-form areas lose precision.
MIN_CORNER_SLOPE = 1e-4


class Dominance(enum.Enum):
    FIRST = "first"          # first argument dominates (its CDF is lower)
    SECOND = "second"
    INTERSECTING = "intersecting"


@dataclass(frozen=True)
class DominancePoint:
    m: float
    b: float
    u: float
    v: float
    object_id: int = -1


def to_dominance_point(summary, trange):
    tmin, tmax = trange
    mu, sigma = summary.mu, summary.sigma
    u, v = kernels.line_ends(mu, sigma, tmin, tmax)
    return DominancePoint(1.0 / sigma, -mu / sigma, u, v, summary.object_id)


def dominance_coords(mu, sigma, trange):
    """Vectorised (u, v) for arrays of means and deviations."""
    tmin, tmax = trange
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return (tmin - mu) / sigma, (tmax - mu) / sigma


def dominates(p, q):
    """Tri-state dominance test between two dominance points."""
    if q.u > p.u + DOMINANCE_SLACK and q.v > p.v + DOMINANCE_SLACK:
        return Dominance.FIRST
    if p.u > q.u + DOMINANCE_SLACK and p.v > q.v + DOMINANCE_SLACK:
        return Dominance.SECOND
    return Dominance.INTERSECTING


def corner_to_normal(u, v, trange):
    """Invert the transform for a synthetic box corner; None if not a normal."""
    tmin, tmax = trange
    m = (v - u) / (tmax - tmin)
    if m <= 1e-12:
        return None
    b = u - m * tmin
    return -b / m, 1.0 / m


@dataclass(frozen=True, eq=False)
class BoundingRegion:
    u_lo: float
    u_hi: float
    v_lo: float
    v_hi: float
    err_min: np.ndarray
    err_max: np.ndarray
    err_full_min: float
    err_full_max: float
    member_count: int = 0

    @property
    def lower_corner(self):
        """M_l: dominates every member."""
        return (self.u_lo, self.v_lo)

    @property
    def upper_corner(self):
        """M_u: dominated by every member."""
        return (self.u_hi, self.v_hi)

    def contains(self, u, v):
        return self.u_lo <= u <= self.u_hi and self.v_lo <= v <= self.v_hi


def build_bounding_region(points, summaries):
    """Tight box around ``points`` with per-sub-interval error envelopes."""
    if len(points) == 0:
        raise ValueError("bounding region needs at least one point")
    if len(points) != len(summaries):
        raise ValueError("points and summaries differ in length")
    u = np.array([p.u for p in points])
    v = np.array([p.v for p in points])
    emin = np.min([s.err_min for s in summaries], axis=0)
    emax = np.max([s.err_max for s in summaries], axis=0)
    ef = np.array([s.err_full for s in summaries])
    return BoundingRegion(float(u.min()), float(u.max()), float(v.min()), float(v.max()),
                          emin, emax, float(ef.min()), float(ef.max()), len(points))


def emd_br_case(region, qpoint):
    """Which bound applies: 'complete', 'partial', 'none' or 'inside'."""
    uq, vq = qpoint.u, qpoint.v
    r = region
    if (uq > r.u_hi and vq > r.v_hi) or (uq < r.u_lo and vq < r.v_lo):
        return "complete"
    if (uq > r.u_hi and vq < r.v_lo) or (uq < r.u_lo and vq > r.v_hi):
        return "none"
    if r.contains(uq, vq):
        return "inside"
    return "partial"


def emd_br(region, qsummary, qpoint, grid):
    """Lower bound from the query to every member of ``region``."""
    if len(region.err_min) != grid.s or qsummary.s != grid.s:
        raise ValueError("region, query and grid disagree on sub-interval count")
    return kernels.emd_br(
        region.u_lo, region.u_hi, region.v_lo, region.v_hi,
        float(np.min(region.err_min)), float(np.max(region.err_max)),
        region.err_full_min, region.err_full_max,
        qpoint.u, qpoint.v,
        float(np.min(qsummary.err_min)), float(np.max(qsummary.err_max)), qsummary.err_full,
        grid.tmin, grid.tmax, MIN_CORNER_SLOPE / (grid.tmax - grid.tmin))


# -- quad-tree -------------------------------------------------------------

@dataclass
class QuadTreeNode:
    region: BoundingRegion
    depth: int
    children: list = field(default_factory=list)
    entries: np.ndarray | None = None

    @property
    def is_leaf(self):
        return not self.children


class QuadTree:
    """Quad-tree over (u, v) stored as flat arrays.

    ``entries`` holds summary-table row positions in leaf order; leaf ``k``
    owns ``entries[start[k]:start[k] + count[k]]``.
    """

    def __init__(self, box, err_min, err_max, ef_min, ef_max, depth, children,
                 start, count, entries, capacity):
        self.box = box              # (K, 4): u_lo, u_hi, v_lo, v_hi
        self.err_min = err_min      # (K, s)
        self.err_max = err_max      # (K, s)
        self.ef_min = ef_min
        self.ef_max = ef_max
        self.depth = depth
        self.children = children    # (K, 4), -1 where absent
        self.start = start
        self.count = count
        self.entries = entries
        self.capacity = capacity
        self.gmin = err_min.min(axis=1)
        self.gmax = err_max.max(axis=1)

    @property
    def n_nodes(self):
        return len(self.box)

    def is_leaf(self, k):
        return self.children[k, 0] < 0

    def region(self, k):
        ul, uh, vl, vh = self.box[k]
        return BoundingRegion(float(ul), float(uh), float(vl), float(vh),
                              self.err_min[k], self.err_max[k],
                              float(self.ef_min[k]), float(self.ef_max[k]), int(self.count[k]))

    def node(self, k=0):
        """Materialise node ``k`` (recursively) as :class:`QuadTreeNode`."""
        n = QuadTreeNode(self.region(k), int(self.depth[k]))
        if self.is_leaf(k):
            s = self.start[k]
            n.entries = self.entries[s:s + self.count[k]]
        else:
            n.children = [self.node(c) for c in self.children[k] if c >= 0]
        return n

    def leaves(self):
        return [k for k in range(self.n_nodes) if self.is_leaf(k)]


def build_quadtree(u, v, err_min, err_max, err_full, node_capacity=100, max_depth=MAX_DEPTH):
    """Midpoint-split quad-tree over points (u[i], v[i]).

    Every point lands in exactly one leaf; leaves exceed ``node_capacity``
    only at ``max_depth`` or when all their points coincide.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = len(u)
    if n == 0:
        raise ValueError("cannot build a tree over zero entries")
    if node_capacity < 1:
        raise ValueError("node capacity must be positive")
    err_min = np.asarray(err_min, dtype=float)
    err_max = np.asarray(err_max, dtype=float)
    err_full = np.asarray(err_full, dtype=float)

    boxes, emins, emaxs, efmins, efmaxs, depths, kids, members = [], [], [], [], [], [], [], []

    def add(idx, depth):
        k = len(boxes)
        boxes.append((u[idx].min(), u[idx].max(), v[idx].min(), v[idx].max()))
        emins.append(err_min[idx].min(axis=0))
        emaxs.append(err_max[idx].max(axis=0))
        efmins.append(err_full[idx].min())
        efmaxs.append(err_full[idx].max())
        depths.append(depth)
        kids.append([-1, -1, -1, -1])
        members.append(idx)
        return k

    root = add(np.arange(n), 0)
    stack = [root]
    while stack:
        k = stack.pop()
        idx = members[k]
        ul, uh, vl, vh = boxes[k]
        if len(idx) <= node_capacity or depths[k] >= max_depth or (ul == uh and vl == vh):
            continue
        um = 0.5 * (ul + uh)
        vm = 0.5 * (vl + vh)
        quad = (u[idx] > um).astype(int) + 2 * (v[idx] > vm).astype(int)
        parts = [idx[quad == q] for q in range(4)]
        if sum(1 for p in parts if len(p)) < 2:
            continue
        children = []
        for q, part in enumerate(parts):
            if len(part):
                c = add(part, depths[k] + 1)
                kids[k][q] = c
                children.append(c)
        members[k] = None
        stack.extend(reversed(children))

    # compact child lists so present children come first
    kids = [sorted(c for c in row if c >= 0) + [-1] * row.count(-1) for row in kids]
    n_nodes = len(boxes)
    start = np.zeros(n_nodes, dtype=np.int64)
    count = np.zeros(n_nodes, dtype=np.int64)
    order = []
    # leaf order follows a depth-first walk so subtrees are contiguous
    walk = [root]
    pos = 0
    sub_start = {}
    while walk:
        k = walk.pop()
        if members[k] is not None:
            start[k] = pos
            count[k] = len(members[k])
            order.append(members[k])
            pos += len(members[k])
        else:
            sub_start[k] = pos
            walk.extend(reversed([c for c in kids[k] if c >= 0]))
    entries = np.concatenate(order).astype(np.int64)
    # internal nodes: count = subtree size (start unused)
    for k in reversed(range(n_nodes)):
        if members[k] is None:
            count[k] = sum(count[c] for c in kids[k] if c >= 0)
            start[k] = sub_start[k]
    s = err_min.shape[1]
    return QuadTree(
        np.array(boxes, dtype=float).reshape(-1, 4),
        np.array(emins, dtype=float).reshape(-1, s),
        np.array(emaxs, dtype=float).reshape(-1, s),
        np.array(efmins, dtype=float),
        np.array(efmaxs, dtype=float),
        np.array(depths, dtype=np.int64),
        np.array(kids, dtype=np.int64).reshape(-1, 4),
        start, count, entries, node_capacity,
    )


def audit_tree(tree, u, v, err_min, err_max, err_full):
    """Structural audit. Returns a list of violation messages (empty if clean)."""
    problems = []
    n = len(u)
    seen = np.zeros(n, dtype=np.int64)
    for k in range(tree.n_nodes):
        ul, uh, vl, vh = tree.box[k]
        if not (ul <= uh and vl <= vh):
            problems.append(f"node {k}: inverted box")
        if tree.is_leaf(k):
            ids = tree.entries[tree.start[k]:tree.start[k] + tree.count[k]]
            seen[ids] += 1
            if tree.count[k] > tree.capacity and tree.depth[k] < MAX_DEPTH:
                pu, pv = u[ids], v[ids]
                if not (np.all(pu == pu[0]) and np.all(pv == pv[0])):
                    problems.append(f"leaf {k}: {tree.count[k]} entries exceed capacity")
            if len(ids):
                if (u[ids].min() < ul or u[ids].max() > uh or v[ids].min() < vl or v[ids].max() > vh):
                    problems.append(f"leaf {k}: member outside box")
                if np.any(err_min[ids].min(axis=0) < tree.err_min[k]) or \
                        np.any(err_max[ids].max(axis=0) > tree.err_max[k]) or \
                        err_full[ids].min() < tree.ef_min[k] or err_full[ids].max() > tree.ef_max[k]:
                    problems.append(f"leaf {k}: error envelope does not cover members")
        else:
            for c in tree.children[k]:
                if c < 0:
                    continue
                cu_l, cu_h, cv_l, cv_h = tree.box[c]
                if cu_l < ul or cu_h > uh or cv_l < vl or cv_h > vh:
                    problems.append(f"node {c}: box escapes parent {k}")
                if np.any(tree.err_min[c] < tree.err_min[k]) or np.any(tree.err_max[c] > tree.err_max[k]) \
                        or tree.ef_min[c] < tree.ef_min[k] or tree.ef_max[c] > tree.ef_max[k]:
                    problems.append(f"node {c}: envelope escapes parent {k}")
                if tree.depth[c] != tree.depth[k] + 1:
                    problems.append(f"node {c}: bad depth")
    if np.any(seen != 1):
        bad = int(np.sum(seen != 1))
        problems.append(f"{bad} entries not in exactly one leaf")
    return problems
