"""The normal lower-bound index: per-projection summary tables and quad-trees.

On-disk layout (little-endian), version 1::

    b"NLBI" u32 version  u32 P  u32 d  u64 N  u32 s  u32 node_capacity
    P x [ d f8 components, f8 center, f8 tmin, f8 tmax, u32 s, (s+1) f8 boundaries ]
    N u64 object ids
    u64 table_bytes, then P x N x (mu, sigma, err_full, err_min[s], err_max[s]) f8
    P x tree [ u64 K, K*4 f8 box, K*s f8 err_min, K*s f8 err_max, K f8 ef_min,
               K f8 ef_max, K i64 depth, K*4 i64 children, K i64 start,
               K i64 count, N i64 entries ]
    u64 dataset_bytes, then N x [ u64 id, u32 n, n*d f8 bins, n f8 weights ]
    32-byte SHA-256 of everything above
"""

import hashlib
import io
import math
import struct
import threading

import numpy as np

from .distributions import DiscreteDistribution
from .dominance import MAX_DEPTH, QuadTree, build_quadtree, dominance_coords, to_dominance_point
from .normal_bound import NormalSummary, SubIntervalGrid, default_sub_intervals, summarize
from .projection import (ProjectionVector, dataset_range, project, select_projections)

MAGIC = b"NLBI"
VERSION = 1
DEFAULT_NODE_CAPACITY = 100


class IndexFormatError(ValueError):
    pass


class ProjectionIndex:
    """Everything stored for one projection axis."""

    def __init__(self, axis, grid, mu, sigma, err_min, err_max, err_full, tree=None,
                 node_capacity=DEFAULT_NODE_CAPACITY):
        self.axis = axis
        self.grid = grid
        self.mu = np.ascontiguousarray(mu, dtype=float)
        self.sigma = np.ascontiguousarray(sigma, dtype=float)
        self.err_min = np.ascontiguousarray(err_min, dtype=float)
        self.err_max = np.ascontiguousarray(err_max, dtype=float)
        self.err_full = np.ascontiguousarray(err_full, dtype=float)
        self.u, self.v = dominance_coords(self.mu, self.sigma, self.trange)
        if tree is None:
            tree = build_quadtree(self.u, self.v, self.err_min, self.err_max, self.err_full,
                                  node_capacity)
        self.tree = tree

    @property
    def trange(self):
        return (self.grid.tmin, self.grid.tmax)

    def summary(self, pos, object_id=-1):
        return NormalSummary(float(self.mu[pos]), float(self.sigma[pos]), self.err_min[pos],
                             self.err_max[pos], float(self.err_full[pos]), object_id)

    def table(self):
        return np.column_stack((self.mu, self.sigma, self.err_full, self.err_min, self.err_max))


def _summarize_axis(dataset, axis, s):
    tmin, tmax = dataset_range(dataset, axis)
    grid = SubIntervalGrid(tmin, tmax, s)
    n = len(dataset)
    mu = np.empty(n)
    sigma = np.empty(n)
    emin = np.empty((n, s))
    emax = np.empty((n, s))
    ef = np.empty(n)
    for i, p in enumerate(dataset):
        sm = summarize(project(p, axis, tmin, tmax), grid, p.id)
        mu[i], sigma[i], ef[i] = sm.mu, sm.sigma, sm.err_full
        emin[i] = sm.err_min
        emax[i] = sm.err_max
    return grid, mu, sigma, emin, emax, ef


class NormalIndex:
    """Immutable index over a dataset of :class:`DiscreteDistribution`."""

    def __init__(self, dataset, projections, node_capacity=DEFAULT_NODE_CAPACITY):
        self.dataset = list(dataset)
        self.ids = np.array([p.id for p in self.dataset], dtype=np.int64)
        self.position = {int(i): k for k, i in enumerate(self.ids)}
        self.projections = list(projections)
        self.node_capacity = node_capacity
        self._projected = [dict() for _ in self.projections]
        self._lock = threading.Lock()

    @classmethod
    def build(cls, dataset, projections=None, sub_intervals=None,
              node_capacity=DEFAULT_NODE_CAPACITY, axes=None):
        """Project, summarise and index ``dataset``.

        ``projections`` defaults to 2 for d >= 2 else 1; ``sub_intervals`` to
        round(ln n) for the largest bin count n. Explicit ``axes`` (unit
        :class:`ProjectionVector` objects) skip the PCA step.
        """
        dataset = list(dataset)
        if not dataset:
            raise ValueError("cannot index an empty dataset")
        d = dataset[0].d
        if any(p.d != d for p in dataset):
            raise ValueError("mixed bin dimensions")
        if len({p.id for p in dataset}) != len(dataset):
            raise ValueError("object ids must be unique")
        if node_capacity < 1:
            raise ValueError("node capacity must be positive")
        if axes is None:
            if projections is None:
                projections = 2 if d >= 2 else 1
            if not 1 <= projections <= d:
                raise ValueError(f"projection count {projections} not in [1, {d}]")
            axes = select_projections(dataset, projections)
        if sub_intervals is None:
            sub_intervals = default_sub_intervals(max(p.n for p in dataset))
        if sub_intervals < 1:
            raise ValueError("sub-interval count must be positive")
        projs = []
        for axis in axes:
            grid, mu, sigma, emin, emax, ef = _summarize_axis(dataset, axis, sub_intervals)
            projs.append(ProjectionIndex(axis, grid, mu, sigma, emin, emax, ef,
                                         node_capacity=node_capacity))
        return cls(dataset, projs, node_capacity)

    # -- accessors ----------------------------------------------------------

    def __len__(self):
        return len(self.dataset)

    @property
    def d(self):
        return self.dataset[0].d

    @property
    def s(self):
        return self.projections[0].grid.s

    def projected(self, j, pos):
        """Projected distribution of object at ``pos`` on axis ``j`` (cached)."""
        cache = self._projected[j]
        pp = cache.get(pos)
        if pp is None:
            pj = self.projections[j]
            pp = project(self.dataset[pos], pj.axis, pj.grid.tmin, pj.grid.tmax)
            with self._lock:
                cache[pos] = pp
        return pp

    def summary_table_bytes(self):
        return sum(pj.table().astype("<f8").nbytes for pj in self.projections)

    def with_node_capacity(self, node_capacity):
        """Same summaries, trees rebuilt with another capacity."""
        projs = [ProjectionIndex(pj.axis, pj.grid, pj.mu, pj.sigma, pj.err_min, pj.err_max,
                                 pj.err_full, node_capacity=node_capacity)
                 for pj in self.projections]
        return NormalIndex(self.dataset, projs, node_capacity)

    # -- serialisation ------------------------------------------------------

    def to_bytes(self):
        buf = io.BytesIO()
        w = buf.write
        n, s, d = len(self), self.s, self.d
        w(MAGIC)
        w(struct.pack("<IIIQII", VERSION, len(self.projections), d, n, s, self.node_capacity))
        for pj in self.projections:
            w(pj.axis.components.astype("<f8").tobytes())
            w(struct.pack("<dddI", pj.axis.center, pj.grid.tmin, pj.grid.tmax, pj.grid.s))
            w(pj.grid.boundaries.astype("<f8").tobytes())
        w(self.ids.astype("<u8").tobytes())
        tables = [pj.table().astype("<f8").tobytes() for pj in self.projections]
        w(struct.pack("<Q", sum(len(t) for t in tables)))
        for t in tables:
            w(t)
        for pj in self.projections:
            t = pj.tree
            w(struct.pack("<Q", t.n_nodes))
            for arr, dt in ((t.box, "<f8"), (t.err_min, "<f8"), (t.err_max, "<f8"),
                            (t.ef_min, "<f8"), (t.ef_max, "<f8"), (t.depth, "<i8"),
                            (t.children, "<i8"), (t.start, "<i8"), (t.count, "<i8"),
                            (t.entries, "<i8")):
                w(np.ascontiguousarray(arr).astype(dt).tobytes())
        data = io.BytesIO()
        for p in self.dataset:
            data.write(struct.pack("<QI", p.id, p.n))
            data.write(p.bins.astype("<f8").tobytes())
            data.write(p.weights.astype("<f8").tobytes())
        w(struct.pack("<Q", data.tell()))
        w(data.getvalue())
        body = buf.getvalue()
        return body + hashlib.sha256(body).digest()

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, raw, layout=None):
        """Parse an index image. ``layout`` (a dict) receives section sizes."""
        if len(raw) < 36 or raw[:4] != MAGIC:
            raise IndexFormatError("not an NLBI index file (bad magic)")
        body, digest = raw[:-32], raw[-32:]
        if hashlib.sha256(body).digest() != digest:
            raise IndexFormatError("checksum mismatch: index file is corrupt")
        r = _Reader(body, 4)
        version, n_proj, d, n, s, cap = r.unpack("<IIIQII")
        if version != VERSION:
            raise IndexFormatError(f"unsupported index version {version}")
        heads = []
        for _ in range(n_proj):
            comps = r.array("<f8", d)
            center, tmin, tmax, s_j = r.unpack("<dddI")
            bounds = r.array("<f8", s_j + 1)
            grid = SubIntervalGrid(tmin, tmax, s_j)
            if not np.array_equal(grid.boundaries, bounds):
                raise IndexFormatError("stored grid boundaries do not match the grid")
            heads.append((ProjectionVector(comps, center), grid))
        ids = r.array("<u8", n).astype(np.int64)
        (table_bytes,) = r.unpack("<Q")
        width = 3 + 2 * s
        if layout is not None:
            layout["table_bytes"] = table_bytes
            layout["expected_table_bytes"] = n * n_proj * width * 8
            layout.update(N=n, P=n_proj, s=s)
        if table_bytes != n * n_proj * width * 8:
            raise IndexFormatError(f"summary table holds {table_bytes} bytes, "
                                   f"expected {n * n_proj * width * 8}")
        tables = [r.array("<f8", n * width).reshape(n, width) for _ in range(n_proj)]
        trees = []
        for _ in range(n_proj):
            (k,) = r.unpack("<Q")
            box = r.array("<f8", k * 4).reshape(k, 4)
            tmin_ = r.array("<f8", k * s).reshape(k, s)
            tmax_ = r.array("<f8", k * s).reshape(k, s)
            efmin = r.array("<f8", k)
            efmax = r.array("<f8", k)
            depth = r.array("<i8", k)
            children = r.array("<i8", k * 4).reshape(k, 4)
            start = r.array("<i8", k)
            count = r.array("<i8", k)
            entries = r.array("<i8", n)
            trees.append(QuadTree(box, tmin_, tmax_, efmin, efmax, depth, children,
                                  start, count, entries, cap))
        (data_bytes,) = r.unpack("<Q")
        end = r.pos + data_bytes
        dataset = []
        while r.pos < end:
            oid, nb = r.unpack("<QI")
            bins = r.array("<f8", nb * d).reshape(nb, d)
            weights = r.array("<f8", nb)
            dataset.append(DiscreteDistribution(oid, bins, weights))
        if r.pos != len(body):
            raise IndexFormatError("trailing bytes after dataset section")
        if len(dataset) != n or any(p.id != i for p, i in zip(dataset, ids)):
            raise IndexFormatError("dataset section does not match the id table")
        projs = []
        for (axis, grid), tab, tree in zip(heads, tables, trees):
            projs.append(ProjectionIndex(axis, grid, tab[:, 0], tab[:, 1], tab[:, 3:3 + s],
                                         tab[:, 3 + s:], tab[:, 2], tree, cap))
        return cls(dataset, projs, cap)

    @classmethod
    def load(cls, path, layout=None):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), layout)


class _Reader:
    def __init__(self, raw, pos=0):
        self.raw = raw
        self.pos = pos

    def unpack(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.raw):
            raise IndexFormatError("truncated index file")
        out = struct.unpack_from(fmt, self.raw, self.pos)
        self.pos += size
        return out

    def array(self, dtype, count):
        dt = np.dtype(dtype)
        size = dt.itemsize * count
        if self.pos + size > len(self.raw):
            raise IndexFormatError("truncated index file")
        out = np.frombuffer(self.raw, dtype=dt, count=count, offset=self.pos).astype(
            dt.newbyteorder("="))
        self.pos += size
        return out


def query_summaries(index, query):
    """Per-projection (projected query, summary, dominance point)."""
    if query.d != index.d:
        raise ValueError(f"query has d={query.d}, index has d={index.d}")
    out = []
    for pj in index.projections:
        pp = project(query, pj.axis, pj.grid.tmin, pj.grid.tmax)
        sm = summarize(pp, pj.grid, query.id)
        out.append((pp, sm, to_dominance_point(sm, pj.trange)))
    return out


def describe(index):
    """Short human-readable summary used by the CLI."""
    n, s, P = len(index), index.s, len(index.projections)
    lines = [
        f"objects: {n}",
        f"dimension: {index.d}",
        f"projections: {P}",
        f"sub-intervals: {s}",
        f"node capacity: {index.node_capacity}",
        f"summary table: {index.summary_table_bytes()} bytes "
        f"= N*P*(3+2s) reals = {n}*{P}*{3 + 2 * s} (2+2s per summary plus err_full)",
    ]
    for j, pj in enumerate(index.projections):
        comps = ", ".join(f"{c:.6g}" for c in pj.axis.components)
        lines.append(f"axis {j}: ({comps}) center={pj.axis.center:.6g} "
                     f"range=[{pj.grid.tmin:.6g}, {pj.grid.tmax:.6g}] "
                     f"nodes={pj.tree.n_nodes} max_depth={int(pj.tree.depth.max())}")
    if any(int(pj.tree.depth.max()) >= MAX_DEPTH for pj in index.projections):
        lines.append("warning: a tree reached the maximum depth")
    return "\n".join(lines)
