"""Discrete distributions, exact EMD, dataset I/O and synthetic corpora."""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

# POT probes every array backend (torch, jax, tf, cupy) on import; only numpy is used here.
for _key in ("PYTORCH", "JAX", "TENSORFLOW", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_key}", "1")
import ot  # noqa: E402

WEIGHT_TOL = 1e-9
LOAD_TOL = 1e-6


class DatasetError(ValueError):
    """Malformed or invalid dataset record."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _merge_bins(bins, weights):
    uniq, inverse = np.unique(bins, axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inverse.ravel(), weights)
    return uniq, merged


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Weighted point set in R^d. Duplicate bin locations are merged."""

    id: int
    bins: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=float)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if bins.ndim == 1:
            bins = bins[:, None]
        if bins.ndim != 2 or len(bins) == 0:
            raise ValueError("a distribution needs at least one bin")
        if len(bins) != len(weights):
            raise ValueError(f"{len(bins)} bins but {len(weights)} weights")
        if not np.all(np.isfinite(bins)) or not np.all(np.isfinite(weights)):
            raise ValueError("bins and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum():.12g}, expected 1")
        if int(self.id) < 0:
            raise ValueError("id must be non-negative")
        if len(bins) > 1:
            bins, weights = _merge_bins(bins, weights)
        bins.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def normalized(cls, id, bins, weights):
        w = np.asarray(weights, dtype=float)
        return cls(id, bins, w / w.sum())

    @property
    def n(self):
        return len(self.weights)

    @property
    def d(self):
        return self.bins.shape[1]

    def __repr__(self):
        return f"DiscreteDistribution(id={self.id}, n={self.n}, d={self.d})"


@dataclass
class EMDResult:
    distance: float
    flow: np.ndarray
    cost: np.ndarray


def exact_emd(p, q, return_flow=False):
    """Exact EMD with L2 ground distance via network simplex.

    With ``return_flow=True`` an :class:`EMDResult` carrying the optimal flow
    and the cost matrix is returned instead of the bare distance.
    """
    if p.d != q.d:
        raise ValueError(f"dimension mismatch: {p.d} vs {q.d}")
    cost = cdist(p.bins, q.bins)
    if p.n == 1 or q.n == 1:
        # one side is a point mass: the only feasible flow
        flow = np.outer(p.weights, q.weights)
    else:
        flow, log = ot.emd(p.weights, q.weights, cost, numItermax=1_000_000, log=True)
        if log["result_code"] != 1:
            raise RuntimeError(f"transport solver did not converge: {log['warning']}")
    distance = max(float(np.sum(flow * cost)), 0.0)
    if return_flow:
        return EMDResult(distance, flow, cost)
    return distance


# -- dataset files ---------------------------------------------------------

def _parse_tab_record(line, lineno):
    parts = line.split("\t")
    if len(parts) != 5:
        raise DatasetError(f"expected 5 tab-separated fields, got {len(parts)}", lineno)
    try:
        oid = int(parts[0])
        d = int(parts[1])
        n = int(parts[2])
        bins = [[float(x) for x in b.split(",")] for b in parts[3].split(";")]
        weights = [float(x) for x in parts[4].split(",")]
    except ValueError as exc:
        raise DatasetError(f"unparseable field ({exc})", lineno) from None
    if len(bins) != n or len(weights) != n:
        raise DatasetError(f"declared n={n} but found {len(bins)} bins, {len(weights)} weights", lineno)
    if any(len(b) != d for b in bins):
        raise DatasetError(f"declared d={d} but a bin has a different arity", lineno)
    return oid, bins, weights


def _parse_json_record(line, lineno):
    try:
        rec = json.loads(line)
        return int(rec["id"]), rec["bins"], rec["weights"]
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"bad JSON record ({exc})", lineno) from None


def load_dataset(path, renormalize=False):
    """Read a line-delimited dataset (tab format or JSON lines).

    Weight sums off by more than 1e-6 are rejected unless ``renormalize``.
    """
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("{"):
                oid, bins, weights = _parse_json_record(line, lineno)
            else:
                oid, bins, weights = _parse_tab_record(line, lineno)
            w = np.asarray(weights, dtype=float)
            if np.any(w < 0):
                raise DatasetError("negative weight", lineno)
            total = w.sum()
            if abs(total - 1.0) > LOAD_TOL:
                if not renormalize or total <= 0:
                    raise DatasetError(f"weights sum to {total:.9g} (use renormalize)", lineno)
            w = w / total
            if oid in seen:
                raise DatasetError(f"duplicate id {oid}", lineno)
            seen.add(oid)
            try:
                out.append(DiscreteDistribution(oid, bins, w))
            except ValueError as exc:
                raise DatasetError(str(exc), lineno) from None
    dims = {p.d for p in out}
    if len(dims) > 1:
        raise DatasetError(f"mixed bin dimensions {sorted(dims)}")
    return out


def format_record(p):
    bins = ";".join(",".join(repr(float(x)) for x in b) for b in p.bins)
    weights = ",".join(repr(float(x)) for x in p.weights)
    return f"{p.id}\t{p.d}\t{p.n}\t{bins}\t{weights}"


def write_dataset(path, dists):
    with open(path, "w", encoding="utf-8") as fh:
        for p in dists:
            fh.write(format_record(p) + "\n")


# -- synthetic corpora -----------------------------------------------------

@dataclass
class CorpusSpec:
    """Parameters for :func:`generate_synthetic`.

    ``layout="grid"`` places all distributions on one shared regular grid of
    ``bins`` cells (like image tile descriptors); ``layout="scatter"`` gives
    every distribution its own random bin locations.
    """

    n_dists: int
    bins: int = 16
    dim: int = 2
    layout: str = "grid"
    clusters: int = 1
    spread: float = 0.15
    blobs: int = 2
    extent: float = 1.0
    min_weight: float = 0.0
    shapes: tuple = field(default=("round",))


def _grid_points(n, dim, extent):
    side = int(np.ceil(n ** (1.0 / dim)))
    axes = [np.linspace(0.0, extent, side)] * dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    return pts[:n]


def _blob_weights(points, centers, scales, amps):
    w = np.zeros(len(points))
    for c, s, a in zip(centers, scales, amps):
        z = (points - c) / s
        w += a * np.exp(-0.5 * np.sum(z * z, axis=1))
    return w


def generate_synthetic(spec, seed):
    """Deterministic clustered corpus of distributions.

    Each cluster draws a prototype (a few Gaussian blobs with cluster-specific
    centres and shapes); members perturb blob centres, widths and amplitudes.
    Object ``i`` belongs to cluster ``i % spec.clusters`` (see
    :func:`cluster_labels`).
    """
    if spec.n_dists <= 0 or spec.bins <= 0 or spec.dim <= 0:
        raise ValueError("n_dists, bins and dim must be positive")
    if spec.clusters <= 0:
        raise ValueError("clusters must be positive")
    if spec.layout not in ("grid", "scatter"):
        raise ValueError(f"unknown layout {spec.layout!r}")
    rng = np.random.default_rng(seed)
    ext = spec.extent
    grid = _grid_points(spec.bins, spec.dim, ext) if spec.layout == "grid" else None

    protos = []
    for c in range(spec.clusters):
        shape = spec.shapes[c % len(spec.shapes)]
        centers = rng.uniform(0.1 * ext, 0.9 * ext, size=(spec.blobs, spec.dim))
        base = rng.uniform(0.08, 0.25, size=(spec.blobs, 1)) * ext
        if shape == "elongated":
            scales = base * rng.uniform(0.3, 3.0, size=(spec.blobs, spec.dim))
        else:
            scales = np.repeat(base, spec.dim, axis=1)
        amps = rng.uniform(0.5, 1.5, size=spec.blobs)
        protos.append((centers, scales, amps))

    labels = cluster_labels(spec)
    out = []
    for i in range(spec.n_dists):
        centers, scales, amps = protos[labels[i]]
        jc = centers + rng.normal(0.0, spec.spread * 0.25 * ext, size=centers.shape)
        js = scales * np.exp(rng.normal(0.0, spec.spread, size=scales.shape))
        ja = amps * np.exp(rng.normal(0.0, spec.spread, size=amps.shape))
        if grid is not None:
            pts = grid
        else:
            pick = rng.integers(0, spec.blobs, size=spec.bins)
            pts = jc[pick] + rng.normal(size=(spec.bins, spec.dim)) * js[pick]
        w = _blob_weights(pts, jc, js, ja) + 1e-12
        if spec.min_weight > 0:
            w = w / w.sum()
            keep = w >= spec.min_weight
            if not keep.any():
                keep[np.argmax(w)] = True
            pts, w = pts[keep], w[keep]
        out.append(DiscreteDistribution(i, pts, w / w.sum()))
    return out


def cluster_labels(spec):
    return np.arange(spec.n_dists) % spec.clusters
