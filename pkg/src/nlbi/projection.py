"""One-dimensional projections and the projected (CDF L1) EMD bound."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ProjectionVector:
    components: np.ndarray
    center: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float).ravel()
        norm = np.linalg.norm(c)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-12:
            raise ValueError(f"projection vector must have unit norm, got {norm!r}")
        c.flags.writeable = False
        object.__setattr__(self, "components", c)
        object.__setattr__(self, "center", float(self.center))

    @property
    def d(self):
        return len(self.components)

    def with_center(self, center):
        return ProjectionVector(self.components, center)

    def key(self):
        return (tuple(self.components.tolist()), self.center)


@dataclass(frozen=True, eq=False)
class ProjectedDistribution:
    """Sorted, merged (location, weight) pairs of a projected distribution.

    ``tmin``/``tmax`` are the dataset-wide projected range; ``source`` ties
    the object to the projection vector that produced it.
    """

    locations: np.ndarray
    weights: np.ndarray
    tmin: float = -math.inf
    tmax: float = math.inf
    source: tuple = ()

    @property
    def n(self):
        return len(self.locations)

    def cdf(self, t):
        """Right-continuous step CDF evaluated at ``t`` (scalar or array)."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.locations, t, side="right")
        padded = np.concatenate(([0.0], cum))
        return padded[idx]

    def shifted(self, delta):
        return ProjectedDistribution(self.locations + delta, self.weights,
                                     self.tmin + delta, self.tmax + delta, self.source)


def _sorted_merged(t, w):
    order = np.argsort(t, kind="stable")
    t = t[order]
    w = w[order]
    if len(t) > 1:
        keep = np.concatenate(([True], np.diff(t) > 0))
        if not keep.all():
            groups = np.cumsum(keep) - 1
            w = np.bincount(groups, weights=w)
            t = t[keep]
    return np.ascontiguousarray(t), np.ascontiguousarray(w)


def project(p, s, tmin=-math.inf, tmax=math.inf):
    """Project ``p`` onto ``s``: t_i = s . b_i - center, sorted and merged."""
    if p.d != s.d:
        raise ValueError(f"dimension mismatch: distribution d={p.d}, projection d={s.d}")
    t = p.bins @ s.components - s.center
    loc, w = _sorted_merged(t, np.array(p.weights))
    return ProjectedDistribution(loc, w, tmin, tmax, s.key())


def projection_emd(pp, qp):
    """Exact 1-D EMD as the L1 distance between the two step CDFs."""
    if pp.source != qp.source or pp.tmin != qp.tmin or pp.tmax != qp.tmax:
        raise ValueError("projected distributions come from different projections")
    return kernels.cdf_l1(pp.locations, pp.weights, qp.locations, qp.weights)


def combine_projection_bounds(bounds):
    """Combine per-axis bounds over d' orthogonal axes: sum / sqrt(d')."""
    b = list(bounds)
    if not b:
        raise ValueError("need at least one projection bound")
    return math.fsum(b) / math.sqrt(len(b))


def dataset_center(dataset, s):
    """Unweighted mean of every projected bin location over the dataset."""
    total = 0.0
    count = 0
    for p in dataset:
        total += float(np.sum(p.bins @ s.components))
        count += p.n
    return total / count


def dataset_range(dataset, s):
    lo = math.inf
    hi = -math.inf
    for p in dataset:
        t = p.bins @ s.components - s.center
        lo = min(lo, float(t.min()))
        hi = max(hi, float(t.max()))
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        # every bin projects to one location; pad so the range is non-empty
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def select_projections(dataset, count):
    """Top-``count`` principal axes of the mass-weighted bin cloud.

    Each returned vector carries its dataset centering constant. Signs are
    fixed so the largest-magnitude component is positive.
    """
    if not dataset:
        raise ValueError("empty dataset")
    d = dataset[0].d
    if count < 1 or count > d:
        raise ValueError(f"projection count must be in [1, {d}], got {count}")
    pts = np.concatenate([p.bins for p in dataset])
    w = np.concatenate([p.weights for p in dataset])
    mean = w @ pts / w.sum()
    x = pts - mean
    cov = (x * w[:, None]).T @ x / w.sum()
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= 1e-15 * max(1.0, float(np.abs(pts).max())) ** 2:
        log.warning("bin cloud has zero variance; using canonical axes")
        evecs = np.eye(d)
    out = []
    for j in range(count):
        v = evecs[:, j]
        v = v / np.linalg.norm(v)
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        axis = ProjectionVector(v)
        out.append(axis.with_center(dataset_center(dataset, axis)))
    return out


def explained_variance(dataset, s):
    """Mass-weighted variance of bin locations along ``s``."""
    pts = np.concatenate([p.bins for p in dataset])
    w = np.concatenate([p.weights for p in dataset])
    t = pts @ s.components
    m = w @ t / w.sum()
    return float(w @ (t - m) ** 2 / w.sum())
