"""Normal approximation of projected distributions and the normal lower bound.

Each projected distribution is summarised by a fitted normal (mean, std) and
per-sub-interval extrema of the signed approximation-error difference

    D(x) = int_{tmin}^{x} Err(t) dt - int_{x}^{tmax} Err(t) dt,
    Err(t) = C(t) - Phi(t),

so that the bound against any other summary costs O(1) at query time.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

SIGMA_FLOOR_FRACTION = 1e-6


@dataclass(frozen=True, eq=False)
class SubIntervalGrid:
    """``s`` equal sub-intervals of the projected range [tmin, tmax]."""

    tmin: float
    tmax: float
    s: int

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("need at least one sub-interval")
        if not self.tmin < self.tmax:
            raise ValueError("empty projection range")
        b = np.linspace(self.tmin, self.tmax, self.s + 1)
        b[0], b[-1] = self.tmin, self.tmax
        b.flags.writeable = False
        object.__setattr__(self, "boundaries", b)

    @property
    def sigma_floor(self):
        return SIGMA_FLOOR_FRACTION * (self.tmax - self.tmin)

    def locate(self, t):
        """Sub-interval index for ``t``, or None outside (tmin, tmax]."""
        if not (self.tmin < t <= self.tmax):
            return None
        return kernels.sub_interval(t, self.boundaries)

    def same_as(self, other):
        return self.tmin == other.tmin and self.tmax == other.tmax and self.s == other.s


@dataclass(frozen=True, eq=False)
class NormalSummary:
    """Fitted normal plus error tables for one object on one projection."""

    mu: float
    sigma: float
    err_min: np.ndarray
    err_max: np.ndarray
    err_full: float
    object_id: int = -1

    @property
    def s(self):
        return len(self.err_min)

    def to_array(self):
        """(mu, sigma, err_full, err_min[0..s], err_max[0..s]) as float64."""
        return np.concatenate(([self.mu, self.sigma, self.err_full], self.err_min, self.err_max))

    @classmethod
    def from_array(cls, row, object_id=-1):
        row = np.asarray(row, dtype=float)
        s = (len(row) - 3) // 2
        return cls(float(row[0]), float(row[1]), row[3:3 + s], row[3 + s:], float(row[2]), object_id)


def default_sub_intervals(n_bins):
    """round(ln n), at least one."""
    return max(1, int(round(math.log(max(n_bins, 1)))))


def fit_normal(pp, sigma_floor=0.0):
    """Weighted mean and standard deviation of projected locations."""
    t = pp.locations
    w = pp.weights
    mu = float(np.dot(w, t))
    var = float(np.dot(w, (t - mu) ** 2))
    return mu, max(math.sqrt(var), sigma_floor)


def normal_cdf_area(mu, sigma, a, b):
    """Integral of the N(mu, sigma) CDF over [a, b], closed form."""
    if a > b:
        raise ValueError(f"empty interval [{a}, {b}]")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return kernels.normal_area(mu, sigma, a, b)


def intersection_point(a, b, tol=1e-12):
    """Point where two normal CDFs cross, or None for (near-)equal variances."""
    mu_p, s_p = a
    mu_q, s_q = b
    if abs(s_q - s_p) <= tol:
        return None
    return (mu_p * s_q - mu_q * s_p) / (s_q - s_p)


def emd_normal(a, b, trange):
    """L1 distance between two normal CDFs over ``trange``, O(1)."""
    tmin, tmax = trange
    return kernels.emd_normal(a[0], a[1], b[0], b[1], tmin, tmax)


def precompute_errors(pp, normal, grid):
    """Per-sub-interval (err_min, err_max) and the whole-range err_full."""
    if pp.tmin != grid.tmin or pp.tmax != grid.tmax:
        raise ValueError("grid does not span the projection's range")
    mu, sigma = normal
    emin, emax, full = kernels.error_extrema(
        pp.locations, pp.weights, mu, sigma, grid.tmin, grid.tmax, grid.boundaries)
    return np.asarray(emin), np.asarray(emax), float(full)


def summarize(pp, grid, object_id=-1):
    mu, sigma = fit_normal(pp, grid.sigma_floor)
    emin, emax, full = precompute_errors(pp, (mu, sigma), grid)
    emin.flags.writeable = False
    emax.flags.writeable = False
    return NormalSummary(mu, sigma, emin, emax, full, object_id)


def emd_lb(sp, sq, grid):
    """Normal lower bound on the projected EMD between two summaries."""
    if sp.s != grid.s or sq.s != grid.s:
        raise ValueError("summary and grid have different sub-interval counts")
    return kernels.emd_lb(sp.mu, sp.sigma, sp.err_min, sp.err_max, sp.err_full,
                          sq.mu, sq.sigma, sq.err_min, sq.err_max, sq.err_full,
                          grid.tmin, grid.tmax, grid.boundaries)
