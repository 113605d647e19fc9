"""Slow, independent reference implementations.

Nothing here calls into ``nlbi.kernels``: every routine is coded from
scratch so it can cross-check the fast paths.
"""

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import ndtr

from .distributions import exact_emd

ORACLE_SAMPLES = 100_000


def oracle_emd_1d(pp, qp):
    """1-D EMD by merging both supports and summing |CDF gap| x segment length."""
    pts = np.union1d(pp.locations, qp.locations)
    if len(pts) < 2:
        return 0.0
    cp = np.zeros(len(pts))
    cq = np.zeros(len(pts))
    for loc, w in zip(pp.locations, pp.weights):
        cp[np.searchsorted(pts, loc)] += w
    for loc, w in zip(qp.locations, qp.weights):
        cq[np.searchsorted(pts, loc)] += w
    gap = np.cumsum(cp) - np.cumsum(cq)
    return float(np.sum(np.abs(gap[:-1]) * np.diff(pts)))


def oracle_knn(dataset, query, k):
    """Linear scan: exact EMD to every object, sorted by (distance, id)."""
    if k < 1 or k > len(dataset):
        raise ValueError(f"k={k} outside [1, {len(dataset)}]")
    scored = sorted((exact_emd(p, query), p.id) for p in dataset)
    return [(oid, dist) for dist, oid in scored[:k]]


def _step_area(locs, cum, c0, tmin, x):
    """Integral of the step CDF over [tmin, x] for each x (x sorted ascending).

    ``c0`` is the mass at or below tmin; ``cum[i]`` the CDF just after locs[i].
    """
    inside = (locs > tmin)
    locs = locs[inside]
    levels = cum[inside]
    # area accumulated up to each breakpoint
    knots = np.concatenate(([tmin], locs))
    heights = np.concatenate(([c0], levels))
    area_at = np.concatenate(([0.0], np.cumsum(heights[:-1] * np.diff(knots))))
    seg = np.searchsorted(knots, x, side="right") - 1
    return area_at[seg] + heights[seg] * (x - knots[seg])


def oracle_error_extrema(pp, normal, grid, samples=ORACLE_SAMPLES):
    """Dense-sample extrema of D(x) = 2*int_{tmin}^{x} Err - int_{tmin}^{tmax} Err.

    Returns (err_min, err_max) per sub-interval. The normal CDF integral uses
    composite Simpson on the sample grid; the step CDF is integrated exactly.
    Breakpoints of the step CDF are added to the samples so the kinks of D are
    never stepped over.
    """
    mu, sigma = normal
    tmin, tmax = grid.tmin, grid.tmax
    locs = np.asarray(pp.locations, dtype=float)
    w = np.asarray(pp.weights, dtype=float)
    cum = np.cumsum(w)
    below = locs <= tmin
    c0 = float(cum[below][-1]) if below.any() else 0.0
    s = grid.s
    b = grid.boundaries
    xs = [np.linspace(b[i], b[i + 1], samples) for i in range(s)]
    x = np.unique(np.concatenate(xs + [locs[(locs > tmin) & (locs < tmax)]]))
    # Simpson needs a fine uniform grid; integrate on one and interpolate the rest
    fine = np.linspace(tmin, tmax, 2 * samples * s + 1)
    phi_int_fine = cumulative_simpson(ndtr((fine - mu) / sigma), x=fine, initial=0.0)
    phi_int = np.interp(x, fine, phi_int_fine)
    step_int = _step_area(locs, cum, c0, tmin, x)
    err_int = step_int - phi_int
    total = err_int[-1]
    d = 2.0 * err_int - total
    emin = np.empty(s)
    emax = np.empty(s)
    for i in range(s):
        sel = (x >= b[i]) & (x <= b[i + 1])
        emin[i] = d[sel].min()
        emax[i] = d[sel].max()
    return emin, emax
