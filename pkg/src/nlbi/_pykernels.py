"""Pure-Python implementations of the numeric hot paths.

Mirrors ``_kernels.pyx`` function for function. Used when the compiled
extension is missing, and by the backend benchmark.
"""

import math

import numpy as np
from scipy.special import ndtr, ndtri

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _phi_cdf(z):
    return 0.5 * math.erfc(-z * _SQRT1_2)


def _cdf_antiderivative(mu, sigma, t):
    # d/dt [(t - mu) Phi(z) + sigma phi(z)] = Phi(z),  z = (t - mu) / sigma
    z = (t - mu) / sigma
    return (t - mu) * _phi_cdf(z) + sigma * _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def normal_area(mu, sigma, a, b):
    return _cdf_antiderivative(mu, sigma, b) - _cdf_antiderivative(mu, sigma, a)


def line_ends(mu, sigma, tmin, tmax):
    return (tmin - mu) / sigma, (tmax - mu) / sigma


def _crossing(mu_p, s_p, mu_q, s_q, tmin, tmax):
    """Return (du, dv, t_is) with t_is clamped into the range, or None."""
    up, vp = line_ends(mu_p, s_p, tmin, tmax)
    uq, vq = line_ends(mu_q, s_q, tmin, tmax)
    du = up - uq
    dv = vp - vq
    if (du < 0.0 < dv) or (dv < 0.0 < du):
        t_is = (mu_p * s_q - mu_q * s_p) / (s_q - s_p)
        return du, dv, min(max(t_is, tmin), tmax)
    return du, dv, None


def emd_normal(mu_p, s_p, mu_q, s_q, tmin, tmax):
    _, _, t_is = _crossing(mu_p, s_p, mu_q, s_q, tmin, tmax)
    g_lo = _cdf_antiderivative(mu_p, s_p, tmin) - _cdf_antiderivative(mu_q, s_q, tmin)
    g_hi = _cdf_antiderivative(mu_p, s_p, tmax) - _cdf_antiderivative(mu_q, s_q, tmax)
    if t_is is None:
        return abs(g_hi - g_lo)
    g_is = _cdf_antiderivative(mu_p, s_p, t_is) - _cdf_antiderivative(mu_q, s_q, t_is)
    return abs(g_is - g_lo) + abs(g_hi - g_is)


def sub_interval(t, bounds):
    """Index of the sub-interval (b[i], b[i+1]] holding t; left end joins interval 0."""
    s = len(bounds) - 1
    i = int(np.searchsorted(bounds, t, side="left")) - 1
    return min(max(i, 0), s - 1)


def emd_lb(mu_p, s_p, emin_p, emax_p, ef_p, mu_q, s_q, emin_q, emax_q, ef_q, tmin, tmax, bounds):
    du, dv, t_is = _crossing(mu_p, s_p, mu_q, s_q, tmin, tmax)
    en = emd_normal(mu_p, s_p, mu_q, s_q, tmin, tmax)
    if t_is is not None:
        i = sub_interval(t_is, bounds)
        if du < 0.0:
            val = en - emax_p[i] + emin_q[i]
        else:
            val = en + emin_p[i] - emax_q[i]
    elif du == 0.0 and dv == 0.0:
        val = en + abs(ef_p - ef_q)
    elif du <= 0.0 and dv <= 0.0:
        val = en - ef_p + ef_q
    else:
        val = en + ef_p - ef_q
    return val if val > 0.0 else 0.0


def _antideriv_vec(mu, sigma, t):
    z = (t - mu) / sigma
    return (t - mu) * ndtr(z) + sigma * _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def emd_lb_many(mu, sigma, emin, emax, ef, mu_q, s_q, emin_q, emax_q, ef_q, tmin, tmax, bounds):
    """Vectorised emd_lb of many database summaries against one query."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    up = (tmin - mu) / sigma
    vp = (tmax - mu) / sigma
    uq = (tmin - mu_q) / s_q
    vq = (tmax - mu_q) / s_q
    du = up - uq
    dv = vp - vq
    lower_left = (du < 0.0) & (dv > 0.0)
    upper_left = (du > 0.0) & (dv < 0.0)
    crossing = lower_left | upper_left

    g_lo = _antideriv_vec(mu, sigma, tmin) - _cdf_antiderivative(mu_q, s_q, tmin)
    g_hi = _antideriv_vec(mu, sigma, tmax) - _cdf_antiderivative(mu_q, s_q, tmax)
    en = np.abs(g_hi - g_lo)
    out = np.empty_like(mu)

    dom_lo = ~crossing & (du <= 0.0) & (dv <= 0.0)
    dom_hi = ~crossing & (du >= 0.0) & (dv >= 0.0)
    same = dom_lo & dom_hi
    out[dom_lo] = en[dom_lo] - ef[dom_lo] + ef_q
    out[dom_hi] = en[dom_hi] + ef[dom_hi] - ef_q
    out[same] = en[same] + np.abs(ef[same] - ef_q)

    if crossing.any():
        idx = np.flatnonzero(crossing)
        mc, sc = mu[idx], sigma[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            t_is = (mc * s_q - mu_q * sc) / (s_q - sc)
        t_is = np.clip(t_is, tmin, tmax)
        g_is = _antideriv_vec(mc, sc, t_is) - _antideriv_vec(mu_q, s_q, t_is)
        en_c = np.abs(g_is - g_lo[idx]) + np.abs(g_hi[idx] - g_is)
        s = len(bounds) - 1
        k = np.clip(np.searchsorted(bounds, t_is, side="left") - 1, 0, s - 1)
        ll = lower_left[idx]
        out[idx] = np.where(
            ll,
            en_c - emax[idx, k] + np.asarray(emin_q)[k],
            en_c + emin[idx, k] - np.asarray(emax_q)[k],
        )
    np.maximum(out, 0.0, out=out)
    return out


def _emd_normal_uv(ua, va, ub, vb, tmin, tmax):
    w = tmax - tmin
    ma = (va - ua) / w
    mb = (vb - ub) / w
    mu_a = tmin - ua / ma
    mu_b = tmin - ub / mb
    return emd_normal(mu_a, 1.0 / ma, mu_b, 1.0 / mb, tmin, tmax)


def _triangle(ua, va, ub, vb, uq, vq, tmin, tmax):
    # lower bound on d(W, Q) for W dominance-ordered between A and B
    return 0.5 * (
        _emd_normal_uv(ua, va, uq, vq, tmin, tmax)
        + _emd_normal_uv(ub, vb, uq, vq, tmin, tmax)
        - _emd_normal_uv(ua, va, ub, vb, tmin, tmax)
    )


def emd_br(ul, uh, vl, vh, m_emin, m_emax, m_efmin, m_efmax,
           uq, vq, q_emin, q_emax, q_ef, tmin, tmax, min_slope):
    """Lower bound from a query to every member of a bounding region.

    ``m_emin``/``m_emax`` are the region's error envelopes reduced over all
    sub-intervals, ``q_emin``/``q_emax`` likewise for the query.
    """
    lower_left = -m_emax + q_emin   # members below the query at tmin
    upper_left = m_emin - q_emax    # members above the query at tmin
    if uq > uh and vq > vh:
        val = _emd_normal_uv(uh, vh, uq, vq, tmin, tmax) - m_efmax + q_ef
    elif uq < ul and vq < vl:
        val = _emd_normal_uv(ul, vl, uq, vq, tmin, tmax) + m_efmin - q_ef
    elif uq > uh and vl <= vq <= vh:
        val = _triangle(uh, vq, uh, vh, uq, vq, tmin, tmax) + lower_left
    elif vq > vh and ul <= uq <= uh:
        err = min(upper_left, -m_efmax + q_ef)
        val = _triangle(uq, vh, uh, vh, uq, vq, tmin, tmax) + err
    elif uq < ul and vl <= vq <= vh:
        val = _triangle(ul, vq, ul, vl, uq, vq, tmin, tmax) + upper_left
    elif vq < vl and ul <= uq <= uh:
        err = min(lower_left, m_efmin - q_ef)
        val = _triangle(uq, vl, ul, vl, uq, vq, tmin, tmax) + err
    elif uq > uh and vq < vl:
        if (vl - uh) / (tmax - tmin) > min_slope:
            val = min(
                _triangle(uh, vl, uh, vh, uq, vq, tmin, tmax),
                _triangle(uh, vl, ul, vl, uq, vq, tmin, tmax),
            ) + lower_left
        else:
            val = min(lower_left, upper_left)
    elif uq < ul and vq > vh:
        val = min(
            _triangle(ul, vh, ul, vl, uq, vq, tmin, tmax),
            _triangle(ul, vh, uh, vh, uq, vq, tmin, tmax),
        ) + upper_left
    else:
        val = min(lower_left, upper_left)
    return val if val > 0.0 else 0.0


def cdf_l1(t1, w1, t2, w2):
    """Integral of |C1 - C2| for two sorted step CDFs."""
    i = j = 0
    n1, n2 = len(t1), len(t2)
    c = 0.0
    total = 0.0
    prev = None
    while i < n1 or j < n2:
        if j >= n2 or (i < n1 and t1[i] <= t2[j]):
            t = t1[i]
            step = w1[i]
            i += 1
        else:
            t = t2[j]
            step = -w2[j]
            j += 1
        if prev is not None:
            total += abs(c) * (t - prev)
        c += step
        prev = t
    return total


def error_extrema(t, w, mu, sigma, tmin, tmax, bounds):
    """Exact per-sub-interval min/max of the signed error difference.

    D(x) = int_{tmin}^{x} Err - int_{x}^{tmax} Err with Err = C - Phi.
    Returns (err_min, err_max, err_full).
    """
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    c0 = float(w[t <= tmin].sum())
    inside = (t > tmin) & (t < tmax)
    knots = np.concatenate(([tmin], t[inside], [tmax]))
    levels = c0 + np.concatenate(([0.0], np.cumsum(w[inside])))
    step_area = np.concatenate(([0.0], np.cumsum(levels * np.diff(knots))))

    seg_lo = knots[:-1]
    seg_hi = knots[1:]
    open_levels = (levels > 0.0) & (levels < 1.0)
    cross = np.full(levels.shape, np.nan)
    cross[open_levels] = mu + sigma * ndtri(levels[open_levels])
    cross_ok = (cross > seg_lo) & (cross < seg_hi)

    cand = np.unique(np.concatenate((bounds, t[inside], cross[cross_ok])))
    k = np.clip(np.searchsorted(knots, cand, side="right") - 1, 0, len(levels) - 1)
    step_int = step_area[k] + levels[k] * (cand - knots[k])
    f0 = _cdf_antiderivative(mu, sigma, tmin)
    integral = step_int - (_antideriv_vec(mu, sigma, cand) - f0)
    full = float(step_area[-1] - (_cdf_antiderivative(mu, sigma, tmax) - f0))
    d = 2.0 * integral - full

    s = len(bounds) - 1
    lo = np.searchsorted(cand, bounds[:-1], side="left")
    hi = np.searchsorted(cand, bounds[1:], side="right")
    err_min = np.array([d[lo[i]:hi[i]].min() for i in range(s)])
    err_max = np.array([d[lo[i]:hi[i]].max() for i in range(s)])
    return err_min, err_max, full
