# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric hot paths. Same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, exp, fabs, sqrt, NAN, isnan
from scipy.special.cython_special cimport ndtri

cnp.import_array()

cdef double SQRT1_2 = 0.7071067811865476
cdef double INV_SQRT_2PI = 0.3989422804014327


cdef inline double _phi_cdf(double z) nogil:
    return 0.5 * erfc(-z * SQRT1_2)


cdef inline double _antideriv(double mu, double sigma, double t) nogil:
    cdef double z = (t - mu) / sigma
    return (t - mu) * _phi_cdf(z) + sigma * INV_SQRT_2PI * exp(-0.5 * z * z)


def normal_area(double mu, double sigma, double a, double b):
    return _antideriv(mu, sigma, b) - _antideriv(mu, sigma, a)


def line_ends(double mu, double sigma, double tmin, double tmax):
    return (tmin - mu) / sigma, (tmax - mu) / sigma


cdef inline int _classify(double mu_p, double s_p, double mu_q, double s_q,
                          double tmin, double tmax, double *t_is,
                          double *du, double *dv) nogil:
    # 1: crossing, p below q at tmin; 2: crossing, p above; 0: no crossing
    cdef double up = (tmin - mu_p) / s_p
    cdef double vp = (tmax - mu_p) / s_p
    cdef double uq = (tmin - mu_q) / s_q
    cdef double vq = (tmax - mu_q) / s_q
    cdef double t
    du[0] = up - uq
    dv[0] = vp - vq
    if (du[0] < 0.0 and dv[0] > 0.0) or (dv[0] < 0.0 and du[0] > 0.0):
        t = (mu_p * s_q - mu_q * s_p) / (s_q - s_p)
        if t < tmin:
            t = tmin
        elif t > tmax:
            t = tmax
        t_is[0] = t
        return 1 if du[0] < 0.0 else 2
    return 0


cdef double _emd_normal(double mu_p, double s_p, double mu_q, double s_q,
                        double tmin, double tmax) nogil:
    cdef double t_is = 0.0, du, dv, g_lo, g_hi, g_is
    cdef int kind = _classify(mu_p, s_p, mu_q, s_q, tmin, tmax, &t_is, &du, &dv)
    g_lo = _antideriv(mu_p, s_p, tmin) - _antideriv(mu_q, s_q, tmin)
    g_hi = _antideriv(mu_p, s_p, tmax) - _antideriv(mu_q, s_q, tmax)
    if kind == 0:
        return fabs(g_hi - g_lo)
    g_is = _antideriv(mu_p, s_p, t_is) - _antideriv(mu_q, s_q, t_is)
    return fabs(g_is - g_lo) + fabs(g_hi - g_is)


def emd_normal(double mu_p, double s_p, double mu_q, double s_q, double tmin, double tmax):
    return _emd_normal(mu_p, s_p, mu_q, s_q, tmin, tmax)


cdef inline Py_ssize_t _sub_interval(double t, const double[:] bounds) nogil:
    # first boundary >= t, minus one; clamped to [0, s-1]
    cdef Py_ssize_t s = bounds.shape[0] - 1
    cdef Py_ssize_t lo = 0, hi = s + 1, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if bounds[mid] < t:
            lo = mid + 1
        else:
            hi = mid
    lo -= 1
    if lo < 0:
        return 0
    if lo > s - 1:
        return s - 1
    return lo


def sub_interval(double t, const double[:] bounds):
    return _sub_interval(t, bounds)


cdef double _emd_lb(double mu_p, double s_p, const double[:] emin_p, const double[:] emax_p,
                    double ef_p, double mu_q, double s_q, const double[:] emin_q,
                    const double[:] emax_q, double ef_q, double tmin, double tmax,
                    const double[:] bounds) nogil:
    cdef double t_is = 0.0, du, dv, val
    cdef int kind = _classify(mu_p, s_p, mu_q, s_q, tmin, tmax, &t_is, &du, &dv)
    cdef double en = _emd_normal(mu_p, s_p, mu_q, s_q, tmin, tmax)
    cdef Py_ssize_t i
    if kind == 1:
        i = _sub_interval(t_is, bounds)
        val = en - emax_p[i] + emin_q[i]
    elif kind == 2:
        i = _sub_interval(t_is, bounds)
        val = en + emin_p[i] - emax_q[i]
    elif du == 0.0 and dv == 0.0:
        val = en + fabs(ef_p - ef_q)
    elif du <= 0.0 and dv <= 0.0:
        val = en - ef_p + ef_q
    else:
        val = en + ef_p - ef_q
    return val if val > 0.0 else 0.0


def emd_lb(double mu_p, double s_p, const double[:] emin_p, const double[:] emax_p, double ef_p,
           double mu_q, double s_q, const double[:] emin_q, const double[:] emax_q, double ef_q,
           double tmin, double tmax, const double[:] bounds):
    return _emd_lb(mu_p, s_p, emin_p, emax_p, ef_p, mu_q, s_q, emin_q, emax_q, ef_q,
                   tmin, tmax, bounds)


def emd_lb_many(const double[:] mu, const double[:] sigma, const double[:, :] emin,
                const double[:, :] emax, const double[:] ef, double mu_q, double s_q,
                const double[:] emin_q, const double[:] emax_q, double ef_q,
                double tmin, double tmax, const double[:] bounds):
    cdef Py_ssize_t n = mu.shape[0], j
    out = np.empty(n, dtype=np.float64)
    cdef double[:] o = out
    with nogil:
        for j in range(n):
            o[j] = _emd_lb(mu[j], sigma[j], emin[j], emax[j], ef[j], mu_q, s_q,
                           emin_q, emax_q, ef_q, tmin, tmax, bounds)
    return out


cdef inline double _emd_normal_uv(double ua, double va, double ub, double vb,
                                  double tmin, double tmax) nogil:
    cdef double w = tmax - tmin
    cdef double ma = (va - ua) / w
    cdef double mb = (vb - ub) / w
    return _emd_normal(tmin - ua / ma, 1.0 / ma, tmin - ub / mb, 1.0 / mb, tmin, tmax)


cdef inline double _triangle(double ua, double va, double ub, double vb, double uq, double vq,
                             double tmin, double tmax) nogil:
    return 0.5 * (_emd_normal_uv(ua, va, uq, vq, tmin, tmax)
                  + _emd_normal_uv(ub, vb, uq, vq, tmin, tmax)
                  - _emd_normal_uv(ua, va, ub, vb, tmin, tmax))


cdef double _emd_br(double ul, double uh, double vl, double vh, double m_emin, double m_emax,
                    double m_efmin, double m_efmax, double uq, double vq, double q_emin,
                    double q_emax, double q_ef, double tmin, double tmax,
                    double min_slope) nogil:
    cdef double lower_left = -m_emax + q_emin
    cdef double upper_left = m_emin - q_emax
    cdef double val, a, b
    if uq > uh and vq > vh:
        val = _emd_normal_uv(uh, vh, uq, vq, tmin, tmax) - m_efmax + q_ef
    elif uq < ul and vq < vl:
        val = _emd_normal_uv(ul, vl, uq, vq, tmin, tmax) + m_efmin - q_ef
    elif uq > uh and vl <= vq <= vh:
        val = _triangle(uh, vq, uh, vh, uq, vq, tmin, tmax) + lower_left
    elif vq > vh and ul <= uq <= uh:
        val = _triangle(uq, vh, uh, vh, uq, vq, tmin, tmax) + min(upper_left, -m_efmax + q_ef)
    elif uq < ul and vl <= vq <= vh:
        val = _triangle(ul, vq, ul, vl, uq, vq, tmin, tmax) + upper_left
    elif vq < vl and ul <= uq <= uh:
        val = _triangle(uq, vl, ul, vl, uq, vq, tmin, tmax) + min(lower_left, m_efmin - q_ef)
    elif uq > uh and vq < vl:
        if (vl - uh) / (tmax - tmin) > min_slope:
            a = _triangle(uh, vl, uh, vh, uq, vq, tmin, tmax)
            b = _triangle(uh, vl, ul, vl, uq, vq, tmin, tmax)
            val = min(a, b) + lower_left
        else:
            val = min(lower_left, upper_left)
    elif uq < ul and vq > vh:
        a = _triangle(ul, vh, ul, vl, uq, vq, tmin, tmax)
        b = _triangle(ul, vh, uh, vh, uq, vq, tmin, tmax)
        val = min(a, b) + upper_left
    else:
        val = min(lower_left, upper_left)
    return val if val > 0.0 else 0.0


def emd_br(double ul, double uh, double vl, double vh, double m_emin, double m_emax,
           double m_efmin, double m_efmax, double uq, double vq, double q_emin,
           double q_emax, double q_ef, double tmin, double tmax, double min_slope):
    return _emd_br(ul, uh, vl, vh, m_emin, m_emax, m_efmin, m_efmax, uq, vq,
                   q_emin, q_emax, q_ef, tmin, tmax, min_slope)


def cdf_l1(const double[:] t1, const double[:] w1, const double[:] t2, const double[:] w2):
    cdef Py_ssize_t i = 0, j = 0, n1 = t1.shape[0], n2 = t2.shape[0]
    cdef double c = 0.0, total = 0.0, prev = 0.0, t, step
    cdef bint started = False
    with nogil:
        while i < n1 or j < n2:
            if j >= n2 or (i < n1 and t1[i] <= t2[j]):
                t = t1[i]
                step = w1[i]
                i += 1
            else:
                t = t2[j]
                step = -w2[j]
                j += 1
            if started:
                total += fabs(c) * (t - prev)
            started = True
            c += step
            prev = t
    return total


def error_extrema(const double[:] t, const double[:] w, double mu, double sigma,
                  double tmin, double tmax, const double[:] bounds):
    cdef Py_ssize_t n = t.shape[0], s = bounds.shape[0] - 1
    cdef Py_ssize_t i, k, m = 0, kk
    cdef double c0 = 0.0

    for i in range(n):
        if t[i] <= tmin:
            c0 += w[i]
        elif t[i] < tmax:
            m += 1

    knots_a = np.empty(m + 2, dtype=np.float64)
    levels_a = np.empty(m + 1, dtype=np.float64)
    area_a = np.empty(m + 2, dtype=np.float64)
    cross_a = np.empty(m + 1, dtype=np.float64)
    emin_a = np.empty(s, dtype=np.float64)
    emax_a = np.empty(s, dtype=np.float64)
    cdef double[:] knots = knots_a, levels = levels_a, area = area_a, cross = cross_a
    cdef double[:] emin = emin_a, emax = emax_a
    cdef double f0, full, x, d, lo, hi, c

    knots[0] = tmin
    levels[0] = c0
    k = 1
    for i in range(n):
        if tmin < t[i] < tmax:
            knots[k] = t[i]
            levels[k] = levels[k - 1] + w[i]
            k += 1
    knots[m + 1] = tmax
    area[0] = 0.0
    for k in range(m + 1):
        area[k + 1] = area[k] + levels[k] * (knots[k + 1] - knots[k])
        c = levels[k]
        cross[k] = NAN
        if 0.0 < c < 1.0:
            x = mu + sigma * ndtri(c)
            if knots[k] < x < knots[k + 1]:
                cross[k] = x

    f0 = _antideriv(mu, sigma, tmin)
    full = area[m + 1] - (_antideriv(mu, sigma, tmax) - f0)

    k = 0
    for i in range(s):
        lo = bounds[i]
        hi = bounds[i + 1]
        # segment containing lo (right-continuous lookup)
        while k < m and knots[k + 1] <= lo:
            k += 1
        d = 2.0 * (area[k] + levels[k] * (lo - knots[k]) - (_antideriv(mu, sigma, lo) - f0)) - full
        emin[i] = d
        emax[i] = d
        kk = k
        while True:
            x = cross[kk]
            if not isnan(x) and lo < x < hi:
                d = 2.0 * (area[kk] + levels[kk] * (x - knots[kk])
                           - (_antideriv(mu, sigma, x) - f0)) - full
                if d < emin[i]:
                    emin[i] = d
                if d > emax[i]:
                    emax[i] = d
            if kk >= m or knots[kk + 1] >= hi:
                break
            kk += 1
            x = knots[kk]
            if x > lo:
                d = 2.0 * (area[kk] - (_antideriv(mu, sigma, x) - f0)) - full
                if d < emin[i]:
                    emin[i] = d
                if d > emax[i]:
                    emax[i] = d
        # segment containing hi
        while kk < m and knots[kk + 1] <= hi:
            kk += 1
        d = 2.0 * (area[kk] + levels[kk] * (hi - knots[kk]) - (_antideriv(mu, sigma, hi) - f0)) - full
        if d < emin[i]:
            emin[i] = d
        if d > emax[i]:
            emax[i] = d
    return emin_a, emax_a, full
