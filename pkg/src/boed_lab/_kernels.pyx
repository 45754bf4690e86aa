# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: RBF Gram sums, squared MMD, nested Monte Carlo EIG terms.

Every function here has a numpy twin in ``_kernels_py`` with the same signature.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


cdef double _gram_sum(const double[:, ::1] a, const double[:, ::1] b, double inv2bw2) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], d = a.shape[1]
    cdef double total = 0.0, sq, diff
    for i in range(na):
        for j in range(nb):
            sq = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                sq = sq + diff * diff
            total = total + exp(-sq * inv2bw2)
    return total


def gram_sum(a, b, double bandwidth):
    """Sum of k(a_i, b_j) over all pairs."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double out
    with nogil:
        out = _gram_sum(av, bv, 0.5 / (bandwidth * bandwidth))
    return out


def mmd2(p, q, double bandwidth):
    """Biased (V-statistic) squared MMD between point sets of shape (m, d) and (n, d)."""
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double m = pv.shape[0], n = qv.shape[0]
    cdef double inv = 0.5 / (bandwidth * bandwidth)
    cdef double spp, sqq, spq
    with nogil:
        spp = _gram_sum(pv, pv, inv)
        sqq = _gram_sum(qv, qv, inv)
        spq = _gram_sum(pv, qv, inv)
    return spp / (m * m) + sqq / (n * n) - 2.0 * spq / (m * n)


def mmd2_augmented(history, candidates, test, double bandwidth):
    """Squared MMD of ``history + [c]`` against ``test`` for every candidate ``c``.

    ``history`` may have zero rows.
    """
    cdef const double[:, ::1] hv = np.ascontiguousarray(history, dtype=np.float64).reshape(-1, np.shape(candidates)[1])
    cdef const double[:, ::1] cv = np.ascontiguousarray(candidates, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(test, dtype=np.float64)
    cdef Py_ssize_t nh = hv.shape[0], nc = cv.shape[0], nt = tv.shape[0], d = cv.shape[1]
    cdef Py_ssize_t c, i, k
    cdef double inv = 0.5 / (bandwidth * bandwidth)
    cdef double shh, stt, sht, kh, kt, sq, diff, mp
    out = np.empty(nc, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        shh = _gram_sum(hv, hv, inv)
        stt = _gram_sum(tv, tv, inv)
        sht = _gram_sum(hv, tv, inv)
        mp = nh + 1.0
        for c in range(nc):
            kh = 0.0
            for i in range(nh):
                sq = 0.0
                for k in range(d):
                    diff = cv[c, k] - hv[i, k]
                    sq = sq + diff * diff
                kh = kh + exp(-sq * inv)
            kt = 0.0
            for i in range(nt):
                sq = 0.0
                for k in range(d):
                    diff = cv[c, k] - tv[i, k]
                    sq = sq + diff * diff
                kt = kt + exp(-sq * inv)
            ov[c] = ((shh + 2.0 * kh + 1.0) / (mp * mp)
                     + stt / (<double>nt * nt)
                     - 2.0 * (sht + kt) / (mp * nt))
    return out


def nmc_terms(y, mu_out, var_out, mu_in, var_in):
    """Per-outer-sample nested Monte Carlo EIG terms.

    All inputs are 2-D with one row per candidate design: ``y``, ``mu_out``,
    ``var_out`` have shape (C, N); ``mu_in``, ``var_in`` have shape (C, M).
    The outer parameter draw is counted inside the marginal average, so the
    marginal has M + 1 terms and stays finite.
    """
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:, ::1] mo = np.ascontiguousarray(mu_out, dtype=np.float64)
    cdef const double[:, ::1] vo = np.ascontiguousarray(var_out, dtype=np.float64)
    cdef const double[:, ::1] mi = np.ascontiguousarray(mu_in, dtype=np.float64)
    cdef const double[:, ::1] vi = np.ascontiguousarray(var_in, dtype=np.float64)
    cdef Py_ssize_t nc = yv.shape[0], nn = yv.shape[1], nm = mi.shape[1]
    cdef Py_ssize_t c, n, m
    out = np.empty((nc, nn), dtype=np.float64)
    cdef double[:, ::1] ov = out
    logv_buf = np.empty(nm, dtype=np.float64)
    prec_buf = np.empty(nm, dtype=np.float64)
    ll_buf = np.empty(nm, dtype=np.float64)
    cdef double[::1] logv = logv_buf
    cdef double[::1] prec = prec_buf
    cdef double[::1] ll = ll_buf
    cdef double own, r, mx, acc, logm1 = log(nm + 1.0)
    with nogil:
        for c in range(nc):
            for m in range(nm):
                logv[m] = log(vi[c, m])
                prec[m] = 1.0 / vi[c, m]
            for n in range(nn):
                r = yv[c, n] - mo[c, n]
                own = -0.5 * (log(vo[c, n]) + r * r / vo[c, n])
                mx = own
                for m in range(nm):
                    r = yv[c, n] - mi[c, m]
                    ll[m] = -0.5 * (logv[m] + r * r * prec[m])
                    if ll[m] > mx:
                        mx = ll[m]
                acc = exp(own - mx)
                for m in range(nm):
                    acc = acc + exp(ll[m] - mx)
                ov[c, n] = own - (mx + log(acc) - logm1)
    return out
