"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

# Bounds the (C, N, M) temporary in nmc_terms to roughly 8M doubles.
_NMC_CHUNK_ELEMS = 8_000_000


def _as2d(a, d=None):
    a = np.asarray(a, dtype=np.float64)
    if d is not None:
        return a.reshape(-1, d)
    return a


def gram_sum(a, b, bandwidth):
    a, b = _as2d(a), _as2d(b)
    if len(a) == 0 or len(b) == 0:
        return 0.0
    return float(np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * bandwidth**2)).sum())


def mmd2(p, q, bandwidth):
    p, q = _as2d(p), _as2d(q)
    m, n = len(p), len(q)
    return (gram_sum(p, p, bandwidth) / m**2 + gram_sum(q, q, bandwidth) / n**2
            - 2.0 * gram_sum(p, q, bandwidth) / (m * n))


def mmd2_augmented(history, candidates, test, bandwidth):
    candidates = _as2d(candidates)
    d = candidates.shape[1]
    history, test = _as2d(history, d), _as2d(test, d)
    inv = 1.0 / (2.0 * bandwidth**2)
    shh = gram_sum(history, history, bandwidth)
    stt = gram_sum(test, test, bandwidth)
    sht = gram_sum(history, test, bandwidth)
    if len(history):
        kh = np.exp(-cdist(candidates, history, "sqeuclidean") * inv).sum(axis=1)
    else:
        kh = np.zeros(len(candidates))
    kt = np.exp(-cdist(candidates, test, "sqeuclidean") * inv).sum(axis=1)
    mp, nt = len(history) + 1.0, float(len(test))
    return (shh + 2.0 * kh + 1.0) / mp**2 + stt / nt**2 - 2.0 * (sht + kt) / (mp * nt)


def nmc_terms(y, mu_out, var_out, mu_in, var_in):
    y, mu_out, var_out = (np.asarray(a, dtype=np.float64) for a in (y, mu_out, var_out))
    mu_in, var_in = np.asarray(mu_in, dtype=np.float64), np.asarray(var_in, dtype=np.float64)
    nc, nn = y.shape
    nm = mu_in.shape[1]
    own = -0.5 * (np.log(var_out) + (y - mu_out) ** 2 / var_out)
    out = np.empty((nc, nn))
    step = max(1, _NMC_CHUNK_ELEMS // max(1, nn * nm))
    for lo in range(0, nc, step):
        hi = min(nc, lo + step)
        r = y[lo:hi, :, None] - mu_in[lo:hi, None, :]
        ll = -0.5 * (np.log(var_in[lo:hi, None, :]) + r * r / var_in[lo:hi, None, :])
        ll = np.concatenate([own[lo:hi, :, None], ll], axis=2)
        out[lo:hi] = own[lo:hi] - (logsumexp(ll, axis=2) - np.log(nm + 1.0))
    return out
