"""Pure numpy implementation of the mixture log-density kernel."""

from __future__ import annotations

import numpy as np
from scipy.special import erf, log_ndtr, logsumexp

KIND_CONT, KIND_INT, KIND_CAT = 0, 1, 2
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_SQRT1_2 = np.sqrt(0.5)


def log_ndtr_diff(a, b):
    """log(Phi(b) - Phi(a)) for a < b, accurate in both tails."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.empty(a.shape)
    neg = b <= 0.0
    pos = (a >= 0.0) & ~neg
    mid = ~(neg | pos)
    if neg.any():
        la, lb = log_ndtr(a[neg]), log_ndtr(b[neg])
        out[neg] = lb + np.log1p(-np.exp(la - lb))
    if pos.any():
        la, lb = log_ndtr(-b[pos]), log_ndtr(-a[pos])
        out[pos] = lb + np.log1p(-np.exp(la - lb))
    if mid.any():
        out[mid] = np.log(0.5 * (erf(b[mid] * _SQRT1_2) - erf(a[mid] * _SQRT1_2)))
    return out


def int_contributions(U, P, bw, log_norm, kinds, levels):
    """Summed (m, n) log kernel terms of all integer columns, or None.

    Queries usually share a handful of cells, so each column is evaluated once
    per distinct cell and broadcast back.
    """
    out = None
    for k in np.flatnonzero(np.asarray(kinds) == KIND_INT):
        L = levels[k]
        cells, inverse = np.unique(np.minimum(np.floor(U[:, k] * L), L - 1), return_inverse=True)
        p = P[:, k][None, :]
        h = bw[k]
        table = log_ndtr_diff((cells[:, None] / L - p) / h, ((cells[:, None] + 1.0) / L - p) / h)
        table -= log_norm[None, :, k]
        term = table[inverse.reshape(-1)]
        out = term if out is None else out + term
    return out


def mixture_logpdf(U, P, bw, log_norm, kinds, levels):
    """Log density of an equally weighted mixture of product kernels.

    U: (m, d) query rows, P: (n, d) kernel centres, both unit encoded.
    bw: (d,) Gaussian bandwidth for numeric columns, smoothing weight for
    categorical ones. log_norm: (n, d) log truncation mass of each numeric kernel
    on [0, 1].
    """
    U = np.asarray(U, dtype=float)
    P = np.asarray(P, dtype=float)
    m, d = U.shape
    n = P.shape[0]
    acc = int_contributions(U, P, bw, log_norm, kinds, levels)
    if acc is None:
        acc = np.zeros((m, n))
    for k in range(d):
        u = U[:, k][:, None]
        p = P[:, k][None, :]
        h = bw[k]
        kind = kinds[k]
        if kind == KIND_CONT:
            z = (u - p) / h
            acc += -0.5 * z * z - np.log(h) - _HALF_LOG_2PI - log_norm[None, :, k]
        elif kind == KIND_CAT:
            K = levels[k]
            if K > 1:
                same = u == p
                acc += np.where(same, np.log1p(-h), np.log(h / (K - 1)))
    return logsumexp(acc, axis=1) - np.log(n)
