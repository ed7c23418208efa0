"""Pure numpy versions of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``DATAMARKET_PURE_PYTHON=1``.  Signatures and results match the Cython
module; see ``kernels.py``.
"""

import numpy as np


def cosine_topk(matrix, query, k):
    """Top-``k`` rows of ``matrix`` by dot product with ``query``.

    Rows and query are expected to be unit-normalized already, so the dot
    product is the cosine similarity.  Ties keep row order (lower index
    first).  Returns ``(indices, similarities)``.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    n = matrix.shape[0]
    if n == 0 or k <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    # einsum reduces every row the same way; BLAS gemv may not, which splits exact ties
    sims = np.einsum("ij,j->i", matrix, query)
    order = np.argsort(-sims, kind="stable")[: min(k, n)]
    return order.astype(np.int64), sims[order]


def approx_xmin_scan(x_sorted, min_tail):
    """Continuous-approximation power-law fit at every candidate ``x_min``.

    ``x_sorted`` holds positive integer-valued samples in ascending order.
    Candidates are the distinct values whose tail has at least ``min_tail``
    samples and at least two distinct values.  Returns four arrays:
    candidate x_min, alpha, KS distance and tail size.
    """
    x = np.asarray(x_sorted, dtype=np.float64)
    n = x.size
    uniq, first = np.unique(x, return_index=True)
    logs = np.log(x)
    tail_log_sum = np.concatenate([np.cumsum(logs[::-1])[::-1], [0.0]])
    # cumulative count of samples <= uniq[j]
    upto = np.concatenate([first[1:], [n]])

    xmins, alphas, dists, tails = [], [], [], []
    for j in range(uniq.size - 1):
        i = first[j]
        m = n - i
        if m < min_tail:
            break
        xm = uniq[j]
        s = tail_log_sum[i] - m * np.log(xm - 0.5)
        alpha = 1.0 + m / s
        u = uniq[j:]
        c = (upto[j:] - i) / m
        c_before = np.concatenate([[0.0], c[:-1]])
        fit_at = 1.0 - ((u + 0.5) / (xm - 0.5)) ** (1.0 - alpha)
        fit_before = 1.0 - ((u - 0.5) / (xm - 0.5)) ** (1.0 - alpha)
        d = max(np.abs(c - fit_at).max(), np.abs(c_before - fit_before).max())
        xmins.append(xm)
        alphas.append(alpha)
        dists.append(d)
        tails.append(m)
    return (
        np.asarray(xmins, dtype=np.float64),
        np.asarray(alphas, dtype=np.float64),
        np.asarray(dists, dtype=np.float64),
        np.asarray(tails, dtype=np.int64),
    )


def acf_lag1(series):
    x = np.asarray(series, dtype=np.float64)
    d = x - x.mean()
    den = np.dot(d, d)
    if den == 0.0:
        return np.nan
    return float(np.dot(d[:-1], d[1:]) / den)
