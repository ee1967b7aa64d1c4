"""Independent oracles shared by the tests.

Nothing here imports the scalarization code: values are recomputed from
their definitions (in extended precision where it matters) so that the
library can be checked against them.
"""

from __future__ import annotations

import functools
import itertools
import math

import mpmath
import numpy as np
import pytest


def central_difference(fun, x, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def mp_stch_set(F, lam, z, mu, mu_inner):
    """STCH-Set value from its definition with at least 40-digit arithmetic."""
    with mpmath.workdps(max(40, mpmath.mp.dps)):
        m, K = len(F), len(F[0])
        outer = []
        for i in range(m):
            s = mpmath.fsum(mpmath.exp(-mpmath.mpf(F[i][k]) / mpmath.mpf(mu_inner[i])) for k in range(K))
            smin = -mpmath.mpf(mu_inner[i]) * mpmath.log(s)
            outer.append(mpmath.mpf(lam[i]) * (smin - mpmath.mpf(z[i])))
        mu = mpmath.mpf(mu)
        return mu * mpmath.log(mpmath.fsum(mpmath.exp(y / mu) for y in outer))


def loop_tch_set(F, lam, z):
    """TCH-Set from plain loops."""
    best = -math.inf
    for i in range(len(F)):
        row_min = min(F[i])
        best = max(best, lam[i] * (row_min - z[i]))
    return best


@functools.lru_cache(maxsize=None)
def _splits(N, na):
    return np.array(list(itertools.combinations(range(N), na)), dtype=np.int64)


def exact_rank_sum_pvalue(a, b):
    """Two-sided rank-sum p-value by enumerating every split of the pooled midranks.

    ``p = P(|W - E W| >= |w_obs - E W|)`` over all ``C(N, n_a)`` equally
    likely assignments of the pooled ranks to the first sample.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(len(pooled))
    sorted_vals = pooled[order]
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    na, N = len(a), len(pooled)
    mean = na * (N + 1) / 2
    dev = abs(ranks[:na].sum() - mean)
    sums = ranks[_splits(N, na)].sum(axis=1)
    return float(np.mean(np.abs(sums - mean) >= dev - 1e-9))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mp_quadratic_values(A, C, X):
    """``F[i][k] = (x_k - c_i)^T A_i (x_k - c_i)`` with mpmath entries."""
    m, K, n = len(A), len(X), len(C[0])
    F = []
    for i in range(m):
        row = []
        for k in range(K):
            d = [mpmath.mpf(X[k][j]) - mpmath.mpf(C[i][j]) for j in range(n)]
            row.append(mpmath.fsum(d[a] * mpmath.mpf(A[i][a][b]) * d[b] for a in range(n) for b in range(n)))
        F.append(row)
    return F


def mp_stch_set_gradient(A, C, X, lam, z, mu, mu_inner, h="1e-12"):
    """Central differences of the STCH-Set value of quadratics, in 40-digit arithmetic."""
    K, n = len(X), len(X[0])
    with mpmath.workdps(40):
        h = mpmath.mpf(h)
        grad = np.empty((K, n))
        for k in range(K):
            for j in range(n):
                vals = []
                for sign in (1, -1):
                    Xs = [[mpmath.mpf(v) for v in row] for row in X]
                    Xs[k][j] += sign * h
                    vals.append(mp_stch_set(mp_quadratic_values(A, C, Xs), lam, z, mu, mu_inner))
                grad[k, j] = float((vals[0] - vals[1]) / (2 * h))
    return grad
