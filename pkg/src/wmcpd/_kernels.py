"""Compiled inner loops (numba). Pure-Python references live next to their callers."""
import numpy as np
from numba import njit


@njit(cache=True)
def lev_cost(G, y, k0, k1, t0, t1, gamma, row):
    """Levenshtein cost between keys [k0, k1) and tokens y[t0:t1]; d0 = G[k, y[j]]."""
    lk = k1 - k0
    for j in range(lk + 1):
        row[j] = gamma * j
    for i in range(t1 - t0):
        tok = y[t0 + i]
        diag = row[0]
        row[0] = gamma * (i + 1)
        for j in range(lk):
            best = diag + G[k0 + j, tok]
            left = row[j] + gamma
            if left < best:
                best = left
            up = row[j + 1] + gamma
            if up < best:
                best = up
            diag = row[j + 1]
            row[j + 1] = best
    return row[lk]


@njit(cache=True)
def lev_window_max(G, y, ks, ke, ts, te, gamma):
    """For every token window i, max over key windows k of -cost(k, i)."""
    out = np.empty(len(ts))
    width = 0
    for k in range(len(ks)):
        width = max(width, ke[k] - ks[k])
    row = np.empty(width + 1)
    for i in range(len(ts)):
        best = -np.inf
        for k in range(len(ks)):
            c = -lev_cost(G, y, ks[k], ke[k], ts[i], te[i], gamma, row)
            if c > best:
                best = c
        out[i] = best
    return out


@njit(cache=True)
def diag_cumsum(G, y):
    """C[a, b] = sum over l < min(a, b) of G[a-1-l, y[b-1-l]]."""
    n = G.shape[0]
    m = len(y)
    C = np.zeros((n + 1, m + 1))
    for k in range(n):
        for j in range(m):
            C[k + 1, j + 1] = C[k, j] + G[k, y[j]]
    return C


@njit(cache=True)
def diag_window_max(G, y, ks, ke, ts, te):
    """For every token window i, max over key windows k of the mean score over
    the first min(len_k, len_i) aligned positions."""
    C = diag_cumsum(G, y)
    out = np.empty(len(ts))
    for i in range(len(ts)):
        lt = te[i] - ts[i]
        best = -np.inf
        for k in range(len(ks)):
            L = min(ke[k] - ks[k], lt)
            v = (C[ks[k] + L, ts[i] + L] - C[ks[k], ts[i]]) / L
            if v > best:
                best = v
        out[i] = best
    return out


@njit(cache=True)
def diag_scan_max(G, y, B):
    """max over a, b of the mean score of keys [a, a+B) against tokens [b, b+B)."""
    C = diag_cumsum(G, y)
    n = G.shape[0]
    m = len(y)
    best = -np.inf
    for a in range(n - B + 1):
        for b in range(m - B + 1):
            v = C[a + B, b + B] - C[a, b]
            if v > best:
                best = v
    return best / B


@njit(cache=True)
def cusum_profile(levels, n_levels):
    """max over thresholds of |L * W(tau, t) - tau * W(L, t)| for tau = 1..L-1.

    ``levels`` are integer ranks of the values (ties share a rank); W(tau, t)
    counts entries among the first tau whose rank is <= t.
    """
    L = len(levels)
    total = np.zeros(n_levels, np.int64)
    for x in levels:
        total[x] += 1
    for c in range(1, n_levels):
        total[c] += total[c - 1]
    hist = np.zeros(n_levels, np.int64)
    out = np.zeros(L - 1)
    for tau in range(1, L):
        hist[levels[tau - 1]] += 1
        run = 0
        best = 0
        for c in range(n_levels):
            run += hist[c]
            d = L * run - tau * total[c]
            if d < 0:
                d = -d
            if d > best:
                best = d
        out[tau - 1] = best
    return out


@njit(cache=True)
def cusum_max_many(samples, n_levels):
    """Row-wise max of :func:`cusum_profile` for a stack of resampled rank vectors."""
    out = np.empty(samples.shape[0])
    for r in range(samples.shape[0]):
        out[r] = cusum_profile(samples[r], n_levels).max()
    return out
