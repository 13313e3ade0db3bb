"""Reference computations that share no code path with the package."""

import itertools
import math
from collections import Counter

import mpmath
import numpy as np

mpmath.mp.dps = 40


def residual_partial_correlation(x, y, S):
    """Correlate the least-squares residuals of x and y on [1, S]."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.size
    A = np.column_stack([np.ones(n), *S]) if len(S) else np.ones((n, 1))
    rx = x - A @ np.linalg.lstsq(A, x, rcond=None)[0]
    ry = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
    return float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))


def normal_two_sided_p(stat):
    """2 * (1 - Phi(stat)) in 40-digit arithmetic."""
    s = mpmath.mpf(stat)
    phi = (1 + mpmath.erf(s / mpmath.sqrt(2))) / 2
    return float(2 * (1 - phi))


def fisher_z_p(x, y, S):
    r = residual_partial_correlation(x, y, S)
    n_eff = len(x) - len(S) - 3
    r = min(1 - 1e-12, max(-1 + 1e-12, r))
    stat = math.sqrt(n_eff) * abs(math.atanh(r))
    return normal_two_sided_p(stat), stat


def chi2_upper(stat, dof):
    return float(mpmath.gammainc(mpmath.mpf(dof) / 2, mpmath.mpf(stat) / 2, mpmath.inf, regularized=True))


def g2_direct(x, y, S):
    """G² by explicit cell loops over every stratum of S; levels counted within stratum."""
    n = len(x)
    keys = [tuple(s[i] for s in S) for i in range(n)]
    g2 = 0.0
    dof = 0
    for key in sorted(set(keys)):
        idx = [i for i in range(n) if keys[i] == key]
        cells = Counter((x[i], y[i]) for i in idx)
        xs = sorted({x[i] for i in idx})
        ys = sorted({y[i] for i in idx})
        total = len(idx)
        row = {a: sum(cells[(a, b)] for b in ys) for a in xs}
        col = {b: sum(cells[(a, b)] for a in xs) for b in ys}
        for a in xs:
            for b in ys:
                o = cells[(a, b)]
                if o > 0:
                    g2 += 2.0 * o * math.log(o / (row[a] * col[b] / total))
        dof += (len(xs) - 1) * (len(ys) - 1)
    p = 1.0 if dof == 0 else chi2_upper(max(g2, 0.0), dof)
    return g2, dof, p


def scaled(data):
    X = np.asarray(data, float)
    if X.ndim == 1:
        X = X[:, None]
    out = []
    for j in range(X.shape[1]):
        col = [float(v) for v in X[:, j]]
        lo, hi = min(col), max(col)
        span = (hi - lo) or 1.0
        out.append([(v - lo) / span for v in col])
    return [list(r) for r in zip(*out)]


def brute_neighborhoods(rows, h):
    n = len(rows)
    return [
        {j for j in range(n) if math.sqrt(sum((a - b) ** 2 for a, b in zip(rows[i], rows[j]))) <= h}
        for i in range(n)
    ]


def brute_gamma(data, labels, h, scale=True):
    rows = scaled(data) if scale else [list(np.atleast_1d(r)) for r in np.asarray(data, float)]
    nb = brute_neighborhoods(rows, h)
    labels = list(labels)
    pos = 0
    for i in range(len(rows)):
        if all(labels[j] == labels[i] for j in nb[i]):
            pos += 1
    return pos / len(rows)


def brute_knn(train_X, train_y, query, k):
    d = [(math.sqrt(sum((a - b) ** 2 for a, b in zip(row, query))), i) for i, row in enumerate(train_X)]
    d.sort()
    votes = Counter(int(train_y[i]) for _, i in d[:k])
    best = max(votes.values())
    return min(c for c, v in votes.items() if v == best)


def full_batch_gd_losses(V, P, Q, lam, eta, epochs):
    """Full-gradient descent on the masked factorisation loss (per-entry regulariser)."""
    mask = ~np.isnan(V)
    F = np.where(mask, V, 0.0)
    P, Q = P.copy(), Q.copy()
    cnt_row = mask.sum(1)[:, None]
    cnt_col = mask.sum(0)[:, None]
    losses = []
    for _ in range(epochs):
        E = mask * (F - P @ Q.T)
        gP = -E @ Q + lam * cnt_row * P
        gQ = -E.T @ P + lam * cnt_col * Q
        P, Q = P - eta * gP, Q - eta * gQ
        E = mask * (F - P @ Q.T)
        losses.append(0.5 * (E**2).sum() + 0.5 * lam * ((cnt_row * P**2).sum() + (cnt_col * Q**2).sum()))
    return losses


def average_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def subsets_by_size(pool, k_max):
    for size in range(1, min(k_max, len(pool)) + 1):
        yield from itertools.combinations(pool, size)
