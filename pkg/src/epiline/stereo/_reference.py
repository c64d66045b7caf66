"""Pure numpy implementation of the scanline DP, vectorized over profile pairs.

Same entry points and semantics as the compiled ``_dpcore`` module; used when
the extension is not built or ``EPILINE_BACKEND=python`` is set.
"""

import numpy as np


def _shift_down(a, j, fill):
    """``out[:, k] = a[:, k - j]`` with ``fill`` where ``k - j < 0``."""
    out = np.full_like(a, fill)
    out[:, j:] = a[:, :-j]
    return out


def _shift_up(a, j, fill):
    out = np.full_like(a, fill)
    out[:, :-j] = a[:, j:]
    return out


def _run(X, Y, r, D, mono, psi, far, keep_back=False):
    B, n = X.shape
    S = 2 * D + 1
    ks = np.arange(S)
    rows = np.arange(B)[:, None]
    K = len(psi)

    def phi(i):
        idx = np.clip(i + ks - D, 0, n - 1)
        diff = X[:, i : i + 1] - Y[:, idx]
        return np.minimum(diff * diff, r)

    prev = phi(0)
    back = np.zeros((n, B, S), dtype=np.int32) if keep_back else None
    for i in range(1, n):
        best = prev.copy()
        barg = np.broadcast_to(ks, (B, S)).copy() if keep_back else None
        for j in range(1, min(K, S)):
            cand = _shift_down(prev, j, np.inf) + psi[j]
            take = cand < best
            best = np.where(take, cand, best)
            if keep_back:
                barg = np.where(take, ks - j, barg)
            if not mono:
                cand = _shift_up(prev, j, np.inf) + psi[j]
                take = cand < best
                best = np.where(take, cand, best)
                if keep_back:
                    barg = np.where(take, ks + j, barg)
        if mono:
            m = np.minimum.accumulate(prev, axis=1)
            if keep_back:
                # first index attaining the running minimum
                before = np.concatenate([np.full((B, 1), np.inf), m[:, :-1]], axis=1)
                marg = np.maximum.accumulate(np.where(prev < before, ks, -1), axis=1)
        else:
            g = prev.min(axis=1, keepdims=True)
            m = np.broadcast_to(g, (B, S))
            if keep_back:
                marg = np.broadcast_to(prev.argmin(axis=1)[:, None], (B, S))
        cand = m + far
        take = cand < best
        best = np.where(take, cand, best)
        if keep_back:
            barg = np.where(take, marg, barg)
            back[i] = barg
        prev = best + phi(i)
    totals = prev.min(axis=1)
    if not keep_back:
        return totals, None
    final = prev.argmin(axis=1)
    d = np.empty((B, n), dtype=np.int64)
    k = final
    for i in range(n - 1, -1, -1):
        d[:, i] = k - D
        if i > 0:
            k = back[i, rows[:, 0], k]
    return totals, d


def match_one(x, y, r, D, mono, psi, far):
    totals, d = _run(np.asarray(x)[None, :], np.asarray(y)[None, :], r, D, mono, psi, far, keep_back=True)
    return float(totals[0]), d[0]


def cost_pairs(X, Y, r, D, mono, psi, far, threads=1):
    X, Y = np.asarray(X), np.asarray(Y)
    if len(X) == 0:
        return np.empty(0)
    return _run(X, Y, r, D, mono, psi, far)[0]


def cost_grid(X, Y, r, D, mono, psi, far, threads=1, chunk=4096):
    X, Y = np.asarray(X), np.asarray(Y)
    n1, n2 = len(X), len(Y)
    out = np.empty(n1 * n2)
    ii, jj = np.divmod(np.arange(n1 * n2), max(n2, 1))
    for s in range(0, n1 * n2, chunk):
        sl = slice(s, s + chunk)
        out[sl] = _run(X[ii[sl]], Y[jj[sl]], r, D, mono, psi, far)[0]
    return out.reshape(n1, n2)
