"""Dynamic-programming kernel for chain minimization over configuration points.

Given points sorted by time, an entry cost per point (cost of reaching the
point directly from the source), and a source tie-break key per point,
computes for every point

    value[i] = min(entry[i], min_{t_j < t_i} value[j] + (x_i-x_j)^2/(2 (t_i-t_j))) - 1

together with the predecessor realizing it. Among routes within tie_tol of
the minimum the predecessor with the largest (x, t) is kept (rightmost rule);
the direct-from-source route competes with the supplied per-point key. The
value array is always the exact minimum; the tolerance only steers which of
several near-equal routes the backtrace follows.

The hot loop is JIT-compiled when numba is importable; a numpy fallback keeps
the package usable (slowly) without it.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _chain_solve_py(xs, ts, entries, src_kx, src_kt, tie_tol):
    n = xs.shape[0]
    values = np.empty(n, dtype=np.float64)
    preds = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = entries[i]
        cand = None
        if i > 0:
            dt = ts[i] - ts[:i]
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = values[:i] + (xs[i] - xs[:i]) ** 2 / (2.0 * dt)
            cand = np.where(dt > 0.0, cand, np.inf)
            best = min(best, cand.min())
        pred = -1
        kx, kt = -np.inf, -np.inf
        if entries[i] <= best + tie_tol:
            kx, kt = src_kx[i], src_kt[i]
        if cand is not None:
            for j in np.flatnonzero(cand <= best + tie_tol):
                if xs[j] > kx or (xs[j] == kx and ts[j] > kt):
                    pred = int(j)
                    kx, kt = xs[j], ts[j]
        values[i] = best - 1.0
        preds[i] = pred
    return values, preds


if HAVE_NUMBA:

    @njit(cache=True)
    def _chain_solve_nb(xs, ts, entries, src_kx, src_kt, tie_tol):  # pragma: no cover
        n = xs.shape[0]
        values = np.empty(n, dtype=np.float64)
        preds = np.empty(n, dtype=np.int64)
        for i in range(n):
            best = entries[i]
            pred = -1
            kx = src_kx[i]
            kt = src_kt[i]
            ti = ts[i]
            xi = xs[i]
            for j in range(i):
                dt = ti - ts[j]
                if dt <= 0.0:
                    continue
                dx = xi - xs[j]
                c = values[j] + dx * dx / (2.0 * dt)
                if c < best - tie_tol:
                    best = c
                    pred = j
                    kx = xs[j]
                    kt = ts[j]
                elif c <= best + tie_tol:
                    if xs[j] > kx or (xs[j] == kx and ts[j] > kt):
                        pred = j
                        kx = xs[j]
                        kt = ts[j]
                    if c < best:
                        best = c
            values[i] = best - 1.0
            preds[i] = pred
        return values, preds


def chain_solve(
    xs: np.ndarray,
    ts: np.ndarray,
    entries: np.ndarray,
    src_kx: np.ndarray,
    src_kt: np.ndarray,
    tie_tol: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Least chain action ending at each point, with rightmost predecessors.

    preds[i] == -1 means point i is entered directly from the source.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    entries = np.ascontiguousarray(entries, dtype=np.float64)
    src_kx = np.ascontiguousarray(src_kx, dtype=np.float64)
    src_kt = np.ascontiguousarray(src_kt, dtype=np.float64)
    if xs.shape[0] == 0:
        return np.empty(0, dtype=np.float64), np.empty(0, dtype=np.int64)
    if HAVE_NUMBA:
        return _chain_solve_nb(xs, ts, entries, src_kx, src_kt, tie_tol)
    return _chain_solve_py(xs, ts, entries, src_kx, src_kt, tie_tol)


def backtrack(preds: np.ndarray, last: int) -> list[int]:
    """Chain of point indices from the root to `last`, following preds."""
    chain = []
    node = last
    while node >= 0:
        chain.append(node)
        node = int(preds[node])
    chain.reverse()
    return chain
