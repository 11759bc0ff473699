"""Hot numeric kernels: Lawson-Hanson NNLS and regression metrics.

Each kernel has a loop-style numba version and a vectorised numpy version.
``nnls``, ``r2_score`` and ``mape_percent`` dispatch on ``EM0_NUMBA``.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit


def default_tol(A):
    m, n = A.shape
    return 10.0 * np.finfo(np.float64).eps * max(m, n) * max(1.0, np.abs(A).sum(axis=0).max())


# -- numpy ------------------------------------------------------------------

def nnls_numpy(A, b, tol, max_iter):
    m, n = A.shape
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    it = 0
    while (~passive).any() and w[~passive].max() > tol:
        cand = np.where(passive, -np.inf, w)
        passive[int(np.argmax(cand))] = True
        while True:
            it += 1
            if it > max_iter:
                raise RuntimeError("NNLS did not converge")
            s = np.zeros(n)
            s[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            if s[passive].min() > 0:
                x = s
                break
            bad = passive & (s <= 0)
            den = x[bad] - s[bad]
            ratios = np.divide(x[bad], den, out=np.zeros_like(den), where=den > 0)
            alpha = ratios.min()
            x = x + alpha * (s - x)
            drop = passive & (x <= tol)
            drop |= bad & (x <= 0)
            passive &= ~drop
            x[~passive] = 0.0
        w = A.T @ (b - A @ x)
    return x


def r2_numpy(y, yhat, centered):
    ss_res = float(np.sum((y - yhat) ** 2))
    ref = y - y.mean() if centered else y
    ss_tot = float(np.sum(ref ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan


def mape_numpy(y, yhat):
    return float(100.0 * np.mean(np.abs(yhat - y) / y))


# -- numba ------------------------------------------------------------------

@njit(cache=True)
def _lstsq_subset(A, b, passive):
    m, n = A.shape
    k = 0
    for j in range(n):
        if passive[j]:
            k += 1
    sub = np.empty((m, k))
    c = 0
    for j in range(n):
        if passive[j]:
            for i in range(m):
                sub[i, c] = A[i, j]
            c += 1
    z = np.linalg.lstsq(sub, b)[0]
    s = np.zeros(n)
    c = 0
    for j in range(n):
        if passive[j]:
            s[j] = z[c]
            c += 1
    return s


@njit(cache=True)
def _gradient(A, b, x):
    m, n = A.shape
    r = b.copy()
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += A[i, j] * x[j]
        r[i] -= acc
    w = np.zeros(n)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += A[i, j] * r[i]
        w[j] = acc
    return w


@njit(cache=True)
def nnls_numba(A, b, tol, max_iter):
    m, n = A.shape
    x = np.zeros(n)
    passive = np.zeros(n, dtype=np.bool_)
    it = 0
    while True:
        w = _gradient(A, b, x)
        best = -1
        best_w = tol
        for j in range(n):
            if not passive[j] and w[j] > best_w:
                best_w = w[j]
                best = j
        if best < 0:
            return x
        passive[best] = True
        while True:
            it += 1
            if it > max_iter:
                raise RuntimeError("NNLS did not converge")
            s = _lstsq_subset(A, b, passive)
            feasible = True
            for j in range(n):
                if passive[j] and s[j] <= 0.0:
                    feasible = False
            if feasible:
                x = s
                break
            alpha = np.inf
            for j in range(n):
                if passive[j] and s[j] <= 0.0:
                    den = x[j] - s[j]
                    a = x[j] / den if den > 0.0 else 0.0
                    if a < alpha:
                        alpha = a
            for j in range(n):
                x[j] += alpha * (s[j] - x[j])
            for j in range(n):
                if passive[j] and (x[j] <= tol or (s[j] <= 0.0 and x[j] <= 0.0)):
                    passive[j] = False
                if not passive[j]:
                    x[j] = 0.0


@njit(cache=True)
def r2_numba(y, yhat, centered):
    n = y.shape[0]
    mean = 0.0
    if centered:
        for i in range(n):
            mean += y[i]
        mean /= n
    ss_res = 0.0
    ss_tot = 0.0
    for i in range(n):
        d = y[i] - yhat[i]
        ss_res += d * d
        t = y[i] - mean
        ss_tot += t * t
    if ss_tot <= 0.0:
        return np.nan
    return 1.0 - ss_res / ss_tot


@njit(cache=True)
def mape_numba(y, yhat):
    n = y.shape[0]
    acc = 0.0
    for i in range(n):
        acc += abs(yhat[i] - y[i]) / y[i]
    return 100.0 * acc / n


# -- dispatch ---------------------------------------------------------------

def use_numba() -> bool:
    return _accel.NUMBA_ENABLED


def nnls(A, b, tol=None, max_iter=None, backend=None):
    """Solve min ||A x - b|| subject to x >= 0 (Lawson & Hanson active set)."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if tol is None:
        tol = default_tol(A)
    if max_iter is None:
        max_iter = 30 * A.shape[1] + 30
    backend = backend or ("numba" if use_numba() else "numpy")
    fn = nnls_numba if backend == "numba" else nnls_numpy
    return fn(A, b, float(tol), int(max_iter))


def r2_score(y, yhat, centered=True, backend=None):
    y = np.ascontiguousarray(y, dtype=np.float64)
    yhat = np.ascontiguousarray(yhat, dtype=np.float64)
    backend = backend or ("numba" if use_numba() else "numpy")
    fn = r2_numba if backend == "numba" else r2_numpy
    return float(fn(y, yhat, centered))


def mape_percent(y, yhat, backend=None):
    y = np.ascontiguousarray(y, dtype=np.float64)
    yhat = np.ascontiguousarray(yhat, dtype=np.float64)
    backend = backend or ("numba" if use_numba() else "numpy")
    fn = mape_numba if backend == "numba" else mape_numpy
    return float(fn(y, yhat))
