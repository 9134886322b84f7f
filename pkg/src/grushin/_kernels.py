"""Compiled inner loops for the tridiagonal eigensolver.

All kernels are numba-compiled, nogil (so mode sweeps parallelize with
threads) and cache to disk. They operate on the symmetric tridiagonal
matrix T = tridiag(off, diag, off) in float64.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_EPS = 2.220446049250313e-16
_SAFMIN = 2.2250738585072014e-308


@njit(cache=True, nogil=True)
def sturm_count(diag, off, x):
    """Number of eigenvalues of T strictly below x.

    LDL^T pivot recurrence on T - x*I; a pivot that lands exactly on zero is
    treated as +pivmin, which makes ties at x count as 'not below' (strict
    convention). Over/underflow rides on IEEE semantics: a huge b^2/q gives
    -inf which counts as one negative pivot and feeds back -0.0.
    """
    n = diag.shape[0]
    maxb2 = 1.0
    for i in range(n - 1):
        b2 = off[i] * off[i]
        if b2 > maxb2:
            maxb2 = b2
    pivmin = _SAFMIN * maxb2
    count = 0
    q = diag[0] - x
    if q == 0.0:
        q = pivmin
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = diag[i] - x - off[i - 1] * off[i - 1] / q
        if q == 0.0:
            q = pivmin
        if q < 0.0:
            count += 1
    return count


@njit(cache=True, nogil=True)
def gershgorin(diag, off):
    """(lower, upper) bounds on the spectrum of T."""
    n = diag.shape[0]
    lo = diag[0]
    hi = diag[0]
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(off[i - 1])
        if i < n - 1:
            r += abs(off[i])
        if diag[i] - r < lo:
            lo = diag[i] - r
        if diag[i] + r > hi:
            hi = diag[i] + r
    return lo, hi


@njit(cache=True, nogil=True)
def _bisect(diag, off, m, lo0, hi0, tol):
    """Bisect the m smallest eigenvalues inside (lo0, hi0].

    Caller guarantees sturm_count(hi0) >= m. Every Sturm evaluation tightens
    all m brackets at once, so clustered targets share work.
    """
    lo = np.full(m, lo0)
    hi = np.full(m, hi0)
    for k in range(m):
        while hi[k] - lo[k] > tol:
            mid = 0.5 * (lo[k] + hi[k])
            if mid <= lo[k] or mid >= hi[k]:
                break  # reached floating-point resolution
            c = sturm_count(diag, off, mid)
            if c > m:
                c = m
            for i in range(m):
                if i < c:
                    if mid < hi[i]:
                        hi[i] = mid
                else:
                    if mid > lo[i]:
                        lo[i] = mid
    return 0.5 * (lo + hi)


@njit(cache=True, nogil=True)
def bisect_below(diag, off, kappa, tol):
    """All eigenvalues of T strictly below kappa, ascending."""
    m = sturm_count(diag, off, kappa)
    if m == 0:
        return np.empty(0, np.float64)
    lo0, _ = gershgorin(diag, off)
    return _bisect(diag, off, m, lo0, kappa, tol)


@njit(cache=True, nogil=True)
def bisect_smallest(diag, off, k, tol):
    """The k smallest eigenvalues of T, ascending."""
    lo0, hi0 = gershgorin(diag, off)
    n = diag.shape[0]
    if k > n:
        k = n
    return _bisect(diag, off, k, lo0, hi0 + abs(hi0) * 1e-15 + 1e-300, tol)


@njit(cache=True, nogil=True)
def _gtt_factor(dl, d, du, safe):
    """Partial-pivoting LU of tridiag(dl, d, du), in place (dgttrf layout)."""
    n = d.shape[0]
    du2 = np.zeros(max(n - 2, 0), np.float64)
    ipiv = np.zeros(n, np.int64)
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0.0:
                d[i] = safe
            fact = dl[i] / d[i]
            dl[i] = fact
            d[i + 1] -= fact * du[i]
            if i < n - 2:
                du2[i] = 0.0
            ipiv[i] = 0
        else:
            fact = d[i] / dl[i]
            d[i] = dl[i]
            dl[i] = fact
            tmp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = tmp - fact * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            ipiv[i] = 1
    if d[n - 1] == 0.0:
        d[n - 1] = safe
    return du2, ipiv


@njit(cache=True, nogil=True)
def _gtt_solve(dl, d, du, du2, ipiv, b):
    """Solve with the _gtt_factor output, overwriting b."""
    n = d.shape[0]
    for i in range(n - 1):
        if ipiv[i] == 0:
            b[i + 1] -= dl[i] * b[i]
        else:
            tmp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = tmp - dl[i] * b[i]
    b[n - 1] /= d[n - 1]
    if n > 1:
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i]


@njit(cache=True, nogil=True)
def inverse_iteration(diag, off, shift, maxiter, ctol):
    """Inverse iteration on (T - shift*I) from the fixed deterministic seed.

    Seed entries ((i mod 7) + 1)/7, i the 0-based node index. Returns
    (vector, iterations, converged); the vector has euclidean norm 1 and no
    sign convention applied yet.
    """
    n = diag.shape[0]
    d = np.empty(n, np.float64)
    maxd = 0.0
    for i in range(n):
        d[i] = diag[i] - shift
        if abs(d[i]) > maxd:
            maxd = abs(d[i])
    maxe = 0.0
    for i in range(n - 1):
        if abs(off[i]) > maxe:
            maxe = abs(off[i])
    safe = (maxd + 2.0 * maxe) * _EPS
    if safe == 0.0:
        safe = _SAFMIN
    dl = off.copy()
    du = off.copy()
    du2, ipiv = _gtt_factor(dl, d, du, safe)

    v = np.empty(n, np.float64)
    s = 0.0
    for i in range(n):
        v[i] = ((i % 7) + 1) / 7.0
        s += v[i] * v[i]
    s = np.sqrt(s)
    for i in range(n):
        v[i] /= s

    converged = False
    it = 0
    w = np.empty(n, np.float64)
    for it in range(1, maxiter + 1):
        for i in range(n):
            w[i] = v[i]
        _gtt_solve(dl, d, du, du2, ipiv, w)
        nw = 0.0
        for i in range(n):
            nw += w[i] * w[i]
        nw = np.sqrt(nw)
        if not np.isfinite(nw) or nw == 0.0:
            return v, it, False
        dot = 0.0
        for i in range(n):
            w[i] /= nw
            dot += w[i] * v[i]
        for i in range(n):
            v[i] = w[i]
        if 1.0 - abs(dot) <= ctol:
            converged = True
            break
    return v, it, converged


@njit(cache=True, nogil=True)
def raise_until_count(diag, off, k, kappa0):
    """Smallest doubling of kappa0 with at least k eigenvalues below it."""
    _, hi = gershgorin(diag, off)
    hi = hi + abs(hi) * 1e-15 + 1e-300
    kappa = kappa0
    while kappa < hi and sturm_count(diag, off, kappa) < k:
        kappa = 2.0 * kappa + 1.0
    if kappa > hi:
        kappa = hi
    return kappa
