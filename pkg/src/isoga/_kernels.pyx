# cython: language_level=3
"""Compiled kernels: B-spline basis derivatives and envelope Cholesky.

The pure-numpy module ``_kernels_py`` exposes the same functions with the
same signatures and is used when this extension is unavailable.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def basis_ders(const double[::1] knots, int p, const double[::1] xi,
               const cnp.int64_t[::1] spans, int nder):
    """Nonzero B-spline basis functions and derivatives at many points.

    Parameters
    ----------
    knots : ndarray of float64
        Open knot vector.
    p : int
        Degree.
    xi : ndarray of float64, shape (npts,)
        Evaluation points.
    spans : ndarray of int64, shape (npts,)
        Knot span index of each point, ``knots[s] <= xi < knots[s+1]``
        (closed on the right for the last span).
    nder : int
        Highest derivative order. Orders above ``p`` come back as zero.

    Returns
    -------
    ndarray, shape (npts, nder + 1, p + 1)
        ``out[q, k, j]`` is the k-th derivative of ``N_{s-p+j}`` at ``xi[q]``.
    """
    cdef Py_ssize_t npts = xi.shape[0]
    out = np.zeros((npts, nder + 1, p + 1), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef int nd = nder if nder < p else p
    cdef double[:, ::1] ndu = np.empty((p + 1, p + 1))
    cdef double[:, ::1] a = np.empty((2, p + 1))
    cdef double[::1] left = np.empty(p + 1)
    cdef double[::1] right = np.empty(p + 1)
    cdef Py_ssize_t q
    cdef int s, j, r, k, s1, s2, rk, pk, j1, j2, tmpi
    cdef double u, saved, temp, d, fac

    for q in range(npts):
        s = <int>spans[q]
        u = xi[q]
        ndu[0, 0] = 1.0
        for j in range(1, p + 1):
            left[j] = u - knots[s + 1 - j]
            right[j] = knots[s + j] - u
            saved = 0.0
            for r in range(j):
                ndu[j, r] = right[r + 1] + left[j - r]
                # 0/0 := 0 for repeated knots
                if ndu[j, r] == 0.0:
                    temp = 0.0
                else:
                    temp = ndu[r, j - 1] / ndu[j, r]
                ndu[r, j] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            ndu[j, j] = saved
        for j in range(p + 1):
            o[q, 0, j] = ndu[j, p]
        if nd == 0:
            continue
        for r in range(p + 1):
            s1 = 0
            s2 = 1
            a[0, 0] = 1.0
            for k in range(1, nd + 1):
                d = 0.0
                rk = r - k
                pk = p - k
                if r >= k:
                    a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk] if ndu[pk + 1, rk] != 0.0 else 0.0
                    d = a[s2, 0] * ndu[rk, pk]
                j1 = 1 if rk >= -1 else -rk
                j2 = k - 1 if r - 1 <= pk else p - r
                for j in range(j1, j2 + 1):
                    if ndu[pk + 1, rk + j] != 0.0:
                        a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                    else:
                        a[s2, j] = 0.0
                    d += a[s2, j] * ndu[rk + j, pk]
                if r <= pk:
                    a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r] if ndu[pk + 1, r] != 0.0 else 0.0
                    d += a[s2, k] * ndu[r, pk]
                o[q, k, r] = d
                tmpi = s1
                s1 = s2
                s2 = tmpi
        fac = p
        for k in range(1, nd + 1):
            for j in range(p + 1):
                o[q, k, j] *= fac
            fac *= (p - k)
    return out


def env_cholesky(const cnp.int64_t[::1] first, const cnp.int64_t[::1] ptr,
                 double[::1] env, double tol):
    """In-place envelope (skyline) Cholesky factorization, row oriented.

    Row ``i`` of the lower triangle is stored contiguously in
    ``env[ptr[i]:ptr[i+1]]`` and covers columns ``first[i] .. i``.

    Parameters
    ----------
    first, ptr : ndarray of int64
        Envelope profile.
    env : ndarray of float64
        Lower-triangle values, overwritten by the factor ``L``.
    tol : float
        A pivot ``d`` is rejected when ``d <= tol * A_ii``.

    Returns
    -------
    int
        ``-1`` on success, else the index of the first failing row.
    """
    cdef Py_ssize_t n = first.shape[0]
    cdef Py_ssize_t i, j, k, fi, fj, f0, pi, pj
    cdef double s, aii
    for i in range(n):
        fi = first[i]
        pi = ptr[i] - fi  # env[pi + c] holds L[i, c]
        for j in range(fi, i):
            fj = first[j]
            pj = ptr[j] - fj
            f0 = fi if fi > fj else fj
            s = env[pi + j]
            for k in range(f0, j):
                s -= env[pi + k] * env[pj + k]
            env[pi + j] = s / env[pj + j]
        aii = env[pi + i]
        s = aii
        for k in range(fi, i):
            s -= env[pi + k] * env[pi + k]
        if not (s > tol * aii) or aii <= 0.0:
            return i
        env[pi + i] = sqrt(s)
    return -1


def env_solve(const cnp.int64_t[::1] first, const cnp.int64_t[::1] ptr,
              const double[::1] env, double[::1] b):
    """Solve ``L L^T x = b`` in place with an envelope factor."""
    cdef Py_ssize_t n = first.shape[0]
    cdef Py_ssize_t i, k, fi, pi
    cdef double s, bi
    for i in range(n):
        fi = first[i]
        pi = ptr[i] - fi
        s = b[i]
        for k in range(fi, i):
            s -= env[pi + k] * b[k]
        b[i] = s / env[pi + i]
    for i in range(n - 1, -1, -1):
        fi = first[i]
        pi = ptr[i] - fi
        bi = b[i] / env[pi + i]
        b[i] = bi
        for k in range(fi, i):
            b[k] -= env[pi + k] * bi
