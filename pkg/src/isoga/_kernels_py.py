"""Pure-numpy versions of the compiled kernels.

Signatures and results match ``isoga._kernels``. Loops run over the degree
(basis) or over row blocks (Cholesky) and vectorize across the rest.
"""
import numpy as np
from scipy.linalg import solve_triangular

_BLOCK = 64


def _safe_div(num, den):
    out = np.zeros(np.broadcast(num, den).shape)
    nz = den != 0.0
    np.divide(num, den, out=out, where=nz)
    return out


def basis_ders(knots, p, xi, spans, nder):
    """Nonzero B-spline basis functions and derivatives at many points.

    See ``isoga._kernels.basis_ders``.
    """
    knots = np.asarray(knots, dtype=float)
    xi = np.asarray(xi, dtype=float)
    spans = np.asarray(spans, dtype=np.int64)
    npts = xi.shape[0]
    out = np.zeros((npts, nder + 1, p + 1))
    nd = min(nder, p)
    ndu = np.empty((p + 1, p + 1, npts))
    left = np.empty((p + 1, npts))
    right = np.empty((p + 1, npts))
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = xi - knots[spans + 1 - j]
        right[j] = knots[spans + j] - xi
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = _safe_div(ndu[r, j - 1], ndu[j, r])
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    out[:, 0, :] = ndu[:, p].T
    if nd == 0:
        return out
    for r in range(p + 1):
        a = np.zeros((2, p + 1, npts))
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nd + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = _safe_div(a[s1, 0], ndu[pk + 1, rk])
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = _safe_div(a[s1, j] - a[s1, j - 1], ndu[pk + 1, rk + j])
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = _safe_div(-a[s1, k - 1], ndu[pk + 1, r])
                d = d + a[s2, k] * ndu[r, pk]
            out[:, k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, nd + 1):
        out[:, k, :] *= fac
        fac *= p - k
    return out


def _gather(first, ptr, env, r0, r1, c0):
    """Dense copy of rows ``r0:r1``, columns ``c0:r1`` of the envelope."""
    blk = np.zeros((r1 - r0, r1 - c0))
    for i in range(r0, r1):
        fi = max(first[i], c0)
        blk[i - r0, fi - c0:i - c0 + 1] = env[ptr[i] + fi - first[i]:ptr[i + 1]]
    return blk


def env_cholesky(first, ptr, env, tol):
    """In-place envelope Cholesky factorization, blocked by rows.

    See ``isoga._kernels.env_cholesky``. Each block of rows is reduced
    against the already factored rows with a dense triangular solve, then
    its diagonal block is factored column by column so a failing pivot can
    be located exactly.
    """
    n = first.shape[0]
    for r0 in range(0, n, _BLOCK):
        r1 = min(r0 + _BLOCK, n)
        c0 = int(first[r0:r1].min())
        A = _gather(first, ptr, env, r0, r1, c0)
        m = r1 - r0
        off = r0 - c0
        if off > 0:
            Lprev = _gather(first, ptr, env, c0, r0, c0)
            # X Lprev^T = A_off  ->  Lprev X^T = A_off^T
            X = solve_triangular(Lprev, A[:, :off].T, lower=True, check_finite=False).T
            A[:, :off] = X
            D = A[:, off:] - X @ X.T
        else:
            D = A[:, off:].copy()
        diag0 = np.array([env[ptr[i + 1] - 1] for i in range(r0, r1)])
        for j in range(m):
            djj = D[j, j]
            if not (djj > tol * diag0[j]) or diag0[j] <= 0.0:
                return r0 + j
            ljj = np.sqrt(djj)
            D[j, j] = ljj
            D[j + 1:, j] /= ljj
            D[j + 1:, j + 1:] -= np.outer(D[j + 1:, j], D[j + 1:, j])
        A[:, off:] = np.tril(D)
        for i in range(r0, r1):
            fi = first[i]
            env[ptr[i]:ptr[i + 1]] = A[i - r0, fi - c0:i - c0 + 1]
    return -1


def env_solve(first, ptr, env, b):
    """Solve ``L L^T x = b`` in place with an envelope factor."""
    n = first.shape[0]
    for i in range(n):
        fi, pi = first[i], ptr[i]
        row = env[pi:ptr[i + 1]]
        b[i] = (b[i] - row[:-1] @ b[fi:i]) / row[-1]
    for i in range(n - 1, -1, -1):
        fi, pi = first[i], ptr[i]
        row = env[pi:ptr[i + 1]]
        b[i] /= row[-1]
        b[fi:i] -= row[:-1] * b[i]
