"""Linear solvers for assembled systems.

The direct path is an envelope (skyline) Cholesky factorization after a
reverse Cuthill-McKee reordering; the kernel is compiled when available.
Saddle-point systems from Lagrange multipliers are solved densely up to
2000 unknowns and with a sparse LU beyond that.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import splu

from . import kernels
from .errors import ArgumentError, ConvergenceError, SingularMatrixError

__all__ = [
    "SolveReport",
    "EnvelopeCholesky",
    "pcg",
    "solve",
    "solve_matrix",
]

PIVOT_TOL = 1e-12
DENSE_SADDLE_LIMIT = 2000


@dataclass
class SolveReport:
    """Result of :func:`solve`.

    Attributes
    ----------
    u : ndarray
        Full solution (standard plus extra dofs).
    residual : float
        ``||K u - F|| / ||F||`` on the reduced system.
    method : str
    iterations : int
        CG iterations (0 for direct).
    reactions : dict
        Dof -> reaction force for directly fixed dofs.
    multipliers : ndarray or None
        Lagrange multipliers.
    trace : list
        CG residual history.
    """

    u: np.ndarray
    residual: float
    method: str
    iterations: int = 0
    reactions: dict = field(default_factory=dict)
    multipliers: np.ndarray = None
    trace: list = field(default_factory=list)


class EnvelopeCholesky:
    """Envelope Cholesky factorization ``P A P^T = L L^T``.

    Parameters
    ----------
    A : sparse matrix
        Symmetric; only the lower triangle is read.
    tol : float
        Pivot ``d`` is rejected when ``d <= tol * A_ii``.
    reorder : bool
        Apply reverse Cuthill-McKee to shrink the envelope.

    Raises
    ------
    SingularMatrixError
        With ``dof`` set to the failing row in the original numbering.
    """

    def __init__(self, A, tol=PIVOT_TOL, reorder=True):
        A = sp.csr_matrix(A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ArgumentError("matrix must be square")
        if reorder and n > 1:
            perm = reverse_cuthill_mckee(A, symmetric_mode=True).astype(np.int64)
        else:
            perm = np.arange(n, dtype=np.int64)
        self.perm = perm
        Ap = A[perm][:, perm]
        L = sp.tril(Ap, format="coo")
        rows, cols, vals = L.row, L.col, L.data
        first = np.arange(n, dtype=np.int64)
        np.minimum.at(first, rows, cols)
        ptr = np.zeros(n + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(np.arange(n) - first + 1)
        env = np.zeros(ptr[-1])
        np.add.at(env, ptr[rows] + cols - first[rows], vals)
        self.first, self.ptr, self.env = first, ptr, env
        self.n = n
        fail = kernels.env_cholesky(first, ptr, env, float(tol))
        if fail >= 0:
            dof = int(perm[fail])
            raise SingularMatrixError(
                f"zero or negative pivot at dof {dof}: matrix is singular or indefinite", dof=dof
            )

    @property
    def envelope_size(self):
        return int(self.ptr[-1])

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 2:
            return np.column_stack([self.solve(b[:, j]) for j in range(b.shape[1])])
        y = np.ascontiguousarray(b[self.perm])
        kernels.env_solve(self.first, self.ptr, self.env, y)
        x = np.empty_like(y)
        x[self.perm] = y
        return x


def pcg(A, b, tol=1e-8, maxit=None, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns
    -------
    x : ndarray
    iterations : int
    trace : list of float
        Relative residual per iteration.

    Raises
    ------
    ConvergenceError
        Tolerance not reached in ``maxit`` iterations, or breakdown.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    maxit = 10 * n if maxit is None else int(maxit)
    d = A.diagonal()
    if np.any(d <= 0):
        raise ConvergenceError("Jacobi preconditioner needs a positive diagonal")
    Minv = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros(n), 0, [0.0]
    z = Minv * r
    p = z.copy()
    rz = r @ z
    trace = [np.linalg.norm(r) / bn]
    for it in range(1, maxit + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise ConvergenceError(f"CG breakdown (p^T A p = {pAp:.3e}) at iteration {it}", trace)
        a = rz / pAp
        x += a * p
        r -= a * Ap
        res = np.linalg.norm(r) / bn
        trace.append(res)
        if res < tol:
            return x, it, trace
        z = Minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach {tol:g} in {maxit} iterations (last residual {trace[-1]:.3e})", trace
    )


def _refine(A, solve_fn, b, steps=3, target=1e-13):
    """Iterative refinement with an existing factorization."""
    x = solve_fn(b)
    for _ in range(steps):
        r = b - A @ x
        bn = np.linalg.norm(b)
        if bn == 0 or np.linalg.norm(r) <= target * bn:
            break
        x = x + solve_fn(r)
    return x


def solve_matrix(A, b, method="direct", tol=None, maxit=None):
    """Solve an SPD system; returns ``(x, iterations, trace)``."""
    if method == "direct":
        A = sp.csr_matrix(A)
        return _refine(A, EnvelopeCholesky(A).solve, b), 0, []
    if method == "cg":
        return pcg(A, b, 1e-8 if tol is None else tol, maxit)
    raise ArgumentError(f"unknown solver method {method!r}")


def _relres(A, x, b):
    r = np.linalg.norm(A @ x - b)
    bn = np.linalg.norm(b)
    return float(r / bn) if bn > 0 else float(r)


def _backward_error(A, x, b):
    """``||A x - b|| / (||A|| ||x|| + ||b||)`` in the infinity norm."""
    r = np.abs(A @ x - b).max() if b.size else 0.0
    an = abs(sp.csr_matrix(A)).sum(axis=1).max() if b.size else 0.0
    den = an * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    return float(r / den) if den > 0 else float(r)


def solve(system, method="direct", tol=None, maxit=None):
    """Solve an :class:`AssembledSystem` including its constraints.

    Directly fixed dofs are eliminated (``K_ff u_f = F_f - K_fc u_c``) and
    their reactions recovered. Lagrange constraints produce a saddle-point
    system that always takes the direct path.

    Parameters
    ----------
    method : {'direct', 'cg'}
    tol : float, optional
        CG tolerance (default 1e-8). The direct path is checked against
        1e-10.

    Raises
    ------
    SingularMatrixError, ConvergenceError
    """
    K = sp.csr_matrix(system.K)
    F = np.asarray(system.F, dtype=float)
    n = F.size
    fixed_dofs = np.array(sorted(system.fixed), dtype=np.int64)
    uc = np.array([system.fixed[d] for d in fixed_dofs], dtype=float)
    mask = np.ones(n, dtype=bool)
    mask[fixed_dofs] = False
    free = np.flatnonzero(mask)
    u = np.zeros(n)
    u[fixed_dofs] = uc
    Kff = K[free][:, free]
    rhs = F[free] - K[free][:, fixed_dofs] @ uc if fixed_dofs.size else F[free].copy()
    iterations, trace, lam = 0, [], None
    if system.constraints:
        G = sp.vstack([c[0] for c in system.constraints]).tocsr()
        g = np.concatenate([c[1] for c in system.constraints])
        g = g - G[:, fixed_dofs] @ uc if fixed_dofs.size else g
        Gf = G[:, free]
        keep = np.flatnonzero(np.abs(Gf).sum(axis=1).A1 > 0)
        if keep.size < Gf.shape[0]:
            # rows acting only on eliminated dofs
            Gf, g = Gf[keep], g[keep]
        S = sp.bmat([[Kff, Gf.T], [Gf, None]], format="csr")
        srhs = np.concatenate([rhs, g])
        try:
            if S.shape[0] <= DENSE_SADDLE_LIMIT:
                lu = lu_factor(S.toarray(), check_finite=False)
                z = _refine(S, lambda v: lu_solve(lu, v, check_finite=False), srhs)
                used = "dense-saddle"
            else:
                lu = splu(S.tocsc())
                z = _refine(S, lu.solve, srhs)
                used = "sparse-lu-saddle"
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            raise SingularMatrixError(f"saddle-point system is singular: {exc}") from exc
        if not np.all(np.isfinite(z)):
            raise SingularMatrixError("saddle-point system is singular")
        uf, lam = z[: free.size], z[free.size:]
        res = _relres(S, z, srhs)
        berr = _backward_error(S, z, srhs)
    else:
        uf, iterations, trace = solve_matrix(Kff, rhs, method, tol, maxit)
        res = _relres(Kff, uf, rhs)
        berr = _backward_error(Kff, uf, rhs)
        used = "envelope-cholesky" if method == "direct" else "jacobi-pcg"
    limit = 1e-10 if method == "direct" or system.constraints else (1e-8 if tol is None else tol) * 10
    # penalty-stiffened systems cannot reach a small relative residual in
    # floating point; a backward-stable solution is accepted as well
    if not np.isfinite(res) or (res > max(limit, 1e-10) and berr > 1e-10):
        raise SingularMatrixError(f"solution residual {res:.3e} exceeds tolerance {limit:g}")
    u[free] = uf
    reactions = {}
    if fixed_dofs.size:
        r = K[fixed_dofs] @ u - F[fixed_dofs]
        reactions = dict(zip(fixed_dofs.tolist(), r.tolist()))
    return SolveReport(u, res, used, iterations, reactions, lam, trace)
