"""Dirichlet conditions (direct, penalty, Lagrange, least squares) and
penalty coupling of dof pairs."""
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .assembly import ConditioningWarning, scatter_matrix, scatter_vector
from .errors import ArgumentError, MethodError, SingularConstraintError
from .mesh import extract_boundary, face_nodes
from .quadrature import tabulate_boundary

__all__ = [
    "DirichletSpec",
    "ProjectionSystem",
    "METHODS",
    "apply_dirichlet",
    "apply_direct",
    "apply_penalty",
    "apply_lagrange",
    "least_squares_project",
    "apply_least_squares",
    "couple_dofs_penalty",
    "corner_nodes",
]

METHODS = ("direct", "penalty", "lagrange", "least-squares")
DEFAULT_PENALTY = 1e10
DEFAULT_COUPLING = 1e7


@dataclass
class DirichletSpec:
    """Prescribed values on faces or on individual control points.

    Parameters
    ----------
    faces : sequence of str
        Face ids (``xi0`` ... ``zeta1``).
    nodes : sequence of int
        Explicit control points (in addition to faces).
    component : int, sequence of int or None
        Constrained components; None means all.
    value : float or sequence of float
        Uniform value (per component when a sequence).
    field : callable, optional
        ``field(x)`` returning ``(n, ncomp)`` values; overrides ``value``.
    method : {'direct', 'penalty', 'lagrange', 'least-squares'}
    penalty : float
    collocation_per_element : int
    """

    faces: Sequence[str] = ()
    nodes: Sequence[int] = ()
    component: Union[int, Sequence[int], None] = None
    value: Union[float, Sequence[float]] = 0.0
    field: Optional[Callable] = None
    method: str = "direct"
    penalty: float = DEFAULT_PENALTY
    collocation_per_element: int = 4

    def __post_init__(self):
        if self.method not in METHODS:
            raise ArgumentError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if isinstance(self.faces, str):
            self.faces = (self.faces,)

    def components(self, ncomp):
        if self.component is None:
            return list(range(ncomp))
        comps = [self.component] if np.ndim(self.component) == 0 else list(self.component)
        for c in comps:
            if not 0 <= c < ncomp:
                raise ArgumentError(f"component {c} out of range for {ncomp} components")
        return [int(c) for c in comps]

    @property
    def homogeneous(self):
        return self.field is None and np.all(np.asarray(self.value, dtype=float) == 0.0)

    def values(self, x, ncomp):
        """Prescribed values at points, shape (n, ncomp)."""
        x = np.atleast_2d(x)
        if self.field is not None:
            return np.asarray(self.field(x), dtype=float).reshape(x.shape[0], ncomp)
        v = np.asarray(self.value, dtype=float)
        if v.ndim == 0:
            return np.full((x.shape[0], ncomp), float(v))
        comps = self.components(ncomp)
        out = np.zeros((x.shape[0], ncomp))
        if v.size == ncomp:
            out[:] = v
        elif v.size == len(comps):
            out[:, comps] = v
        else:
            raise ArgumentError("value length must match components")
        return out


def corner_nodes(patch):
    """Control points at the corners of the control grid."""
    ids = np.arange(patch.n_points).reshape(patch.dims[::-1])
    sl = np.ix_(*[[0, n - 1] for n in patch.dims[::-1]])
    return np.unique(ids[sl])


def _node_points(patch, nodes):
    return patch.points[np.asarray(nodes, dtype=np.int64)]


def apply_direct(system, patch, mesh, spec):
    """Fix control variables directly.

    Legal for homogeneous data, a uniform value on whole faces, or
    control points at patch corners (where the basis interpolates).

    Raises
    ------
    MethodError
        Non-uniform data on a face, or a non-zero value at a control point
        that is not a patch corner.
    """
    ncomp = system.ncomp
    comps = spec.components(ncomp)
    if spec.faces and spec.field is not None and not spec.homogeneous:
        raise MethodError(
            "direct imposition of a varying field on a face is not exact; "
            "use penalty, lagrange or least-squares"
        )
    nodes = [face_nodes(patch, f) for f in spec.faces]
    fixed = {}
    for nd in nodes:
        vals = spec.values(_node_points(patch, nd), ncomp)
        for i, A in enumerate(nd):
            for c in comps:
                fixed[ncomp * int(A) + c] = float(vals[i, c])
    if len(spec.nodes):
        nd = np.asarray(spec.nodes, dtype=np.int64)
        vals = spec.values(_node_points(patch, nd), ncomp)
        corners = set(corner_nodes(patch).tolist())
        for i, A in enumerate(nd):
            for c in comps:
                if vals[i, c] != 0.0 and int(A) not in corners:
                    raise MethodError(
                        f"control point {int(A)} is not interpolatory; a non-zero value "
                        "cannot be imposed directly"
                    )
                fixed[ncomp * int(A) + c] = float(vals[i, c])
    system.fixed.update(fixed)
    system.info.setdefault("bc_methods", []).append("direct")
    return system


def _boundary_mass(patch, bmesh, spec, ncomp, comps, rule=None):
    """Boundary mass-type integrals for the chosen components.

    Returns the table, element dofs of the chosen components and the
    element matrices / vectors ``int R_a R_b`` and ``int R_a g_c``.
    """
    tab = tabulate_boundary(patch, bmesh, rule)
    ne, nq = tab.wdet.shape
    g = spec.values(tab.x.reshape(ne * nq, -1), ncomp).reshape(ne, nq, ncomp)
    Me = np.einsum("eqa,eqb,eq->eab", tab.R, tab.R, tab.wdet)
    Fe = np.einsum("eqa,eqc,eq->eac", tab.R, g, tab.wdet)
    return tab, Me, Fe


def apply_penalty(system, patch, mesh, spec, alpha=None):
    """Add ``alpha int R R dGamma`` and ``alpha int R g dGamma`` on faces,
    and ``alpha`` point springs on explicit nodes."""
    alpha = spec.penalty if alpha is None else float(alpha)
    if alpha < 0:
        raise ArgumentError("penalty must be non-negative")
    if alpha == 0:
        return system
    ncomp = system.ncomp
    comps = spec.components(ncomp)
    n = system.n_dof
    Kp = sp.csr_matrix((n, n))
    Fp = np.zeros(n)
    for f in spec.faces:
        bmesh = extract_boundary(mesh, patch, f)
        tab, Me, Fe = _boundary_mass(patch, bmesh, spec, ncomp, comps)
        for c in comps:
            dofs = ncomp * tab.idx + c
            Kp = Kp + scatter_matrix(n, dofs, alpha * Me)
            Fp += scatter_vector(n, dofs, alpha * Fe[..., c])
    if len(spec.nodes):
        nd = np.asarray(spec.nodes, dtype=np.int64)
        vals = spec.values(_node_points(patch, nd), ncomp)
        rows = []
        for i, A in enumerate(nd):
            for c in comps:
                rows.append(ncomp * int(A) + c)
                Fp[ncomp * int(A) + c] += alpha * vals[i, c]
        Kp = Kp + sp.csr_matrix((np.full(len(rows), alpha), (rows, rows)), shape=(n, n))
    kmax = abs(system.K).max() if system.K.nnz else 0.0
    pmax = abs(Kp).max() if Kp.nnz else 0.0
    if kmax > 0 and pmax / kmax > 1e16:
        warnings.warn(
            f"penalty {alpha:g} exceeds the stiffness scale by more than 1e16", ConditioningWarning
        )
    system.add(Kp, Fp)
    system.info.setdefault("bc_methods", []).append("penalty")
    return system


def _check_rank(G):
    cols = np.unique(G.nonzero()[1])
    if G.shape[0] == 0:
        return
    dense = G[:, cols].toarray() if sp.issparse(G) else np.asarray(G)[:, cols]
    if dense.shape[1] < dense.shape[0]:
        raise SingularConstraintError("more constraints than constrained unknowns")
    s = np.linalg.svd(dense, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise SingularConstraintError(
            f"constraint matrix is rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.2e})"
        )


def apply_lagrange(system, patch, mesh, spec):
    """Append Galerkin multiplier constraints ``G u = g``.

    On a face the multiplier space is the face trace basis:
    ``G_kI = int N_k R_I dGamma`` and ``g_k = int N_k gbar dGamma``.
    Explicit nodes give point constraints ``u_dof = value``.

    Raises
    ------
    SingularConstraintError
        The accumulated constraint rows are linearly dependent.
    """
    ncomp = system.ncomp
    comps = spec.components(ncomp)
    n = system.n_dof
    rows_G, rows_g = [], []
    for f in spec.faces:
        bmesh = extract_boundary(mesh, patch, f)
        tab, Me, Fe = _boundary_mass(patch, bmesh, spec, ncomp, comps)
        nb = len(bmesh.nodes)
        local = np.searchsorted(bmesh.nodes, tab.idx)  # face nodes are sorted
        for c in comps:
            r = np.broadcast_to(local[:, :, None], Me.shape).ravel()
            cc = np.broadcast_to((ncomp * tab.idx + c)[:, None, :], Me.shape).ravel()
            G = sp.coo_matrix((Me.ravel(), (r, cc)), shape=(nb, n)).tocsr()
            g = np.zeros(nb)
            np.add.at(g, local.ravel(), Fe[..., c].ravel())
            rows_G.append(G)
            rows_g.append(g)
    if len(spec.nodes):
        nd = np.asarray(spec.nodes, dtype=np.int64)
        vals = spec.values(_node_points(patch, nd), ncomp)
        dofs, gv = [], []
        for i, A in enumerate(nd):
            for c in comps:
                dofs.append(ncomp * int(A) + c)
                gv.append(vals[i, c])
        m = len(dofs)
        rows_G.append(sp.csr_matrix((np.ones(m), (np.arange(m), dofs)), shape=(m, n)))
        rows_g.append(np.asarray(gv))
    if not rows_G:
        return system
    G = sp.vstack(rows_G).tocsr()
    g = np.concatenate(rows_g)
    allG = sp.vstack([c[0] for c in system.constraints] + [G]).tocsr()
    _check_rank(allG)
    system.constraints.append((G, g))
    system.info.setdefault("bc_methods", []).append("lagrange")
    return system


@dataclass
class ProjectionSystem:
    """Least-squares system ``A q = b`` over boundary control points.

    Attributes
    ----------
    A : ndarray, shape (n_D, n_D)
    b : ndarray, shape (n_D, ncomp)
    nodes : ndarray, shape (n_D,)
        Global control-point index of each row.
    x_c : ndarray
        Collocation points.
    """

    A: np.ndarray
    b: np.ndarray
    nodes: np.ndarray
    x_c: np.ndarray
    N_c: np.ndarray = field(default=None, repr=False)
    g_c: np.ndarray = field(default=None, repr=False)

    def objective(self, q):
        """``sum_C || sum_A R_A(x_C) q_A - g(x_C) ||^2``."""
        r = self.N_c @ np.asarray(q).reshape(self.A.shape[0], -1) - self.g_c
        return float(np.sum(r * r))


def least_squares_project(patch, mesh, faces, gbar, ncomp, n_c=4, return_system=False):
    """Fit boundary control values to ``gbar`` at collocation points.

    ``n_c`` points per boundary element, uniformly spaced in the parameter
    including the element ends. ``A = sum_C N(x_C) N(x_C)^T`` is solved by
    a Cholesky factorization.

    Returns
    -------
    nodes : ndarray
        Boundary control points.
    q : ndarray, shape (n_D, ncomp)
    system : ProjectionSystem
        Only when ``return_system``.

    Raises
    ------
    ArgumentError
        ``n_c < 2``, or ``A`` is singular (increase ``n_c``).
    """
    if n_c < 2:
        raise ArgumentError("need at least 2 collocation points per boundary element")
    if isinstance(faces, str):
        faces = [faces]
    all_nodes = np.unique(np.concatenate([face_nodes(patch, f) for f in faces]))
    nD = all_nodes.size
    rows_N, xs = [], []
    for f in faces:
        bmesh = extract_boundary(mesh, patch, f)
        if bmesh.patch is None:
            N = np.zeros((1, nD))
            N[0, np.searchsorted(all_nodes, bmesh.nodes[0])] = 1.0
            rows_N.append(N)
            xs.append(patch.points[bmesh.nodes])
            continue
        bp, bm = bmesh.patch, bmesh.mesh
        t = np.linspace(-1.0, 1.0, n_c)
        grids = np.meshgrid(*([t] * bp.dim_p)[::-1], indexing="ij")
        xt = np.column_stack([g.ravel() for g in grids[::-1]])
        bounds = bm.all_bounds()
        lo, hi = bounds[..., 0], bounds[..., 1]
        params = 0.5 * ((hi - lo)[:, None, :] * xt[None] + (hi + lo)[:, None, :])
        spans = np.repeat(bm.spans, xt.shape[0], axis=0)
        idx, R = bp.basis(params.reshape(-1, bp.dim_p), 0, spans)
        cols = np.searchsorted(all_nodes, bmesh.nodes[idx])
        N = np.zeros((R.shape[0], nD))
        np.put_along_axis(N, cols, R, axis=1)
        rows_N.append(N)
        xs.append(np.einsum("qa,qad->qd", R, bp.points[idx]))
    Nc = np.vstack(rows_N)
    xc = np.vstack(xs)
    gc = np.asarray(gbar(xc), dtype=float).reshape(xc.shape[0], ncomp) if callable(gbar) else \
        np.broadcast_to(np.asarray(gbar, dtype=float), (xc.shape[0], ncomp)).copy()
    A = Nc.T @ Nc
    b = Nc.T @ gc
    try:
        cf = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ArgumentError(
            f"least-squares matrix is singular with {n_c} collocation points per element; "
            "increase collocation_per_element"
        ) from exc
    if np.min(np.abs(np.diag(cf[0]))) ** 2 <= 1e-13 * np.max(np.diag(A)):
        raise ArgumentError(
            f"least-squares matrix is singular with {n_c} collocation points per element; "
            "increase collocation_per_element"
        )
    q = cho_solve(cf, b)
    if return_system:
        return all_nodes, q, ProjectionSystem(A, b, all_nodes, xc, Nc, gc)
    return all_nodes, q


def apply_least_squares(system, patch, mesh, spec):
    """Project the data on the faces and fix the resulting control values."""
    ncomp = system.ncomp
    comps = spec.components(ncomp)
    fixed = {}
    if spec.faces:
        nodes, q = least_squares_project(
            patch, mesh, spec.faces, lambda x: spec.values(x, ncomp), ncomp,
            spec.collocation_per_element,
        )
        for i, A in enumerate(nodes):
            for c in comps:
                fixed[ncomp * int(A) + c] = float(q[i, c])
    system.fixed.update(fixed)
    if len(spec.nodes):
        # point data: the basis interpolates at corners, so fix directly
        apply_direct(system, patch, mesh, DirichletSpec(
            nodes=spec.nodes, component=spec.component, value=spec.value, field=spec.field,
        ))
        system.info["bc_methods"][-1] = "least-squares"
        return system
    system.info.setdefault("bc_methods", []).append("least-squares")
    return system


def apply_dirichlet(system, patch, mesh, spec):
    """Dispatch on ``spec.method``."""
    fn = {
        "direct": apply_direct,
        "penalty": apply_penalty,
        "lagrange": apply_lagrange,
        "least-squares": apply_least_squares,
    }[spec.method]
    return fn(system, patch, mesh, spec)


def couple_dofs_penalty(system, pairs, w=DEFAULT_COUPLING):
    """Add ``w [[1, -1], [-1, 1]]`` for each dof pair ``(i, j)``."""
    if w < 0:
        raise ArgumentError("coupling weight must be non-negative")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if w == 0 or pairs.size == 0:
        return system
    Ke = np.broadcast_to(w * np.array([[1.0, -1.0], [-1.0, 1.0]]), (pairs.shape[0], 2, 2))
    system.add(scatter_matrix(system.n_dof, pairs, Ke))
    system.info.setdefault("bc_methods", []).append("coupling-penalty")
    return system
