"""Galerkin assembly: 1D Poisson, 2D/3D linear elasticity, loads.

Degrees of freedom are interleaved per control point: component ``c`` of
point ``A`` is dof ``ncomp*A + c``. Extra dofs (enrichment, multipliers)
are appended after the standard ones.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError
from .quadrature import tabulate, tabulate_boundary

__all__ = [
    "Material",
    "ConditioningWarning",
    "AssembledSystem",
    "elasticity_D",
    "strain_matrix",
    "element_dofs",
    "scatter_matrix",
    "scatter_vector",
    "assemble_poisson_1d",
    "assemble_elasticity",
    "assemble_body_force",
    "assemble_traction",
    "stiffness_from_table",
]


class ConditioningWarning(UserWarning):
    """Nearly incompressible material or extreme penalty scaling."""


_MODES = ("plane-stress", "plane-strain", "solid-3D")


@dataclass(frozen=True)
class Material:
    """Isotropic linear elastic material.

    Parameters
    ----------
    E : float
        Young's modulus, > 0.
    nu : float
        Poisson ratio in (-1, 0.5).
    mode : {'plane-stress', 'plane-strain', 'solid-3D'}
    """

    E: float
    nu: float
    mode: str = "plane-stress"

    def __post_init__(self):
        if not self.E > 0:
            raise ArgumentError(f"E must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ArgumentError(f"nu must lie in (-1, 0.5), got {self.nu}")
        if self.mode not in _MODES:
            raise ArgumentError(f"mode must be one of {_MODES}, got {self.mode!r}")

    @property
    def dim(self):
        return 3 if self.mode == "solid-3D" else 2

    @property
    def mu(self):
        return self.E / (2 * (1 + self.nu))

    @property
    def lam(self):
        return self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))

    @property
    def kappa(self):
        """Kolosov constant."""
        if self.mode == "plane-stress":
            return (3 - self.nu) / (1 + self.nu)
        return 3 - 4 * self.nu

    @property
    def E_star(self):
        """Effective modulus relating J and K."""
        if self.mode == "plane-stress":
            return self.E
        return self.E / (1 - self.nu**2)


def elasticity_D(mat):
    """Elasticity matrix in Voigt notation.

    2D order (xx, yy, xy); 3D order (xx, yy, zz, xy, yz, zx), engineering
    shear strains.
    """
    E, nu = mat.E, mat.nu
    if mat.mode != "plane-stress" and nu > 0.49:
        warnings.warn(f"nu={nu} close to 0.5: stiffness is ill-conditioned", ConditioningWarning)
    if mat.mode == "plane-stress":
        return E / (1 - nu**2) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])
    if mat.mode == "plane-strain":
        c = E / ((1 + nu) * (1 - 2 * nu))
        return c * np.array([[1 - nu, nu, 0], [nu, 1 - nu, 0], [0, 0, (1 - 2 * nu) / 2]])
    lam, mu = mat.lam, mat.mu
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] += 2 * mu
    D[np.arange(3, 6), np.arange(3, 6)] = mu
    return D


def strain_matrix(dNdx):
    """Strain-displacement matrices from spatial derivatives.

    Parameters
    ----------
    dNdx : ndarray, shape (..., n, d)
        Derivatives of ``n`` scalar functions, ``d`` in {2, 3}.

    Returns
    -------
    ndarray, shape (..., 3 | 6, d*n)
        Columns interleaved per function.
    """
    *lead, n, d = dNdx.shape
    if d == 2:
        B = np.zeros(tuple(lead) + (3, n, 2))
        B[..., 0, :, 0] = dNdx[..., 0]
        B[..., 1, :, 1] = dNdx[..., 1]
        B[..., 2, :, 0] = dNdx[..., 1]
        B[..., 2, :, 1] = dNdx[..., 0]
        return B.reshape(tuple(lead) + (3, 2 * n))
    if d == 3:
        B = np.zeros(tuple(lead) + (6, n, 3))
        for i in range(3):
            B[..., i, :, i] = dNdx[..., i]
        # xy, yz, zx
        for row, (i, j) in zip((3, 4, 5), ((0, 1), (1, 2), (2, 0))):
            B[..., row, :, i] = dNdx[..., j]
            B[..., row, :, j] = dNdx[..., i]
        return B.reshape(tuple(lead) + (6, 3 * n))
    raise ArgumentError(f"strain_matrix needs d in (2, 3), got {d}")


def element_dofs(idx, ncomp):
    """Interleaved dofs of control-point index arrays, shape (..., ncomp*n)."""
    idx = np.asarray(idx)
    return (ncomp * idx[..., :, None] + np.arange(ncomp)).reshape(idx.shape[:-1] + (-1,))


def scatter_matrix(n_dof, edofs, Ke):
    """Sum element matrices into a CSR matrix (duplicates added)."""
    edofs = np.asarray(edofs)
    nd = edofs.shape[-1]
    rows = np.broadcast_to(edofs[..., :, None], edofs.shape + (nd,)).ravel()
    cols = np.broadcast_to(edofs[..., None, :], edofs.shape + (nd,)).ravel()
    K = sp.coo_matrix((np.asarray(Ke).ravel(), (rows, cols)), shape=(n_dof, n_dof)).tocsr()
    K.sum_duplicates()
    return K


def scatter_vector(n_dof, edofs, Fe):
    F = np.zeros(n_dof)
    np.add.at(F, np.asarray(edofs).ravel(), np.asarray(Fe).ravel())
    return F


@dataclass
class AssembledSystem:
    """Linear system with boundary-condition bookkeeping.

    Attributes
    ----------
    K : scipy.sparse.csr_matrix
    F : ndarray
    ncomp : int
        Field components per control point.
    n_nodes : int
        Number of control points (standard dofs = ncomp * n_nodes).
    fixed : dict
        Directly imposed dof values, applied by the solver through
        reduction ``K_ff u_f = F_f - K_fc u_c``.
    constraints : list of (G, g)
        Lagrange-multiplier constraints ``G u = g``.
    info : dict
        Free-form metadata (method used, penalty factors, ...).
    """

    K: sp.csr_matrix
    F: np.ndarray
    ncomp: int
    n_nodes: int
    fixed: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def n_dof(self):
        return self.F.shape[0]

    def dof(self, node, comp=0):
        return self.ncomp * node + comp

    def copy(self):
        return AssembledSystem(
            self.K.copy(), self.F.copy(), self.ncomp, self.n_nodes,
            dict(self.fixed), list(self.constraints), dict(self.info),
        )

    def add(self, K=None, F=None):
        """Add contributions (sizes may be smaller; padded with zeros)."""
        if K is not None:
            K = sp.csr_matrix(K)
            if K.shape != self.K.shape:
                K = _pad(K, self.n_dof)
            self.K = (self.K + K).tocsr()
        if F is not None:
            F = np.asarray(F, dtype=float)
            self.F[: F.size] += F
        return self


def _pad(K, n):
    K = K.tocoo()
    return sp.coo_matrix((K.data, (K.row, K.col)), shape=(n, n)).tocsr()


def stiffness_from_table(tab, D):
    """Element elasticity matrices ``sum_q B^T D B w|J|``, shape (ne, nd, nd)."""
    B = strain_matrix(tab.dRdx)
    DB = np.einsum("ij,eqjk->eqik", D, B)
    return np.einsum("eqji,eqjk,eq->eik", B, DB, tab.wdet)


def assemble_poisson_1d(patch, mesh, b=None, coeff=1.0, rule=None):
    """Stiffness ``int k R'_a R'_b dx`` and load ``int R_a b dx`` in 1D.

    Parameters
    ----------
    b : callable or float, optional
        Source term ``b(x)`` with ``x`` of shape (n,).
    coeff : float
        Constant conductivity.
    rule : QuadratureRule, optional
        Defaults to p + 1 points.
    """
    if patch.dim_p != 1 or patch.dim_s != 1:
        raise ArgumentError("assemble_poisson_1d needs a 1D patch in 1D space")
    tab = tabulate(patch, mesh, rule)
    d = tab.dRdx[..., 0]
    Ke = coeff * np.einsum("eqa,eqb,eq->eab", d, d, tab.wdet)
    n = patch.n_points
    K = scatter_matrix(n, tab.idx, Ke)
    F = np.zeros(n)
    if b is not None:
        x = tab.x[..., 0]
        bv = b(x.ravel()).reshape(x.shape) if callable(b) else np.full(x.shape, float(b))
        F = scatter_vector(n, tab.idx, np.einsum("eqa,eq,eq->ea", tab.R, bv, tab.wdet))
    return AssembledSystem(K, F, 1, n, info={"problem": "poisson-1d"})


def assemble_elasticity(patch, mesh, mat, rule=None, table=None):
    """Linear elasticity stiffness in 2D or 3D.

    Returns
    -------
    AssembledSystem
        ``K`` of size ``d_s * n_np``, zero load.
    """
    ds = patch.dim_s
    if ds not in (2, 3) or patch.dim_p != ds:
        raise ArgumentError("elasticity needs a 2D or 3D solid patch")
    if mat.dim != ds:
        raise ArgumentError(f"material mode {mat.mode!r} does not match dimension {ds}")
    tab = table if table is not None else tabulate(patch, mesh, rule)
    Ke = stiffness_from_table(tab, elasticity_D(mat))
    n_dof = ds * patch.n_points
    K = scatter_matrix(n_dof, element_dofs(tab.idx, ds), Ke)
    return AssembledSystem(K, np.zeros(n_dof), ds, patch.n_points, info={"problem": "elasticity"})


def assemble_body_force(patch, mesh, b, ncomp=None, rule=None):
    """Load vector ``int R_A b dOmega``.

    Parameters
    ----------
    b : callable or array_like
        ``b(x)`` returning ``(n, ncomp)`` for points ``(n, d_s)``, or a
        constant vector.
    """
    ncomp = patch.dim_s if ncomp is None else ncomp
    tab = tabulate(patch, mesh, rule)
    x = tab.x.reshape(-1, tab.x.shape[-1])
    bv = _eval_load(b, x, None, ncomp).reshape(tab.wdet.shape + (ncomp,))
    Fe = np.einsum("eqa,eqc,eq->eac", tab.R, bv, tab.wdet)
    return scatter_vector(ncomp * patch.n_points, element_dofs(tab.idx, ncomp), Fe)


def _eval_load(f, x, normal, ncomp):
    if callable(f):
        try:
            v = f(x, normal)
        except TypeError:
            v = f(x)
        v = np.asarray(v, dtype=float)
    else:
        v = np.broadcast_to(np.asarray(f, dtype=float), (x.shape[0], ncomp))
    return v.reshape(x.shape[0], ncomp)


def assemble_traction(patch, bmesh, tbar, ncomp=None, rule=None):
    """Boundary load ``f_A = int R_A tbar dGamma`` on one face.

    Parameters
    ----------
    patch : NurbsPatch
        The parent patch (used for outward normals).
    bmesh : BoundaryMesh
    tbar : callable or array_like
        ``tbar(x, n)`` (or ``tbar(x)``) returning ``(npts, ncomp)``, or a
        constant vector.

    Returns
    -------
    ndarray
        Full-length load vector (``ncomp * n_np``).
    """
    ncomp = patch.dim_s if ncomp is None else ncomp
    tab = tabulate_boundary(patch, bmesh, rule)
    ne, nq = tab.wdet.shape
    x = tab.x.reshape(ne * nq, -1)
    nrm = tab.normal.reshape(ne * nq, -1)
    tv = _eval_load(tbar, x, nrm, ncomp).reshape(ne, nq, ncomp)
    Fe = np.einsum("eqa,eqc,eq->eac", tab.R, tv, tab.wdet)
    return scatter_vector(ncomp * patch.n_points, element_dofs(tab.idx, ncomp), Fe)


def strain_energy(system, u):
    """``0.5 u^T K u``."""
    u = np.asarray(u)[: system.K.shape[0]]
    return 0.5 * float(u @ (system.K @ u))
