"""Rotation-free Kirchhoff plate bending.

The only unknown is the transverse deflection ``w``; curvatures come
straight from second derivatives of the C1 NURBS basis, so the degree
must be at least 2 in each direction.
"""
from dataclasses import dataclass

import numpy as np

from .assembly import AssembledSystem, assemble_body_force, scatter_matrix
from .bc import DEFAULT_COUPLING, couple_dofs_penalty
from .errors import ArgumentError, FormulationError
from .mesh import _parse_face
from .quadrature import evaluate_in_elements, tabulate
from .spline import invert_point

__all__ = [
    "PlateMaterial",
    "curvature_matrix",
    "second_spatial_derivatives",
    "assemble_plate",
    "uniform_load",
    "invert_point",
    "point_load",
    "clamp_boundary",
    "boundary_rows",
    "symmetry_coupling",
    "deflection",
]


@dataclass(frozen=True)
class PlateMaterial:
    """Isotropic plate.

    Parameters
    ----------
    E : float
    nu : float
    h : float
        Thickness.
    """

    E: float
    nu: float
    h: float

    def __post_init__(self):
        if not self.E > 0:
            raise ArgumentError("Young's modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ArgumentError("Poisson's ratio must lie in (-1, 0.5)")
        if not self.h > 0:
            raise ArgumentError("plate thickness must be positive")

    @property
    def rigidity(self):
        """Flexural rigidity ``E h^3 / (12 (1 - nu^2))``."""
        return self.E * self.h ** 3 / (12.0 * (1.0 - self.nu ** 2))

    @property
    def D(self):
        nu = self.nu
        return self.rigidity * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])


def curvature_matrix(d2Rdx):
    """Rows ``[R_xx, R_yy, 2 R_xy]``.

    Parameters
    ----------
    d2Rdx : ndarray, shape (..., n, 2, 2)

    Returns
    -------
    ndarray, shape (..., 3, n)
    """
    return np.stack([d2Rdx[..., 0, 0], d2Rdx[..., 1, 1], 2.0 * d2Rdx[..., 0, 1]], axis=-2)


def second_spatial_derivatives(patch, mesh, element, xt):
    """``d2R/dx_i dx_j`` of the element's functions at parent points.

    Parameters
    ----------
    xt : array_like, shape (n, d_p) or (d_p,)

    Returns
    -------
    idx : ndarray, shape (n_en,)
    d2Rdx : ndarray, shape (n, n_en, d, d)
    """
    xt = np.atleast_2d(np.asarray(xt, dtype=float))
    b = mesh.bounds(element)
    params = 0.5 * ((b[:, 1] - b[:, 0]) * xt + (b[:, 1] + b[:, 0]))
    r = evaluate_in_elements(patch, mesh, np.array([element]), params[None], 2)
    return r["idx"][0], r["d2Rdx"][0]


def _check_plate(patch):
    if patch.dim_p != 2 or patch.dim_s != 2:
        raise ArgumentError("plate analysis needs a planar 2D patch")
    if min(patch.degrees) < 2:
        raise FormulationError(
            f"rotation-free plates need C1 continuity; degrees {tuple(patch.degrees)} must be >= 2"
        )
    for kv in patch.knot_vectors:
        inner = kv.breaks[1:-1]
        if any(kv.multiplicity(v) > kv.degree - 1 for v in inner):
            raise FormulationError("interior knot multiplicity breaks C1 continuity")


def assemble_plate(patch, mesh, mat, rule=None):
    """Bending stiffness ``int B^T D B dOmega`` with one dof per control point.

    Raises
    ------
    FormulationError
        Degree below 2 or C0 interior knots.
    """
    _check_plate(patch)
    tab = tabulate(patch, mesh, rule, order=2)
    B = curvature_matrix(tab.d2Rdx)
    DB = np.einsum("ij,eqjk->eqik", mat.D, B)
    Ke = np.einsum("eqji,eqjk,eq->eik", B, DB, tab.wdet)
    n = patch.n_points
    return AssembledSystem(scatter_matrix(n, tab.idx, Ke), np.zeros(n), 1, n, info={"problem": "plate"})


def uniform_load(system, patch, mesh, q, rule=None):
    """Add the transverse pressure ``q`` (constant or ``q(x)``)."""
    f = (lambda x: q(x).reshape(-1, 1)) if callable(q) else [float(q)]
    system.F[: patch.n_points] += assemble_body_force(patch, mesh, f, 1, rule)
    return system


def point_load(system, patch, x, P):
    """Add a concentrated force ``P`` at physical point ``x``."""
    xi = invert_point(patch, x)
    idx, R = patch.basis(xi[None], 0)
    np.add.at(system.F, idx[0], P * R[0])
    return system


def boundary_rows(patch, face, rows=2):
    """Control points of the ``rows`` outermost lines at ``face``.

    Returns
    -------
    list of ndarray
        ``rows`` arrays ordered from the boundary inwards; entries align
        along the face.
    """
    direction, side = _parse_face(face, patch.dim_p)
    n = patch.dims[direction]
    if rows > n:
        raise ArgumentError(f"face {face} has only {n} control point lines")
    ids = np.arange(patch.n_points).reshape(patch.dims[::-1])
    axis = patch.dim_p - 1 - direction
    out = []
    for k in range(rows):
        pos = k if side == 0 else n - 1 - k
        out.append(np.take(ids, pos, axis=axis).ravel())
    return out


def clamp_boundary(system, patch, faces, rows=2):
    """Fix the deflection of the ``rows`` outermost control point lines.

    ``rows=2`` clamps (zero deflection and slope); ``rows=1`` gives a
    simple support.
    """
    if isinstance(faces, str):
        faces = [faces]
    for f in faces:
        for r in boundary_rows(patch, f, rows):
            for A in r:
                system.fixed[int(A)] = 0.0
    system.info.setdefault("bc_methods", []).append("direct")
    return system


def symmetry_coupling(system, patch, faces, w=DEFAULT_COUPLING):
    """Zero slope on symmetry edges: tie the two outer rows by penalty."""
    if isinstance(faces, str):
        faces = [faces]
    for f in faces:
        r0, r1 = boundary_rows(patch, f, 2)
        couple_dofs_penalty(system, np.column_stack([r0, r1]), w)
    return system


def deflection(patch, w, xi):
    """Deflection at parametric points, shape (n,)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    idx, R = patch.basis(xi, 0)
    return np.einsum("qa,qa->q", R, np.asarray(w)[idx])
