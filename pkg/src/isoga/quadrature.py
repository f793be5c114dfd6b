"""Gauss-Legendre rules and the parent -> parametric -> physical mapping.

The central routine is :func:`tabulate`, which evaluates basis functions,
Jacobians and spatial derivatives for every quadrature point of a set of
elements at once. Arrays are shaped ``[n_el, n_q, ...]``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ArgumentError, SingularGeometryError

__all__ = [
    "QuadratureRule",
    "MappedPoint",
    "ElementTable",
    "BoundaryTable",
    "gauss_legendre",
    "gauss_rule",
    "default_rule",
    "parent_to_param",
    "parent_jacobian",
    "map_point",
    "tabulate",
    "tabulate_boundary",
    "integrate",
]

SINGULAR_DET = 1e-14


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    if not 1 <= n <= 30:
        raise ArgumentError(f"Gauss order must be in 1..30, got {n}")
    x = np.cos(np.pi * (np.arange(1, n + 1) - 0.25) / (n + 0.5))
    for _ in range(100):
        p0 = np.ones(n)
        p1 = x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1) if n > 1 else np.ones(n)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p0 = np.ones(n)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1) if n > 1 else np.ones(n)
    w = 2.0 / ((1 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n):
    """1D Gauss-Legendre points and weights on [-1, 1] (Newton on P_n)."""
    return _gauss_legendre(int(n))


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product rule on the parent cube [-1, 1]^d_p.

    Attributes
    ----------
    points : ndarray, shape (n_q, d_p)
        x-fastest ordering.
    weights : ndarray, shape (n_q,)
    orders : tuple of int
    """

    points: np.ndarray
    weights: np.ndarray
    orders: tuple

    @property
    def n_q(self):
        return self.weights.size

    @property
    def dim(self):
        return self.points.shape[1]


def gauss_rule(order, dim_p=1):
    """Tensor-product Gauss rule.

    Parameters
    ----------
    order : int or sequence of int
        Points per direction.
    dim_p : int
        Parametric dimension (ignored when ``order`` is a sequence).
    """
    orders = tuple(int(o) for o in order) if np.ndim(order) else (int(order),) * dim_p
    pts, wts = zip(*(gauss_legendre(o) for o in orders))
    grids = np.meshgrid(*pts[::-1], indexing="ij")
    P = np.column_stack([g.ravel() for g in grids[::-1]])
    W = np.ones(1)
    for w in wts:
        W = (w[:, None] * W[None, :]).ravel()
    return QuadratureRule(P, W, orders)


def default_rule(patch, extra=0):
    """(p + 1) points per direction, plus ``extra``."""
    return gauss_rule([p + 1 + extra for p in patch.degrees])


def parent_to_param(bounds, xt):
    """Affine map from [-1, 1]^d_p to the element box ``bounds`` (d_p, 2)."""
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    xt = np.asarray(xt, dtype=float)
    return 0.5 * ((b[:, 1] - b[:, 0]) * xt + (b[:, 1] + b[:, 0]))


def parent_jacobian(bounds):
    """Determinant of the parent -> parametric map."""
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    return float(np.prod(0.5 * (b[:, 1] - b[:, 0])))


def _inv_det(J):
    """Batched inverse and determinant of square ``J`` (..., d, d)."""
    d = J.shape[-1]
    if d == 1:
        det = J[..., 0, 0]
        with np.errstate(divide="ignore"):
            return 1.0 / det[..., None, None], det
    if d == 2:
        a, b, c, e = J[..., 0, 0], J[..., 0, 1], J[..., 1, 0], J[..., 1, 1]
        det = a * e - b * c
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.stack([np.stack([e, -b], -1), np.stack([-c, a], -1)], -2) / det[..., None, None]
        return inv, det
    det = np.linalg.det(J)
    ok = np.abs(det) > SINGULAR_DET
    inv = np.zeros_like(J)
    inv[ok] = np.linalg.inv(J[ok])
    return inv, det


@dataclass
class ElementTable:
    """Basis data at the quadrature points of a set of elements.

    Attributes
    ----------
    elements : ndarray, shape (n_el,)
    idx : ndarray, shape (n_el, n_en)
        Global control-point indices.
    params, x : ndarray, shape (n_el, n_q, d_p) / (n_el, n_q, d_s)
    R : ndarray, shape (n_el, n_q, n_en)
    dRdxi, dRdx : ndarray, shape (n_el, n_q, n_en, d_p|d_s)
    J : ndarray, shape (n_el, n_q, d_s, d_p)
        ``dx/dxi``.
    det_param : ndarray, shape (n_el, n_q)
    det_parent : ndarray, shape (n_el,)
    wdet : ndarray, shape (n_el, n_q)
        Weight times total Jacobian determinant.
    d2Rdxi, d2Rdx : ndarray or None, shape (n_el, n_q, n_en, d, d)
    """

    elements: np.ndarray
    idx: np.ndarray
    params: np.ndarray
    x: np.ndarray
    R: np.ndarray
    dRdxi: np.ndarray
    dRdx: np.ndarray
    J: np.ndarray
    det_param: np.ndarray
    det_parent: np.ndarray
    wdet: np.ndarray
    d2Rdxi: np.ndarray = None
    d2Rdx: np.ndarray = None


def _element_points(mesh, elements, xt):
    bounds = mesh.all_bounds()[elements]  # (ne, dp, 2)
    lo, hi = bounds[..., 0], bounds[..., 1]
    params = 0.5 * ((hi - lo)[:, None, :] * xt[None, :, :] + (hi + lo)[:, None, :])
    det_parent = np.prod(0.5 * (hi - lo), axis=1)
    return params, det_parent


def evaluate_in_elements(patch, mesh, elements, params, order=1):
    """Basis data at given parametric points inside given elements.

    Parameters
    ----------
    elements : ndarray, shape (n_el,)
    params : ndarray, shape (n_el, n_pts, d_p)
        Points inside each element; the element's spans are used so points
        on element edges are evaluated one-sidedly from inside.

    Returns
    -------
    dict with keys idx, x, R, dRdxi, J, det, dRdx and, for order 2,
    d2Rdxi and d2Rdx.
    """
    ne, npt, dp = params.shape
    spans = np.repeat(mesh.spans[elements], npt, axis=0)
    flat = params.reshape(-1, dp)
    out = patch.basis(flat, order, spans)
    idx = out[0].reshape(ne, npt, -1)[:, 0, :]
    nen = idx.shape[1]
    R = out[1].reshape(ne, npt, nen)
    P = patch.points[idx]  # (ne, nen, ds)
    x = np.einsum("eqa,ead->eqd", R, P)
    res = {"idx": idx, "x": x, "R": R}
    if order == 0:
        return res
    dRdxi = out[2].reshape(ne, npt, nen, dp)
    J = np.einsum("eqai,ead->eqdi", dRdxi, P)
    res.update(dRdxi=dRdxi, J=J)
    if patch.dim_s != dp:
        return res
    Jinv, det = _inv_det(J)
    bad = np.abs(det) <= SINGULAR_DET
    if np.any(bad):
        e, q = np.argwhere(bad)[0]
        raise SingularGeometryError(
            f"singular Jacobian in element {elements[e]} at parameter {params[e, q].tolist()}",
            element=int(elements[e]),
            point=params[e, q].copy(),
        )
    # dR/dx_k = dR/dxi_i (J^-1)_ik
    dRdx = np.einsum("eqai,eqik->eqak", dRdxi, Jinv)
    res.update(det=det, dRdx=dRdx)
    if order == 2:
        d2Rdxi = out[3].reshape(ne, npt, nen, dp, dp)
        xhess = np.einsum("eqaij,ead->eqdij", d2Rdxi, P)
        corr = d2Rdxi - np.einsum("eqak,eqkij->eqaij", dRdx, xhess)
        d2Rdx = np.einsum("eqil,eqaij,eqjm->eqalm", Jinv, corr, Jinv)
        res.update(d2Rdxi=d2Rdxi, d2Rdx=d2Rdx)
    return res


def tabulate(patch, mesh, rule=None, order=1, elements=None):
    """Evaluate everything needed for assembly at all quadrature points.

    Parameters
    ----------
    patch : NurbsPatch
    mesh : IgaMesh
    rule : QuadratureRule, optional
        Defaults to (p + 1) points per direction.
    order : {1, 2}
        Highest basis derivative.
    elements : array_like of int, optional
        Subset of elements; all by default.

    Returns
    -------
    ElementTable

    Raises
    ------
    SingularGeometryError
        ``|det J_xi| <= 1e-14`` at some point.
    """
    if rule is None:
        rule = default_rule(patch)
    if patch.dim_s != patch.dim_p:
        raise ArgumentError("tabulate needs d_s == d_p; use tabulate_boundary for faces")
    els = np.arange(mesh.n_el) if elements is None else np.asarray(elements, dtype=np.int64)
    params, det_parent = _element_points(mesh, els, rule.points)
    r = evaluate_in_elements(patch, mesh, els, params, max(order, 1))
    wdet = rule.weights[None, :] * np.abs(r["det"]) * det_parent[:, None]
    return ElementTable(
        elements=els,
        idx=r["idx"],
        params=params,
        x=r["x"],
        R=r["R"],
        dRdxi=r["dRdxi"],
        dRdx=r["dRdx"],
        J=r["J"],
        det_param=r["det"],
        det_parent=det_parent,
        wdet=wdet,
        d2Rdxi=r.get("d2Rdxi"),
        d2Rdx=r.get("d2Rdx"),
    )


@dataclass
class BoundaryTable:
    """Basis data at quadrature points of a boundary mesh.

    ``idx`` holds global control-point indices of the boundary functions,
    ``wdet`` the weight times the curve/surface measure, and ``normal``
    the unit outward normal of the parent patch.
    """

    idx: np.ndarray
    params: np.ndarray
    x: np.ndarray
    R: np.ndarray
    wdet: np.ndarray
    normal: np.ndarray


def tabulate_boundary(patch, bmesh, rule=None):
    """Quadrature data on a face (a curve in 2D, a surface in 3D).

    The measure is ``||t||`` for curves and ``||t1 x t2||`` for surfaces.
    For a 1D patch the face is a point with unit measure.
    """
    if bmesh.patch is None:
        x = patch.points[bmesh.nodes][None, None, :]
        sign = 1.0 if bmesh.side else -1.0
        return BoundaryTable(
            idx=np.asarray(bmesh.nodes)[None, :],
            params=np.full((1, 1, 1), bmesh.value),
            x=x.reshape(1, 1, -1),
            R=np.ones((1, 1, 1)),
            wdet=np.ones((1, 1)),
            normal=np.full((1, 1, 1), sign),
        )
    bp, bm = bmesh.patch, bmesh.mesh
    if rule is None:
        rule = default_rule(bp)
    els = np.arange(bm.n_el)
    params, det_parent = _element_points(bm, els, rule.points)
    r = evaluate_in_elements(bp, bm, els, params, 1)
    J = r["J"]  # (ne, nq, ds, dp-1)
    if J.shape[-1] == 1:
        meas = np.linalg.norm(J[..., 0], axis=-1)
    else:
        meas = np.linalg.norm(np.cross(J[..., 0], J[..., 1]), axis=-1)
    wdet = rule.weights[None, :] * meas * det_parent[:, None]
    # outward normal from the parent patch: +-grad(xi_d)
    ne, nq, _ = params.shape
    full = bmesh.embed(params.reshape(-1, params.shape[-1]))
    Jf = patch.jacobian(full)
    Jinv, _ = _inv_det(Jf)
    n = Jinv[:, bmesh.direction, :]
    n = n / np.linalg.norm(n, axis=1, keepdims=True)
    if bmesh.side == 0:
        n = -n
    return BoundaryTable(
        idx=bmesh.nodes[r["idx"]],
        params=params,
        x=r["x"],
        R=r["R"],
        wdet=wdet,
        normal=n.reshape(ne, nq, -1),
    )


@dataclass(frozen=True)
class MappedPoint:
    """One parent point mapped through an element."""

    xt: np.ndarray
    xi: np.ndarray
    x: np.ndarray
    idx: np.ndarray
    R: np.ndarray
    dRdxi: np.ndarray
    dRdx: np.ndarray
    J: np.ndarray
    det_param: float
    det_parent: float

    @property
    def det(self):
        return self.det_param * self.det_parent


def map_point(patch, mesh, element, xt):
    """Map a parent point of ``element`` to parametric and physical space.

    Raises
    ------
    SingularGeometryError
        ``|det J_xi| <= 1e-14``.
    """
    xt = np.atleast_1d(np.asarray(xt, dtype=float))
    els = np.array([element])
    params, det_parent = _element_points(mesh, els, xt[None, :])
    r = evaluate_in_elements(patch, mesh, els, params, 1)
    return MappedPoint(
        xt=xt,
        xi=params[0, 0],
        x=r["x"][0, 0],
        idx=r["idx"][0],
        R=r["R"][0, 0],
        dRdxi=r["dRdxi"][0, 0],
        dRdx=r["dRdx"][0, 0],
        J=r["J"][0, 0],
        det_param=float(r["det"][0, 0]),
        det_parent=float(det_parent[0]),
    )


def integrate(patch, mesh, f, rule=None):
    """Integrate ``f(x)`` over the patch.

    Parameters
    ----------
    f : callable
        Takes physical points ``(n, d_s)`` and returns ``(n,)`` values.
    """
    t = tabulate(patch, mesh, rule)
    vals = np.asarray(f(t.x.reshape(-1, t.x.shape[-1])), dtype=float).reshape(t.wdet.shape)
    return float(np.sum(vals * t.wdet))
