"""Extended isogeometric analysis of stationary traction-free cracks.

Displacement approximation (unshifted enrichment)::

    u = sum_I R_I u_I + sum_{J in S^c} R_J H a_J
                      + sum_{K in S^f} R_K sum_a B_a b_K^a

``H`` is the sign of the normal level set and ``B_a`` are the four crack
tip branch functions. Extra functions are numbered after the control
points: one per Heaviside node, then four per tip node, so the dofs of
function ``f`` are ``ncomp*f + c`` as for standard ones.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .assembly import (
    AssembledSystem,
    elasticity_D,
    element_dofs,
    stiffness_from_table,
    strain_matrix,
)
from .errors import ArgumentError, ConvergenceError, DomainError, SingularPointError, TopologyError
from .mesh import build_vis_mesh
from .quadrature import QuadratureRule, default_rule, evaluate_in_elements, gauss_legendre, gauss_rule, tabulate
from .spline import invert_point

__all__ = [
    "Crack2D",
    "Crack3D",
    "EnrichmentState",
    "NONE",
    "HEAVISIDE",
    "TIP",
    "compute_level_sets",
    "select_enriched_nodes",
    "heaviside",
    "branch_functions",
    "duffy_rule",
    "polar_from_level_sets",
    "XigaModel",
    "assemble_enriched",
    "sif_interaction_integral",
    "exact_griffith",
    "exact_mode_I_3d",
    "cracked_vis_mesh",
    "displacement_jump",
    "enriched_vis_fields",
]

NONE, HEAVISIDE, TIP = 0, 1, 2
ENRICHED_QUAD = 13

_SQUARE = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _ear_clip(poly):
    """Triangles of a simple counter-clockwise polygon."""
    pts = [np.asarray(p, dtype=float) for p in poly]
    tris = []
    while len(pts) > 3:
        m = len(pts)
        for i in range(m):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % m]
            if _cross2(b - a, c - b) <= 1e-14:
                continue
            others = [p for j, p in enumerate(pts) if j not in ((i - 1) % m, i, (i + 1) % m)]
            inside = any(
                _cross2(b - a, p - a) > 0 and _cross2(c - b, p - b) > 0 and _cross2(a - c, p - c) > 0
                for p in others
            )
            if not inside:
                tris.append((b, c, a))
                del pts[i]
                break
        else:
            # degenerate remainder: drop a collinear vertex
            areas = [abs(_cross2(pts[i] - pts[i - 1], pts[(i + 1) % m] - pts[i])) for i in range(m)]
            del pts[int(np.argmin(areas))]
    if len(pts) == 3 and abs(_cross2(pts[1] - pts[0], pts[2] - pts[1])) > 1e-14:
        tris.append(tuple(pts))
    return tris


def duffy_rule(triangles, n):
    """Collapsed-square Gauss rule over triangles in the parent square.

    Each triangle ``(a, b, c)`` is the image of ``[0, 1]^2`` under
    ``x = a + u (b - a) + u v (c - b)``, so the vertex ``a`` is collapsed
    and the Jacobian ``u |(b - a) x (c - b)|`` vanishes there. Placing a
    ``1/r`` singularity at ``a`` leaves a smooth integrand.

    Returns
    -------
    QuadratureRule
    """
    g, w = gauss_legendre(n)
    g, w = 0.5 * (g + 1.0), 0.5 * w
    u, v = np.meshgrid(g, g, indexing="ij")
    wu = np.outer(w, w).ravel()
    u, v = u.ravel(), v.ravel()
    pts, wts = [], []
    for a, b, c in triangles:
        a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
        area2 = abs(_cross2(b - a, c - b))
        if area2 < 1e-13:
            continue
        pts.append(a + u[:, None] * (b - a) + (u * v)[:, None] * (c - b))
        wts.append(wu * u * area2)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), (n, n))


class Crack2D:
    """Polyline crack in the plane with its tip at the last vertex.

    Parameters
    ----------
    vertices : array_like, shape (n, 2)
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
            raise ArgumentError("a 2D crack needs at least two vertices (x, y)")
        seg = np.diff(v, axis=0)
        lens = np.linalg.norm(seg, axis=1)
        if np.any(lens == 0):
            raise ArgumentError("crack segments must have non-zero length")
        self.vertices = v
        self.tangents = seg / lens[:, None]
        self.normals = np.column_stack([-self.tangents[:, 1], self.tangents[:, 0]])
        self.tip = v[-1].copy()
        self.t = self.tangents[-1]
        self.n = self.normals[-1]
        # rows: local x (ahead of tip), local y (normal)
        self.rotation = np.vstack([self.t, self.n])

    dim = 2

    def _nearest_segment(self, x):
        x = np.atleast_2d(x)
        a = self.vertices[:-1]
        d = self.vertices[1:] - a
        rel = x[:, None, :] - a[None]
        s = np.clip(np.einsum("nsd,sd->ns", rel, d) / np.sum(d * d, axis=1), 0.0, 1.0)
        closest = a[None] + s[..., None] * d[None]
        dist = np.linalg.norm(x[:, None, :] - closest, axis=2)
        return np.argmin(dist, axis=1)

    def level_sets(self, x):
        """Normal (``phi``) and tangential (``psi``) level sets.

        ``phi`` is the signed distance to the line of the nearest segment,
        ``psi`` the coordinate along the tip tangent measured from the tip.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k = self._nearest_segment(x)
        phi = np.einsum("nd,nd->n", x - self.vertices[k], self.normals[k])
        psi = (x - self.tip) @ self.t
        return phi, psi

    def from_start(self, x):
        """Coordinate along the first segment measured from the crack mouth
        (negative before the crack starts)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.vertices[0]) @ self.tangents[0]

    def local(self, x):
        """Tip-frame coordinates, shape (n, 2)."""
        return (np.atleast_2d(x) - self.tip) @ self.rotation.T

    def length(self):
        return float(np.sum(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)))


class Crack3D:
    """Planar rectangular crack; the front is the edge from corner 2 to 3.

    Parameters
    ----------
    corners : array_like, shape (4, 3)
        Ordered around the rectangle.
    """

    dim = 3

    def __init__(self, corners):
        c = np.asarray(corners, dtype=float)
        if c.shape != (4, 3):
            raise ArgumentError("a 3D crack needs 4 corner points (x, y, z)")
        n = np.cross(c[1] - c[0], c[3] - c[0])
        if np.linalg.norm(n) == 0:
            raise ArgumentError("degenerate crack rectangle")
        self.corners = c
        self.n = n / np.linalg.norm(n)
        front = c[3] - c[2]
        self.front = front / np.linalg.norm(front)
        t = np.cross(self.front, self.n)
        # orient t away from the crack interior
        centre = c.mean(axis=0)
        if np.dot(c[2] - centre, t) < 0:
            t = -t
        self.t = t
        self.tip = c[2].copy()

    def level_sets(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.tip) @ self.n, (x - self.tip) @ self.t

    def from_start(self, x):
        """Coordinate along ``t`` measured from the back edge (corners 0-1)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x - self.corners[0]) @ self.t


def heaviside(phi, on_crack=0.0):
    """``+1`` where ``phi >= 0``, ``-1`` elsewhere.

    Points with ``phi == 0`` take ``+1``; pass ``on_crack`` to override
    that value (e.g. 0 for the average of both faces).
    """
    phi = np.asarray(phi, dtype=float)
    return np.where(phi > 0, 1.0, np.where(phi < 0, -1.0, 1.0 if on_crack is None else on_crack))


def polar_from_level_sets(phi, psi):
    """``r = sqrt(phi^2 + psi^2)``, ``theta = atan2(phi, psi)`` in (-pi, pi].

    Raises
    ------
    SingularPointError
        At the tip (r = 0).
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    r = np.hypot(phi, psi)
    if np.any(r == 0):
        raise SingularPointError("polar coordinates requested at the crack tip")
    theta = np.arctan2(phi, psi)
    theta = np.where(theta == -np.pi, np.pi, theta)
    return r, theta


def branch_functions(r, theta):
    """Tip branch functions and their polar derivatives.

    Returns
    -------
    B : ndarray, shape (n, 4)
        ``[sqrt(r) sin(t/2), sqrt(r) cos(t/2), sqrt(r) sin(t/2) sin t,
        sqrt(r) cos(t/2) sin t]``; only the first is discontinuous
        across the crack faces.
    dB : ndarray, shape (n, 4, 2)
        Derivatives with respect to local tip coordinates (x1, x2), where
        ``x1 = r cos(theta)``, ``x2 = r sin(theta)``.

    Raises
    ------
    SingularPointError
        ``r == 0``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(r <= 0):
        raise SingularPointError("branch functions are singular at r = 0")
    sr = np.sqrt(r)
    s2, c2 = np.sin(t / 2), np.cos(t / 2)
    st, ct = np.sin(t), np.cos(t)
    B = np.column_stack([sr * s2, sr * c2, sr * s2 * st, sr * c2 * st])
    # d/dr and d/dtheta
    dr = np.column_stack([s2, c2, s2 * st, c2 * st]) / (2 * sr[:, None])
    dt = sr[:, None] * np.column_stack([
        0.5 * c2,
        -0.5 * s2,
        0.5 * c2 * st + s2 * ct,
        -0.5 * s2 * st + c2 * ct,
    ])
    dB = np.empty(B.shape + (2,))
    dB[..., 0] = dr * ct[:, None] - dt * (st / r)[:, None]
    dB[..., 1] = dr * st[:, None] + dt * (ct / r)[:, None]
    return B, dB


def _branch_on_crack_average(r, theta, phi_zero):
    """Branch data; points on the crack face get the mean of both faces."""
    B, dB = branch_functions(r, theta)
    if np.any(phi_zero):
        Bm, dBm = branch_functions(r[phi_zero], -np.abs(theta[phi_zero]))
        Bp, dBp = branch_functions(r[phi_zero], np.abs(theta[phi_zero]))
        B[phi_zero] = 0.5 * (Bm + Bp)
        dB[phi_zero] = 0.5 * (dBm + dBp)
    return B, dB


@dataclass
class LevelSetField:
    """Level sets at visualization nodes.

    ``start`` is the distance along the crack from its mouth, so points on
    the crack line but before the crack begins can be told apart.
    """

    phi: np.ndarray
    psi: np.ndarray
    start: np.ndarray = None


def compute_level_sets(crack, vis):
    """Level sets at the vertices of the visualization mesh."""
    phi, psi = crack.level_sets(vis.nodes)
    return LevelSetField(phi, psi, crack.from_start(vis.nodes))


@dataclass
class EnrichmentState:
    """Tags and extra-function numbering.

    Attributes
    ----------
    tags : ndarray of int, shape (n_np,)
        ``NONE``, ``HEAVISIDE`` or ``TIP``.
    split_elems, tip_elems : ndarray of int
    heav_nodes, tip_nodes : ndarray of int
    heav_fid : dict
        Control point -> function id of its Heaviside function.
    tip_fid : dict
        Control point -> first of four consecutive branch function ids.
    n_fun : int
    """

    tags: np.ndarray
    split_elems: np.ndarray
    tip_elems: np.ndarray
    heav_nodes: np.ndarray = field(init=False)
    tip_nodes: np.ndarray = field(init=False)
    heav_fid: dict = field(init=False)
    tip_fid: dict = field(init=False)
    n_fun: int = field(init=False)

    def __post_init__(self):
        n = self.tags.size
        self.heav_nodes = np.flatnonzero(self.tags == HEAVISIDE)
        self.tip_nodes = np.flatnonzero(self.tags == TIP)
        self.heav_fid = {int(A): n + k for k, A in enumerate(self.heav_nodes)}
        base = n + self.heav_nodes.size
        self.tip_fid = {int(A): base + 4 * k for k, A in enumerate(self.tip_nodes)}
        self.n_fun = base + 4 * self.tip_nodes.size

    @property
    def n_np(self):
        return self.tags.size

    @property
    def enriched_elements(self):
        return np.union1d(self.split_elems, self.tip_elems)

    def extra_dofs(self, ncomp):
        return ncomp * (self.n_fun - self.n_np)


def select_enriched_nodes(mesh, vis, ls, tol=1e-12):
    """Tag control points of cut and tip elements.

    An element is cut when ``phi`` changes sign over its vis-cell corners,
    ``max(psi) < 0`` and the crack has started (``max(start) > 0``); it
    contains the tip when both ``phi`` and ``psi`` change sign. Control points of tip elements are tip enriched; a tip tag
    is never replaced by a Heaviside tag.

    Raises
    ------
    TopologyError
        A vis node lies on the crack surface, so sign changes cannot be
        resolved.
    """
    phi, psi = ls.phi, ls.psi
    start = np.full(phi.shape, np.inf) if ls.start is None else ls.start
    scale = np.ptp(vis.nodes, axis=0).max()
    on_face = (np.abs(phi) <= tol * scale) & (psi <= tol * scale) & (start >= -tol * scale)
    if np.any(on_face):
        k = int(np.flatnonzero(on_face)[0])
        raise TopologyError(
            f"visualization node {k} at {vis.nodes[k].tolist()} lies on the crack; "
            "shift the crack or change the mesh"
        )
    tags = np.zeros(mesh.n_np, dtype=np.int64)
    split, tip = [], []
    for e in range(mesh.n_el):
        c = vis.cells[e]
        ph, ps = phi[c], psi[c]
        if ph.max() * ph.min() < 0 and start[c].max() > 0:
            if ps.max() < 0:
                split.append(e)
                nodes = mesh.element[e]
                tags[nodes[tags[nodes] != TIP]] = HEAVISIDE
            elif ps.max() * ps.min() < 0:
                tip.append(e)
                tags[mesh.element[e]] = TIP
    return EnrichmentState(tags, np.array(split, dtype=np.int64), np.array(tip, dtype=np.int64))


class XigaModel:
    """Patch, mesh, material, crack and enrichment bundled together.

    Parameters
    ----------
    patch : NurbsPatch
    mesh : IgaMesh
    mat : Material
    crack : Crack2D or Crack3D or None
    enriched_order : int
        Gauss points per direction in cut and tip elements.
    """

    def __init__(self, patch, mesh, mat, crack=None, enriched_order=ENRICHED_QUAD, rule=None):
        self.patch = patch
        self.mesh = mesh
        self.mat = mat
        self.crack = crack
        self.ncomp = patch.dim_s
        self.rule = default_rule(patch) if rule is None else rule
        self.enriched_rule = gauss_rule([enriched_order] * patch.dim_p)
        self.vis = build_vis_mesh(mesh, patch)
        if crack is None:
            self.ls = None
            self.enr = EnrichmentState(np.zeros(mesh.n_np, dtype=np.int64),
                                       np.zeros(0, np.int64), np.zeros(0, np.int64))
        else:
            if crack.dim != patch.dim_s:
                raise ArgumentError("crack dimension does not match the patch")
            self.ls = compute_level_sets(crack, self.vis)
            self.enr = select_enriched_nodes(mesh, self.vis, self.ls)
        if crack is not None and crack.dim == 3:
            # level sets at control points, interpolated with R_I
            self.cp_phi, self.cp_psi = crack.level_sets(patch.points)
        tags = self.enr.tags[mesh.element]
        self.elem_enriched = np.any(tags != NONE, axis=1)
        self.elem_special = np.zeros(mesh.n_el, dtype=bool)
        self.elem_special[self.enr.enriched_elements] = True
        self._cells = {}
        self._tip_param = None
        if crack is not None and crack.dim == 2:
            try:
                self._tip_param = invert_point(patch, crack.tip)
            except (DomainError, ConvergenceError):
                self._tip_param = None

    @property
    def n_dof(self):
        return self.ncomp * self.enr.n_fun

    def rule_for(self, e):
        return self.enriched_rule if self.elem_special[e] else self.rule

    def _enrichment_fields(self, idx, x, R, dRdx, average):
        """H, B and dB/dx at physical points of one element.

        Points on the crack line get ``H = 0`` and, behind the tip, the
        mean of both face limits of the branch functions when ``average``.
        """
        crack = self.crack
        if crack.dim == 2:
            xl = crack.local(x)
            phi, psi = xl[:, 1], xl[:, 0]
            scale = max(1.0, np.abs(xl).max())
            grad_phi = np.broadcast_to(crack.n, x.shape)
            grad_psi = np.broadcast_to(crack.t, x.shape)
        else:
            phi = R @ self.cp_phi[idx]
            psi = R @ self.cp_psi[idx]
            scale = max(1.0, np.abs(x).max())
            grad_phi = np.einsum("qad,a->qd", dRdx, self.cp_phi[idx])
            grad_psi = np.einsum("qad,a->qd", dRdx, self.cp_psi[idx])
        on_line = np.abs(phi) <= 1e-12 * scale
        on_face = on_line & (psi < 0)
        if np.any(np.hypot(phi, psi) <= 1e-10 * scale):
            raise SingularPointError("evaluation point coincides with the crack tip")
        r, th = polar_from_level_sets(np.where(on_line, 0.0, phi), psi)
        if average:
            B, dBl = _branch_on_crack_average(r, th, on_face)
            H = np.where(on_line, 0.0, np.sign(phi))
        else:
            B, dBl = branch_functions(r, th)
            H = np.where(phi >= 0, 1.0, -1.0)
        # local (x1, x2) = (psi, phi)
        dB = dBl[..., 0:1] * grad_psi[:, None, :] + dBl[..., 1:2] * grad_phi[:, None, :]
        return H, B, dB, on_face

    def element_functions(self, e, params, order=1, on_crack_average=True, face_side=None):
        """All (standard and enriched) functions of element ``e``.

        Parameters
        ----------
        e : int
        params : ndarray, shape (n, d_p)
            Parametric points inside the element.
        face_side : {+1, -1, None}
            For points on the crack face, evaluate the limit from this side
            instead of averaging.

        Returns
        -------
        fids : ndarray, shape (n_f,)
        N : ndarray, shape (n, n_f)
        dN : ndarray, shape (n, n_f, d)
        x : ndarray, shape (n, d)
        """
        r = evaluate_in_elements(self.patch, self.mesh, np.array([e]), params[None], 1)
        idx = r["idx"][0]
        R, dRdx, x = r["R"][0], r["dRdx"][0], r["x"][0]
        tags = self.enr.tags[idx]
        fids = [idx]
        N = [R]
        dN = [dRdx]
        if self.crack is not None and np.any(tags != NONE):
            H, B, dB, on_face = self._enrichment_fields(
                idx, x, R, dRdx, on_crack_average and face_side is None
            )
            if face_side is not None and np.any(on_face):
                H = H.copy()
                H[on_face] = float(face_side)
                xs = x[on_face]
                if self.crack.dim == 2:
                    xl = self.crack.local(xs)
                    rr = np.hypot(xl[:, 0], xl[:, 1])
                    Bs, dBs = branch_functions(rr, np.full(rr.size, face_side * np.pi))
                    B[on_face] = Bs
                    dB[on_face] = np.einsum("nak,kj->naj", dBs, self.crack.rotation)
            la = np.flatnonzero(tags == HEAVISIDE)
            if la.size:
                fids.append(np.array([self.enr.heav_fid[int(A)] for A in idx[la]]))
                N.append(R[:, la] * H[:, None])
                dN.append(dRdx[:, la] * H[:, None, None])
            lb = np.flatnonzero(tags == TIP)
            if lb.size:
                base = np.array([self.enr.tip_fid[int(A)] for A in idx[lb]])
                fids.append((base[:, None] + np.arange(4)[None, :]).ravel())
                N.append((R[:, lb, None] * B[:, None, :]).reshape(R.shape[0], -1))
                d = dRdx[:, lb, None, :] * B[:, None, :, None] + R[:, lb, None, None] * dB[:, None, :, :]
                dN.append(d.reshape(R.shape[0], -1, dRdx.shape[-1]))
        return np.concatenate(fids), np.concatenate(N, axis=1), np.concatenate(dN, axis=1), x

    def element_points(self, e, rule):
        """Parametric points of ``rule`` in element ``e`` and the parent
        Jacobian determinant."""
        b = self.mesh.bounds(e)
        lo, hi = b[:, 0], b[:, 1]
        params = 0.5 * ((hi - lo) * rule.points + (hi + lo))
        return params, float(np.prod(0.5 * (hi - lo)))

    def _parent_to_x(self, e, parent):
        params, _ = self.element_points(e, QuadratureRule(np.atleast_2d(parent), None, ()))
        spans = np.repeat(self.mesh.spans[e][None], params.shape[0], axis=0)
        return self.patch.eval(params, spans)

    def _edge_crossings(self, e, n_sample=9):
        """Parent points where the element boundary crosses the crack.

        Returns a list of ``(edge, parent_point)``.
        """
        crack = self.crack
        out = []
        t = np.linspace(0.0, 1.0, n_sample)
        for k in range(4):
            a, b = _SQUARE[k], _SQUARE[(k + 1) % 4]
            edge = lambda s: a + np.multiply.outer(s, b - a)
            x = self._parent_to_x(e, edge(t))
            for j, (v0, tj) in enumerate(zip(crack.vertices[:-1], crack.tangents)):
                nj = crack.normals[j]
                seg_len = np.linalg.norm(crack.vertices[j + 1] - v0)
                f = (x - v0) @ nj
                for i in range(n_sample - 1):
                    if f[i] == 0.0 or f[i] * f[i + 1] < 0:
                        if f[i] == 0.0:
                            s0 = t[i]
                        else:
                            g = lambda s: float((self._parent_to_x(e, edge(np.array([s])))[0] - v0) @ nj)
                            s0 = brentq(g, t[i], t[i + 1], xtol=1e-14)
                        p = edge(s0)
                        along = float((self._parent_to_x(e, p)[0] - v0) @ tj)
                        tol = 1e-10 * seg_len
                        if -tol <= along <= seg_len + tol:
                            if not any(np.allclose(p, q, atol=1e-10) for _, q in out):
                                out.append((k, p))
        return out

    def subcell_rule(self, e, n):
        """Crack-conforming rule for a 2D element cut by or holding the
        crack tip, or ``None`` when the crack does not reach it.

        Cut elements are split along the crack into two polygons, each
        triangulated; tip elements are fanned from the tip so the Duffy
        collapse absorbs the ``1/r`` strain singularity.
        """
        key = (e, n)
        if key in self._cells:
            return self._cells[key]
        rule = None
        tip = None
        if self._tip_param is not None:
            b = self.mesh.bounds(e)
            tp = (2.0 * self._tip_param - (b[:, 0] + b[:, 1])) / (b[:, 1] - b[:, 0])
            if np.all(np.abs(tp) <= 1.0 + 1e-10):
                tip = tp
        cross = self._edge_crossings(e)
        if tip is not None:
            # boundary with the crack entry points inserted, fanned from the tip
            poly = []
            for k in range(4):
                poly.append(_SQUARE[k])
                hits = [p for kk, p in cross if kk == k]
                hits.sort(key=lambda p: np.linalg.norm(p - _SQUARE[k]))
                poly.extend(hits)
            tris = [(tip, poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly))]
            rule = duffy_rule(tris, n)
        elif len(cross) == 2 and cross[0][0] != cross[1][0]:
            (k0, p0), (k1, p1) = cross
            ring = []
            for k in range(4):
                ring.append(("c", _SQUARE[k]))
                if k == k0:
                    ring.append(("x", p0))
                if k == k1:
                    ring.append(("x", p1))
            i0 = next(i for i, (tag, _) in enumerate(ring) if tag == "x")
            ring = ring[i0:] + ring[:i0]
            i1 = next(i for i, (tag, _) in enumerate(ring) if tag == "x" and i > 0)
            left = [p for _, p in ring[: i1 + 1]]
            right = [p for _, p in ring[i1:]] + [ring[0][1]]
            tris = _ear_clip(left) + _ear_clip(right)
            rule = duffy_rule(tris, n)
        self._cells[key] = rule
        return rule

    def quadrature(self, e, rule=None):
        """Rule, points and parent determinant for element ``e``.

        2D elements cut by the crack or holding its tip use
        :meth:`subcell_rule` with the order of ``rule``. Otherwise, when a
        point of the rule falls on the crack tip or on the crack face the
        order is raised by one, so no point sees the averaged on-crack
        values (an even rule has no centre point).
        """
        rule = self.rule_for(e) if rule is None else rule
        if self.crack is not None and self.crack.dim == 2 and self.elem_special[e]:
            sub = self.subcell_rule(e, max(rule.orders))
            if sub is not None:
                return (sub,) + self.element_points(e, sub)
        params, detp = self.element_points(e, rule)
        if self.crack is not None and self.elem_enriched[e]:
            spans = np.repeat(self.mesh.spans[e][None], params.shape[0], axis=0)
            x = self.patch.eval(params, spans)
            phi, psi = self.crack.level_sets(x)
            tol = 1e-10 * max(np.ptp(x, axis=0).max(), 1.0)
            on_face = (np.abs(phi) <= tol) & (psi <= tol) & (self.crack.from_start(x) >= -tol)
            if np.any(np.hypot(phi, psi) <= tol) or np.any(on_face):
                rule = gauss_rule([n + 1 for n in rule.orders])
                params, detp = self.element_points(e, rule)
        return rule, params, detp

    def element_stiffness(self, e, D):
        rule, params, detp = self.quadrature(e)
        fids, N, dN, _ = self.element_functions(e, params)
        r = evaluate_in_elements(self.patch, self.mesh, np.array([e]), params[None], 1)
        wdet = rule.weights * np.abs(r["det"][0]) * detp
        B = strain_matrix(dN)
        DB = np.matmul(D, B) * wdet[:, None, None]
        Ke = np.einsum("qji,qjl->il", B, DB, optimize=True)
        return element_dofs(fids, self.ncomp), Ke

    def field(self, U, e, params, grad=True, **kw):
        """Displacement (and gradient) at points of element ``e``.

        Returns
        -------
        u : ndarray, shape (n, ncomp)
        gradu : ndarray, shape (n, ncomp, d)
            ``gradu[:, i, j] = du_i/dx_j``.
        x : ndarray, shape (n, d)
        """
        fids, N, dN, x = self.element_functions(e, params, **kw)
        Uf = U[element_dofs(fids, self.ncomp)].reshape(-1, self.ncomp)
        u = N @ Uf
        if not grad:
            return u, None, x
        gradu = np.einsum("qfj,fi->qij", dN, Uf)
        return u, gradu, x


def assemble_enriched(model):
    """Stiffness of the enriched elasticity problem.

    Elements without enriched functions go through the standard vectorized
    path; the rest are integrated element by element, cut and tip elements
    with the elevated Gauss rule.
    """
    patch, mesh = model.patch, model.mesh
    D = elasticity_D(model.mat)
    ncomp = model.ncomp
    n_dof = model.n_dof
    plain = np.flatnonzero(~model.elem_enriched)
    rows, cols, vals = [], [], []
    if plain.size:
        tab = tabulate(patch, mesh, model.rule, elements=plain)
        Ke = stiffness_from_table(tab, D)
        ed = element_dofs(tab.idx, ncomp)
        nd = ed.shape[1]
        rows.append(np.broadcast_to(ed[:, :, None], (ed.shape[0], nd, nd)).ravel())
        cols.append(np.broadcast_to(ed[:, None, :], (ed.shape[0], nd, nd)).ravel())
        vals.append(Ke.ravel())
    for e in np.flatnonzero(model.elem_enriched):
        ed, Ke = model.element_stiffness(int(e), D)
        nd = ed.size
        rows.append(np.repeat(ed, nd))
        cols.append(np.tile(ed, nd))
        vals.append(Ke.ravel())
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_dof, n_dof)
    ).tocsr()
    K.sum_duplicates()
    info = {
        "problem": "xiga",
        "n_heaviside": int(model.enr.heav_nodes.size),
        "n_tip": int(model.enr.tip_nodes.size),
    }
    return AssembledSystem(K, np.zeros(n_dof), ncomp, patch.n_points, info=info)


# exact fields

def _mode_I_disp(K, mat, r, th):
    mu, kappa = mat.mu, mat.kappa
    f = K / (2 * mu) * np.sqrt(r / (2 * np.pi)) * (kappa - np.cos(th))
    return np.column_stack([f * np.cos(th / 2), f * np.sin(th / 2)])


def _mode_I_stress(K, r, th):
    f = K / np.sqrt(2 * np.pi * r)
    s2, c2 = np.sin(th / 2), np.cos(th / 2)
    s32, c32 = np.sin(1.5 * th), np.cos(1.5 * th)
    return np.column_stack([
        f * c2 * (1 - s2 * s32),
        f * c2 * (1 + s2 * s32),
        f * s2 * c2 * c32,
    ])


def exact_griffith(x, crack, mat, sigma, a=None, stress=False):
    """Mode I near-tip fields with ``K = sigma sqrt(pi a)``.

    Parameters
    ----------
    x : ndarray, shape (n, 2)
    crack : Crack2D
    mat : Material
        Plane strain or plane stress (through the Kolosov constant).
    sigma : float
    a : float, optional
        Half crack length for ``K``; defaults to the crack length.
    stress : bool
        Also return global stresses (xx, yy, xy).

    Returns
    -------
    u : ndarray, shape (n, 2)
    s : ndarray, shape (n, 3)
        Only when ``stress``.
    """
    a = crack.length() if a is None else a
    K = sigma * np.sqrt(np.pi * a)
    xl = crack.local(x)
    r, th = polar_from_level_sets(xl[:, 1], xl[:, 0])
    ul = _mode_I_disp(K, mat, r, th)
    Rm = crack.rotation
    u = ul @ Rm
    if not stress:
        return u
    sl = _mode_I_stress(K, r, th)
    S = np.zeros((len(r), 2, 2))
    S[:, 0, 0], S[:, 1, 1] = sl[:, 0], sl[:, 1]
    S[:, 0, 1] = S[:, 1, 0] = sl[:, 2]
    Sg = np.einsum("ki,nkl,lj->nij", Rm, S, Rm)
    return u, np.column_stack([Sg[:, 0, 0], Sg[:, 1, 1], Sg[:, 0, 1]])


def exact_mode_I_3d(x, crack, mat, sigma, a, stress=False):
    """Plane-strain mode I field around a straight crack front in 3D.

    ``u_y`` (along the front) is identically zero.

    Returns
    -------
    u : ndarray, shape (n, 3)
    s : ndarray, shape (n, 6)
        Voigt (xx, yy, zz, xy, yz, zx), only when ``stress``.
    """
    phi, psi = crack.level_sets(x)
    r, th = polar_from_level_sets(phi, psi)
    K = sigma * np.sqrt(np.pi * a)
    E, nu = mat.E, mat.nu
    c = 2 * (1 + nu) / np.sqrt(2 * np.pi) * K / E * np.sqrt(r) * (2 - 2 * nu - np.cos(th / 2) ** 2)
    ut, un = c * np.cos(th / 2), c * np.sin(th / 2)
    u = ut[:, None] * crack.t[None] + un[:, None] * crack.n[None]
    if not stress:
        return u
    sl = _mode_I_stress(K, r, th)
    s_tt, s_nn, s_tn = sl[:, 0], sl[:, 1], sl[:, 2]
    s_ff = nu * (s_tt + s_nn)
    t, n, f = crack.t, crack.n, crack.front
    S = (
        s_tt[:, None, None] * np.outer(t, t)
        + s_nn[:, None, None] * np.outer(n, n)
        + s_tn[:, None, None] * (np.outer(t, n) + np.outer(n, t))
        + s_ff[:, None, None] * np.outer(f, f)
    )
    return u, np.column_stack([S[:, 0, 0], S[:, 1, 1], S[:, 2, 2], S[:, 0, 1], S[:, 1, 2], S[:, 2, 0]])


# interaction integral

def _aux_mode_I(mat, r, th):
    """Auxiliary mode I fields (K = 1) in tip coordinates.

    Returns stress (n, 2, 2) and displacement gradient (n, 2, 2) with
    ``g[:, i, j] = du_i/dx_j``.
    """
    mu, kappa = mat.mu, mat.kappa
    A = 1.0 / (2 * mu * np.sqrt(2 * np.pi))
    sr = np.sqrt(r)
    c2, s2 = np.cos(th / 2), np.sin(th / 2)
    ct, st = np.cos(th), np.sin(th)
    f1 = c2 * (kappa - ct)
    f2 = s2 * (kappa - ct)
    df1 = -0.5 * s2 * (kappa - ct) + c2 * st
    df2 = 0.5 * c2 * (kappa - ct) + s2 * st
    du_dr = np.stack([A * f1 / (2 * sr), A * f2 / (2 * sr)], axis=1)
    du_dt = np.stack([A * sr * df1, A * sr * df2], axis=1)
    g = np.empty((r.size, 2, 2))
    g[:, :, 0] = du_dr * ct[:, None] - du_dt * (st / r)[:, None]
    g[:, :, 1] = du_dr * st[:, None] + du_dt * (ct / r)[:, None]
    s = _mode_I_stress(1.0, r, th)
    S = np.empty((r.size, 2, 2))
    S[:, 0, 0], S[:, 1, 1] = s[:, 0], s[:, 1]
    S[:, 0, 1] = S[:, 1, 0] = s[:, 2]
    return S, g


@dataclass
class SifResult:
    """Interaction-integral output."""

    K_I: float
    interaction: float
    radius: float
    n_elements: int


def _q4_shape(xt):
    """Bilinear Q4 shapes on [-1, 1]^2 in VTK corner order and their
    parent derivatives."""
    s, t = xt[:, 0], xt[:, 1]
    xs = np.array([-1, 1, 1, -1])
    ys = np.array([-1, -1, 1, 1])
    N = 0.25 * (1 + s[:, None] * xs) * (1 + t[:, None] * ys)
    dN = np.stack([
        0.25 * xs * (1 + t[:, None] * ys),
        0.25 * ys * (1 + s[:, None] * xs),
    ], axis=-1)
    return N, dN


def sif_interaction_integral(model, U, rd=2.0, order=None):
    """Mode I stress intensity factor from the domain interaction integral.

    The weight ``q`` is 1 at visualization nodes within ``rd * h_tip`` of
    the tip (``h_tip`` = square root of the tip element area) and 0
    elsewhere, interpolated bilinearly on each vis cell.

    Parameters
    ----------
    model : XigaModel
        2D model with a crack.
    U : ndarray
        Solution vector.
    rd : float
        Domain radius factor.
    order : int, optional
        Gauss points per direction in non-enriched ring elements
        (default p + 3).

    Raises
    ------
    ArgumentError
        The q = 1 region reaches the patch boundary.
    """
    crack = model.crack
    if crack is None or crack.dim != 2:
        raise ArgumentError("SIF extraction needs a 2D cracked model")
    mat = model.mat
    vis = model.vis
    D = elasticity_D(mat)
    if model.enr.tip_elems.size == 0:
        raise ArgumentError("no tip element found; the crack tip is outside the mesh")
    te = int(model.enr.tip_elems[0])
    cn = vis.nodes[vis.cells[te]]
    area = 0.5 * abs(_cross2(cn[2] - cn[0], cn[3] - cn[1]))
    radius = rd * np.sqrt(area)
    q = (np.linalg.norm(vis.nodes - crack.tip, axis=1) < radius).astype(float)
    # boundary vis nodes
    shape = vis.shape
    grid = np.arange(vis.n_nodes).reshape(shape[::-1])
    bnd = np.unique(np.concatenate([grid[0], grid[-1], grid[:, 0], grid[:, -1]]))
    if np.any(q[bnd] > 0):
        raise ArgumentError(
            f"interaction-integral domain (radius {radius:.4g}) reaches the patch boundary; "
            "reduce rd or refine the mesh"
        )
    qc = q[vis.cells]
    ring = np.flatnonzero((qc.max(axis=1) > 0) & (qc.min(axis=1) < 1))
    order = max(model.patch.degrees) + 3 if order is None else order
    plain_rule = gauss_rule([order] * 2)
    Rm = crack.rotation
    total = 0.0
    for e in ring:
        rule = model.enriched_rule if model.elem_special[e] else plain_rule
        rule, params, detp = model.quadrature(int(e), rule)
        u, gradu, x = model.field(U, int(e), params)
        r = evaluate_in_elements(model.patch, model.mesh, np.array([e]), params[None], 1)
        J = r["J"][0]
        det = np.abs(r["det"][0])
        b = model.mesh.bounds(int(e))
        half = 0.5 * (b[:, 1] - b[:, 0])
        # q gradient: dq/dx = (dx/dxt)^-T dq/dxt with dx/dxt = J diag(half)
        _, dNq = _q4_shape(rule.points)
        dq_dxt = np.einsum("qak,a->qk", dNq, qc[e])
        Jt = J * half[None, None, :]
        dq = np.linalg.solve(np.transpose(Jt, (0, 2, 1)), dq_dxt[..., None])[..., 0]
        # numerical stress (global), then rotate to tip frame
        eps = np.stack([gradu[:, 0, 0], gradu[:, 1, 1], gradu[:, 0, 1] + gradu[:, 1, 0]], 1)
        sv = eps @ D.T
        S = np.empty((len(sv), 2, 2))
        S[:, 0, 0], S[:, 1, 1] = sv[:, 0], sv[:, 1]
        S[:, 0, 1] = S[:, 1, 0] = sv[:, 2]
        Sl = np.einsum("ik,nkl,jl->nij", Rm, S, Rm)
        gl = np.einsum("ik,nkl,jl->nij", Rm, gradu, Rm)
        dql = dq @ Rm.T
        xl = crack.local(x)
        rr, th = polar_from_level_sets(xl[:, 1], xl[:, 0])
        Sa, ga = _aux_mode_I(mat, rr, th)
        epsa = 0.5 * (ga + np.transpose(ga, (0, 2, 1)))
        W12 = np.einsum("nij,nij->n", Sl, epsa)
        integrand = (
            np.einsum("nij,ni,nj->n", Sl, ga[:, :, 0], dql)
            + np.einsum("nij,ni,nj->n", Sa, gl[:, :, 0], dql)
            - W12 * dql[:, 0]
        )
        total += float(np.sum(integrand * rule.weights * det * detp))
    K_I = total * mat.E_star / 2.0
    return SifResult(K_I, total, float(radius), int(ring.size))


# crack visualization

def displacement_jump(model, U, e, params):
    """``[[u]] = 2 sum_J R_J a_J + 2 sqrt(r) sum_K R_K b_K^1`` at points of
    element ``e`` (2D)."""
    r = evaluate_in_elements(model.patch, model.mesh, np.array([e]), params[None], 0)
    idx, R, x = r["idx"][0], r["R"][0], r["x"][0]
    nc = model.ncomp
    jump = np.zeros((R.shape[0], nc))
    tags = model.enr.tags[idx]
    for a in np.flatnonzero(tags == HEAVISIDE):
        f = model.enr.heav_fid[int(idx[a])]
        jump += 2 * R[:, a, None] * U[nc * f + np.arange(nc)][None]
    lb = np.flatnonzero(tags == TIP)
    if lb.size:
        xl = model.crack.local(x)
        rr = np.hypot(xl[:, 0], xl[:, 1])
        for a in lb:
            f = model.enr.tip_fid[int(idx[a])]
            jump += 2 * np.sqrt(rr)[:, None] * R[:, a, None] * U[nc * f + np.arange(nc)][None]
    return jump


@dataclass
class CrackedVisMesh:
    """Visualization mesh with doubled nodes along the crack."""

    nodes: np.ndarray
    cells: np.ndarray
    displacement: np.ndarray
    stress: np.ndarray
    jump_nodes: np.ndarray
    jump: np.ndarray
    cell_type: int = 9


def _stress_at(model, U, e, params, D, **kw):
    _, g, x = model.field(U, e, params, **kw)
    eps = np.stack([g[:, 0, 0], g[:, 1, 1], g[:, 0, 1] + g[:, 1, 0]], 1)
    return eps @ D.T


def cracked_vis_mesh(model, U):
    """Split cut vis cells along the crack and attach one-sided values.

    Cells whose corners see a sign change of ``phi`` (split and tip cells)
    are divided into two quads by the segment joining the crack's
    intersections with the two crossed edges. Intersection points behind
    the tip are doubled (upper and lower face values); on the tip cell the
    point ahead of the tip is shared. Stresses on crack faces are set to
    zero; stresses at the new nodes of tip cells are interpolated from the
    cell corners.
    """
    if model.crack is None or model.crack.dim != 2:
        raise ArgumentError("cracked visualization is available for 2D cracks")
    vis, mesh = model.vis, model.mesh
    D = elasticity_D(model.mat)
    n0 = vis.n_nodes
    disp = np.zeros((n0, 2))
    stress = np.zeros((n0, 3))
    count = np.zeros(n0)
    cells = []
    jump_nodes, jumps = [], []
    phi = model.ls.phi
    cut = set(model.enr.split_elems.tolist()) | set(model.enr.tip_elems.tolist())
    xs = np.array([-1.0, 1.0, 1.0, -1.0])
    ys = np.array([-1.0, -1.0, 1.0, 1.0])
    corners_xt = np.column_stack([xs, ys])
    new_nodes, new_disp, new_stress = [], [], []
    edge_nodes = {}

    def add(x, u, s):
        new_nodes.append(x)
        new_disp.append(u)
        new_stress.append(s)
        return n0 + len(new_nodes) - 1

    for e in range(mesh.n_el):
        c = vis.cells[e]
        b = mesh.bounds(e)
        lo, hi = b[:, 0], b[:, 1]
        cpar = 0.5 * ((hi - lo) * corners_xt + (hi + lo))
        u, _, _ = model.field(U, e, cpar, grad=False)
        s = _stress_at(model, U, e, cpar, D)
        disp[c] += u
        stress[c] += s
        count[c] += 1
        if e not in cut:
            cells.append(c)
            continue
        ph = phi[c]
        # crossed edges (k, k+1)
        crossed = [k for k in range(4) if ph[k] * ph[(k + 1) % 4] < 0]
        if len(crossed) != 2 or (crossed[1] - crossed[0]) % 2:
            cells.append(c)
            continue
        pts_xt = []
        for k in crossed:
            k2 = (k + 1) % 4
            t = ph[k] / (ph[k] - ph[k2])
            pts_xt.append(corners_xt[k] + t * (corners_xt[k2] - corners_xt[k]))
        pts_xt = np.array(pts_xt)
        ppar = 0.5 * ((hi - lo) * pts_xt + (hi + lo))
        xpts = model.patch.eval(ppar, np.repeat(mesh.spans[e][None], 2, axis=0))
        _, ps = model.crack.level_sets(xpts)
        ids_up, ids_lo = [], []
        for j in range(2):
            k = crossed[j]
            key = (min(c[k], c[(k + 1) % 4]), max(c[k], c[(k + 1) % 4]))
            if key in edge_nodes:
                iu, il = edge_nodes[key]
                ids_up.append(iu)
                ids_lo.append(il)
                continue
            pj = ppar[j:j + 1]
            if ps[j] < 0:
                uu, _, _ = model.field(U, e, pj, grad=False, face_side=+1)
                ul, _, _ = model.field(U, e, pj, grad=False, face_side=-1)
                iu = add(xpts[j], uu[0], np.zeros(3))
                il = add(xpts[j], ul[0], np.zeros(3))
                jump_nodes.append((iu, il))
                jumps.append(uu[0] - ul[0])
            else:
                uu, _, _ = model.field(U, e, pj, grad=False)
                Nq, _ = _q4_shape(pts_xt[j:j + 1])
                sq = Nq @ s
                iu = il = add(xpts[j], uu[0], sq[0])
            edge_nodes[key] = (iu, il)
            ids_up.append(iu)
            ids_lo.append(il)
        k0, k1 = crossed
        # walk the quad: corners after k0 up to k1 lie on one side
        side_a = [c[(k0 + 1 + i) % 4] for i in range((k1 - k0) % 4)]
        side_b = [c[(k1 + 1 + i) % 4] for i in range((k0 - k1) % 4)]
        up_first = ph[(k0 + 1) % 4] > 0
        pa = (ids_up if up_first else ids_lo)
        pb = (ids_lo if up_first else ids_up)
        cells.append([pa[0]] + side_a + [pa[1]])
        cells.append([pb[1]] + side_b + [pb[0]])
    disp /= count[:, None]
    stress /= count[:, None]
    if new_nodes:
        allnodes = np.vstack([vis.nodes, np.array(new_nodes)])
        alldisp = np.vstack([disp, np.array(new_disp)])
        allstress = np.vstack([stress, np.array(new_stress)])
    else:
        allnodes, alldisp, allstress = vis.nodes, disp, stress
    return CrackedVisMesh(
        nodes=allnodes,
        cells=np.array(cells, dtype=np.int64),
        displacement=alldisp,
        stress=allstress,
        jump_nodes=np.array(jump_nodes, dtype=np.int64).reshape(-1, 2),
        jump=np.array(jumps).reshape(-1, 2),
    )


def enriched_vis_fields(model, U):
    """Displacement and stress at the (uncut) visualization nodes.

    Each cell evaluates its corners from inside its element. Stresses use
    Voigt order (xx, yy, xy) in 2D and (xx, yy, zz, xy, yz, zx) in 3D.

    Returns
    -------
    disp : ndarray, shape (n_nodes, ncomp)
    stress : ndarray, shape (n_nodes, 3 or 6)
    """
    vis = model.vis
    D = elasticity_D(model.mat)
    nc = model.ncomp
    disp = np.zeros((vis.n_nodes, nc))
    stress = np.zeros((vis.n_nodes, D.shape[0]))
    for e in range(model.mesh.n_el):
        c = vis.cells[e]
        u, g, _ = model.field(U, e, vis.params[c])
        if nc == 2:
            eps = np.stack([g[:, 0, 0], g[:, 1, 1], g[:, 0, 1] + g[:, 1, 0]], 1)
        else:
            eps = np.stack([
                g[:, 0, 0], g[:, 1, 1], g[:, 2, 2],
                g[:, 0, 1] + g[:, 1, 0], g[:, 1, 2] + g[:, 2, 1], g[:, 2, 0] + g[:, 0, 2],
            ], 1)
        disp[c] = u
        stress[c] = eps @ D.T
    return disp, stress
