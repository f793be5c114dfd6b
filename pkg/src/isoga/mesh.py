"""Element connectivity, boundary sub-meshes and visualization meshes.

Indices are 0-based throughout; :meth:`IgaMesh.dump` prints the 1-based
form used in hand-written connectivity tables.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError
from .spline import NurbsPatch

__all__ = [
    "IgaMesh",
    "BoundaryMesh",
    "VisualizationMesh",
    "FACE_IDS",
    "build_connectivity",
    "generate_mesh",
    "extract_boundary",
    "build_vis_mesh",
    "face_nodes",
]

FACE_IDS = ("xi0", "xi1", "eta0", "eta1", "zeta0", "zeta1")


def build_connectivity(kv):
    """Per-direction element ranges and connectivity.

    Parameters
    ----------
    kv : KnotVector
        Open knot vector.

    Returns
    -------
    el_range : ndarray, shape (n_el, 2)
        Parametric bounds of each non-degenerate span.
    el_conn : ndarray of int64, shape (n_el, p + 1)
        Indices of the functions active on each span.
    """
    kv.check_open()
    spans = kv.element_spans()
    k = kv.knots
    el_range = np.column_stack([k[spans], k[spans + 1]])
    el_conn = spans[:, None] - kv.degree + np.arange(kv.degree + 1)[None, :]
    return el_range, el_conn.astype(np.int64)


@dataclass(frozen=True)
class IgaMesh:
    """Tensor-product element structure of a patch.

    Attributes
    ----------
    element : ndarray, shape (n_el, n_en)
        Global control-point indices per element, local order x-fastest.
    el_range : tuple of ndarray
        Per direction, ``(n_dir_el, 2)`` parametric bounds.
    index : ndarray, shape (n_el, d_p)
        Per-direction element index of each element.
    spans : ndarray, shape (n_el, d_p)
        Knot-span index of each element per direction.
    n_np : int
        Number of control points.
    """

    element: np.ndarray
    el_range: tuple
    index: np.ndarray
    spans: np.ndarray
    n_np: int
    shape: tuple = field(default=())

    @property
    def n_el(self):
        return self.element.shape[0]

    @property
    def n_en(self):
        return self.element.shape[1]

    @property
    def dim_p(self):
        return self.index.shape[1]

    def bounds(self, e):
        """``(d_p, 2)`` parametric box of element ``e``."""
        return np.array([self.el_range[d][self.index[e, d]] for d in range(self.dim_p)])

    def all_bounds(self):
        """``(n_el, d_p, 2)`` parametric boxes of all elements."""
        return np.stack(
            [self.el_range[d][self.index[:, d]] for d in range(self.dim_p)], axis=1
        )

    def dump(self):
        """Text table of 1-based connectivity and element ranges."""
        lines = ["element (1-based):"]
        for row in self.element + 1:
            lines.append("  " + " ".join(str(v) for v in row))
        for d, r in enumerate(self.el_range):
            lines.append(f"elRange[{d}]:")
            for lo, hi in r:
                lines.append(f"  {lo:g} {hi:g}")
        return "\n".join(lines)


def generate_mesh(patch):
    """Build the :class:`IgaMesh` of a patch (elements numbered x-fastest)."""
    ranges, conns, spans = [], [], []
    for kv in patch.knot_vectors:
        r, c = build_connectivity(kv)
        ranges.append(r)
        conns.append(c)
        spans.append(kv.element_spans())
    counts = [c.shape[0] for c in conns]
    grids = np.meshgrid(*[np.arange(n) for n in counts[::-1]], indexing="ij")
    index = np.column_stack([g.ravel() for g in grids[::-1]])
    n_el = index.shape[0]
    element = None
    stride = 1
    for d, kv in enumerate(patch.knot_vectors):
        loc = conns[d][index[:, d]] * stride
        element = loc if element is None else (loc[:, :, None] + element[:, None, :]).reshape(n_el, -1)
        stride *= kv.n
    sp = np.column_stack([spans[d][index[:, d]] for d in range(patch.dim_p)])
    return IgaMesh(
        element=element.astype(np.int64),
        el_range=tuple(ranges),
        index=index.astype(np.int64),
        spans=sp.astype(np.int64),
        n_np=patch.n_points,
        shape=tuple(counts),
    )


def _parse_face(face, dim_p):
    if face not in FACE_IDS:
        raise ArgumentError(f"unknown face id {face!r}; expected one of {FACE_IDS[:2 * dim_p]}")
    d = FACE_IDS.index(face) // 2
    if d >= dim_p:
        raise ArgumentError(f"face {face!r} invalid for a {dim_p}-parameter patch")
    return d, int(face[-1])


def face_nodes(patch, face):
    """Global indices of control points on a face, ordered x-fastest over
    the remaining directions."""
    d, side = _parse_face(face, patch.dim_p)
    ids = np.arange(patch.n_points).reshape(patch.dims[::-1])
    axis = patch.dim_p - 1 - d
    sl = [slice(None)] * patch.dim_p
    sl[axis] = 0 if side == 0 else patch.dims[d] - 1
    return ids[tuple(sl)].ravel()


@dataclass(frozen=True)
class BoundaryMesh:
    """Lower-dimensional mesh on one patch face.

    Attributes
    ----------
    face : str
    direction, side : int
        The face is ``xi_direction = lo`` (side 0) or ``hi`` (side 1).
    value : float
        Fixed parameter value on the face.
    patch : NurbsPatch or None
        Face geometry; None for the end points of a curve.
    mesh : IgaMesh or None
    nodes : ndarray
        Boundary-local to global control-point map.
    """

    face: str
    direction: int
    side: int
    value: float
    patch: NurbsPatch
    mesh: IgaMesh
    nodes: np.ndarray

    def embed(self, bparams):
        """Full-patch parameters of boundary parameters, shape (npts, d_p)."""
        bparams = np.atleast_2d(bparams)
        cols = list(bparams.T)
        cols.insert(self.direction, np.full(bparams.shape[0], self.value))
        return np.column_stack(cols)

    def global_elements(self):
        """Boundary element connectivity in global indices."""
        return self.nodes[self.mesh.element]


def extract_boundary(mesh, patch, face):
    """Boundary sub-mesh for ``face`` in ``xi0, xi1, eta0, eta1, zeta0, zeta1``.

    Raises
    ------
    ArgumentError
        Invalid face id for this patch.
    """
    d, side = _parse_face(face, patch.dim_p)
    kv = patch.knot_vectors[d]
    value = kv.lo if side == 0 else kv.hi
    nodes = face_nodes(patch, face)
    if patch.dim_p == 1:
        return BoundaryMesh(face, d, side, value, None, None, nodes)
    kvs = [k for i, k in enumerate(patch.knot_vectors) if i != d]
    bpatch = NurbsPatch(kvs, patch.points[nodes], patch.weights[nodes])
    return BoundaryMesh(face, d, side, value, bpatch, generate_mesh(bpatch), nodes)


@dataclass(frozen=True)
class VisualizationMesh:
    """Linear cells through the images of the knot grid.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, d_s)
    params : ndarray, shape (n_nodes, d_p)
        Parametric coordinates of the nodes.
    cells : ndarray, shape (n_el, 2**d_p)
        VTK-ordered connectivity (line, quad or hexahedron).
    cell_type : int
        VTK cell type id.
    shape : tuple
        Node counts per direction.
    """

    nodes: np.ndarray
    params: np.ndarray
    cells: np.ndarray
    cell_type: int
    shape: tuple

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    def cell_param_corners(self):
        """Parametric corner coordinates of each cell, ``(n_el, 2**d_p, d_p)``."""
        return self.params[self.cells]


_VTK_CELL = {1: 3, 2: 9, 3: 12}


def _vis_cells(shape):
    dp = len(shape)
    ids = np.arange(int(np.prod(shape))).reshape(shape[::-1])
    if dp == 1:
        return np.column_stack([ids[:-1], ids[1:]])
    if dp == 2:
        a = ids[:-1, :-1].ravel()
        b = ids[:-1, 1:].ravel()
        c = ids[1:, 1:].ravel()
        d = ids[1:, :-1].ravel()
        return np.column_stack([a, b, c, d])
    corners = []
    for kk in (0, 1):
        for jj, ii in ((0, 0), (0, 1), (1, 1), (1, 0)):
            corners.append(
                ids[kk:ids.shape[0] - 1 + kk, jj:ids.shape[1] - 1 + jj, ii:ids.shape[2] - 1 + ii].ravel()
            )
    return np.column_stack(corners)


def build_vis_mesh(mesh, patch):
    """Q4 (2D), brick (3D) or line (1D) mesh through the knot-grid images.

    Node and cell numbering are x-fastest, so cell ``e`` covers IGA
    element ``e``.
    """
    breaks = [kv.breaks for kv in patch.knot_vectors]
    shape = tuple(b.size for b in breaks)
    grids = np.meshgrid(*breaks[::-1], indexing="ij")
    params = np.column_stack([g.ravel() for g in grids[::-1]])
    nodes = patch.eval(params)
    cells = _vis_cells(shape)
    if cells.shape[0] != mesh.n_el:
        raise ArgumentError("visualization mesh does not match the IGA mesh")
    return VisualizationMesh(nodes, params, cells.astype(np.int64), _VTK_CELL[patch.dim_p], shape)
