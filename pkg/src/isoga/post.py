"""Field recovery on the visualization mesh, error norms and file output."""
import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .assembly import Material, elasticity_D, strain_matrix
from .errors import ArgumentError, IOFailure, SingularGeometryError
from .plate import PlateMaterial, curvature_matrix
from .quadrature import evaluate_in_elements, gauss_rule, tabulate
from .spline import NurbsPatch

__all__ = [
    "ResultBundle",
    "SHIFT",
    "recover_fields",
    "stress_names",
    "write_vtk",
    "write_bundle",
    "error_norms",
    "METRIC_HEADER",
    "write_metrics",
    "save_patch",
    "load_patch",
]

SHIFT = 1e-6
METRIC_HEADER = ("case", "mesh", "p", "dofs", "metric", "value", "ref", "rel_error")
_FMT = ".16e"


@dataclass
class ResultBundle:
    """Nodal results on a visualization mesh.

    Attributes
    ----------
    nodes : ndarray, shape (n, d_s)
    cells : ndarray, shape (n_cells, n_corners)
    cell_type : int
    shape : tuple or None
        Node counts per direction for structured output.
    displacement : ndarray, shape (n, ncomp)
    stress : ndarray, shape (n, n_stress)
    cell_stress : ndarray, shape (n_cells, n_corners, n_stress)
        Values seen from inside each cell (before sharing at nodes).
    metrics : dict
    """

    nodes: np.ndarray
    cells: np.ndarray
    cell_type: int
    shape: tuple
    displacement: np.ndarray
    stress: np.ndarray
    cell_stress: np.ndarray = None
    metrics: dict = field(default_factory=dict)


def stress_names(n):
    return {
        1: ["flux"],
        3: ["xx", "yy", "xy"],
        6: ["xx", "yy", "zz", "xy", "yz", "zx"],
    }[n]


def _corner_data(patch, mesh, params, order):
    """Evaluate at cell corners, shifting points off singular corners."""
    elements = np.arange(mesh.n_el)
    try:
        return evaluate_in_elements(patch, mesh, elements, params, order)
    except SingularGeometryError:
        pass
    # move every corner of the failing elements slightly inside
    out = None
    for e in elements:
        pe = params[e:e + 1]
        try:
            r = evaluate_in_elements(patch, mesh, np.array([e]), pe, order)
        except SingularGeometryError:
            b = mesh.bounds(e)
            centre = b.mean(axis=1)
            span = b[:, 1] - b[:, 0]
            pe = pe + SHIFT * span * np.sign(centre - pe)
            r = evaluate_in_elements(patch, mesh, np.array([e]), pe, order)
        if out is None:
            out = {k: [] for k in r}
        for k, v in r.items():
            out[k].append(v)
    return {k: np.concatenate(v) for k, v in out.items()}


def recover_fields(patch, mesh, vis, u, mat=None):
    """Displacement and stress at the visualization nodes.

    Each cell evaluates its own corners from inside its element; a node
    shared by several cells takes the value of the last one (the fields
    are continuous for p >= 2, so no averaging is needed).

    Parameters
    ----------
    u : ndarray
        Control variables, ``ncomp * n_np`` (extra dofs ignored).
    mat : Material, PlateMaterial or None
        Elastic stresses, plate moments, or the plain gradient (flux) for
        scalar problems.

    Returns
    -------
    ResultBundle
    """
    n = patch.n_points
    u = np.asarray(u, dtype=float)
    ncomp = 1 if mat is None or isinstance(mat, PlateMaterial) else patch.dim_s
    U = u[: ncomp * n].reshape(n, ncomp)
    params = vis.params[vis.cells]
    order = 2 if isinstance(mat, PlateMaterial) else 1
    r = _corner_data(patch, mesh, params, order)
    Ue = U[r["idx"]]  # (ne, nen, ncomp)
    disp = np.einsum("eqa,eac->eqc", r["R"], Ue)
    if isinstance(mat, Material):
        B = strain_matrix(r["dRdx"])
        eps = np.einsum("eqsk,ek->eqs", B, Ue.reshape(Ue.shape[0], -1))
        sig = eps @ elasticity_D(mat).T
    elif isinstance(mat, PlateMaterial):
        kappa = np.einsum("eqsa,ea->eqs", curvature_matrix(r["d2Rdx"]), Ue[..., 0])
        sig = -kappa @ mat.D.T
    elif mat is None:
        sig = np.einsum("eqad,ea->eqd", r["dRdx"], Ue[..., 0])
    else:
        raise ArgumentError(f"unsupported material {type(mat).__name__}")
    nn = vis.n_nodes
    D = np.zeros((nn, ncomp))
    S = np.zeros((nn, sig.shape[-1]))
    D[vis.cells.ravel()] = disp.reshape(-1, ncomp)
    S[vis.cells.ravel()] = sig.reshape(-1, sig.shape[-1])
    return ResultBundle(vis.nodes, vis.cells, vis.cell_type, vis.shape, D, S, sig)


# VTK

def _f(v):
    return format(float(v), _FMT)


def _pad3(nodes):
    nodes = np.asarray(nodes, dtype=float)
    out = np.zeros((nodes.shape[0], 3))
    out[:, : nodes.shape[1]] = nodes
    return out


def _as_point_array(name, a):
    """2D displacements are padded to three components for VTK vectors."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if name == "displacement" and a.shape[1] == 2:
        a = _pad3(a)
    return a


def _legacy(nodes, cells, cell_type, data):
    lines = ["# vtk DataFile Version 3.0", "isoga results", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    P = _pad3(nodes)
    lines.append(f"POINTS {P.shape[0]} double")
    lines += [" ".join(_f(v) for v in p) for p in P]
    nc, k = cells.shape
    lines.append(f"CELLS {nc} {nc * (k + 1)}")
    lines += [" ".join(str(int(i)) for i in (k, *c)) for c in cells]
    lines.append(f"CELL_TYPES {nc}")
    lines += [str(cell_type)] * nc
    lines.append(f"POINT_DATA {P.shape[0]}")
    for name, arr in data.items():
        a = _as_point_array(name, arr)
        if a.shape[1] == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        elif name == "displacement" and a.shape[1] == 3:
            lines.append(f"VECTORS {name} double")
        else:
            lines += ["FIELD FieldData 1", f"{name} {a.shape[1]} {a.shape[0]} double"]
        lines += [" ".join(_f(v) for v in row) for row in a]
    return "\n".join(lines) + "\n"


def _xml_array(name, a):
    a = np.asarray(a)
    ncomp = a.shape[1] if a.ndim == 2 else 1
    if a.dtype.kind in "iu":
        body = " ".join(str(int(v)) for v in a.ravel())
        kind = "Int64"
    else:
        body = " ".join(_f(v) for v in a.ravel())
        kind = "Float64"
    return (
        f'<DataArray type="{kind}" Name="{name}" NumberOfComponents="{ncomp}" format="ascii">\n'
        f"{body}\n</DataArray>"
    )


def _point_data_xml(data):
    parts = ["<PointData>"]
    for name, arr in data.items():
        parts.append(_xml_array(name, _as_point_array(name, arr)))
    parts.append("</PointData>")
    return "\n".join(parts)


def _vtu(nodes, cells, cell_type, data):
    P = _pad3(nodes)
    nc, k = cells.shape
    offsets = np.arange(1, nc + 1, dtype=np.int64) * k
    types = np.full(nc, cell_type, dtype=np.int64)
    return "\n".join([
        '<?xml version="1.0"?>',
        '<VTKFile type="UnstructuredGrid" version="1.0" byte_order="LittleEndian">',
        "<UnstructuredGrid>",
        f'<Piece NumberOfPoints="{P.shape[0]}" NumberOfCells="{nc}">',
        "<Points>",
        _xml_array("Points", P),
        "</Points>",
        "<Cells>",
        _xml_array("connectivity", cells.astype(np.int64).ravel()),
        _xml_array("offsets", offsets),
        _xml_array("types", types),
        "</Cells>",
        _point_data_xml(data),
        "</Piece>",
        "</UnstructuredGrid>",
        "</VTKFile>",
        "",
    ])


def _vts(nodes, shape, data):
    if shape is None or len(shape) != 3:
        raise ArgumentError("structured (.vts) output needs a 3D node grid")
    P = _pad3(nodes)
    ext = " ".join(f"0 {n - 1}" for n in shape)
    return "\n".join([
        '<?xml version="1.0"?>',
        '<VTKFile type="StructuredGrid" version="1.0" byte_order="LittleEndian">',
        f'<StructuredGrid WholeExtent="{ext}">',
        f'<Piece Extent="{ext}">',
        "<Points>",
        _xml_array("Points", P),
        "</Points>",
        _point_data_xml(data),
        "</Piece>",
        "</StructuredGrid>",
        "</VTKFile>",
        "",
    ])


def write_vtk(path, nodes, cells, cell_type, data, shape=None):
    """Write a mesh with point data.

    The format follows the extension: ``.vtk`` legacy ASCII, ``.vtu`` XML
    unstructured grid, ``.vts`` XML structured grid (3D node grids only).
    Floats use 17 significant digits so output is byte-reproducible.

    Parameters
    ----------
    data : dict
        Name -> array of shape (n_nodes,) or (n_nodes, k).

    Raises
    ------
    IOFailure
        The file cannot be written.
    """
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    cells = np.asarray(cells, dtype=np.int64)
    if ext == ".vtk":
        text = _legacy(nodes, cells, cell_type, data)
    elif ext == ".vtu":
        text = _vtu(nodes, cells, cell_type, data)
    elif ext == ".vts":
        text = _vts(nodes, shape, data)
    else:
        raise ArgumentError(f"unknown VTK extension {ext!r}; use .vtk, .vtu or .vts")
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_bundle(bundle, path):
    """Write ``displacement`` and ``stress`` point arrays of a bundle."""
    data = {"displacement": bundle.displacement, "stress": bundle.stress}
    return write_vtk(path, bundle.nodes, bundle.cells, bundle.cell_type, data, bundle.shape)


# error norms

def error_norms(patch, mesh, u, exact, exact_grad=None, ncomp=None, mat=None, extra=1):
    """Relative L2 and energy (or H1 seminorm) errors.

    Parameters
    ----------
    exact : callable
        ``exact(x)`` returning ``(n, ncomp)`` (or ``(n,)`` for scalars).
    exact_grad : callable, optional
        ``exact_grad(x)`` returning ``(n, ncomp, d)``. Without it only the
        L2 error is computed.
    mat : Material, optional
        Use the elastic energy norm instead of the H1 seminorm.
    extra : int
        Gauss points above ``p + 1`` per direction.

    Returns
    -------
    (float, float or None)
    """
    ncomp = (patch.dim_s if mat is not None else 1) if ncomp is None else ncomp
    n = patch.n_points
    U = np.asarray(u, dtype=float)[: ncomp * n].reshape(n, ncomp)
    rule = gauss_rule([p + 1 + extra for p in patch.degrees])
    tab = tabulate(patch, mesh, rule)
    ne, nq = tab.wdet.shape
    x = tab.x.reshape(ne * nq, -1)
    Ue = U[tab.idx]
    uh = np.einsum("eqa,eac->eqc", tab.R, Ue).reshape(ne * nq, ncomp)
    ue = np.asarray(exact(x), dtype=float).reshape(ne * nq, ncomp)
    w = tab.wdet.ravel()
    num = np.sum(w * np.sum((uh - ue) ** 2, axis=1))
    den = np.sum(w * np.sum(ue ** 2, axis=1))
    l2 = float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))
    if exact_grad is None:
        return l2, None
    gh = np.einsum("eqad,eac->eqcd", tab.dRdx, Ue).reshape(ne * nq, ncomp, -1)
    ge = np.asarray(exact_grad(x), dtype=float).reshape(gh.shape)
    if mat is not None:
        D = elasticity_D(mat)

        def energy(g):
            if g.shape[-1] == 2:
                eps = np.stack([g[:, 0, 0], g[:, 1, 1], g[:, 0, 1] + g[:, 1, 0]], 1)
            else:
                eps = np.stack([
                    g[:, 0, 0], g[:, 1, 1], g[:, 2, 2],
                    g[:, 0, 1] + g[:, 1, 0], g[:, 1, 2] + g[:, 2, 1], g[:, 2, 0] + g[:, 0, 2],
                ], 1)
            return np.einsum("qi,ij,qj->q", eps, D, eps)

        num = np.sum(w * energy(gh - ge))
        den = np.sum(w * energy(ge))
    else:
        num = np.sum(w * np.sum((gh - ge) ** 2, axis=(1, 2)))
        den = np.sum(w * np.sum(ge ** 2, axis=(1, 2)))
    en = float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))
    return l2, en


# tabular and patch files

def write_metrics(path, rows, append=False):
    """Write metric rows (dicts keyed by :data:`METRIC_HEADER`) as CSV."""
    path = os.fspath(path)
    new = not (append and os.path.exists(path))
    try:
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=METRIC_HEADER, lineterminator="\n")
            if new:
                w.writeheader()
            for r in rows:
                w.writerow({k: _csv_value(r.get(k, "")) for k in METRIC_HEADER})
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return v


def save_patch(patch, path):
    """Write a patch as JSON."""
    try:
        with open(path, "w") as fh:
            json.dump(patch.to_dict(), fh, indent=1)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from exc


def load_patch(path):
    """Read a patch written by :func:`save_patch`."""
    try:
        with open(path) as fh:
            return NurbsPatch.from_dict(json.load(fh))
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror}") from exc
