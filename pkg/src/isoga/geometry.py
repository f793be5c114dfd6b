"""Patch builders for the catalog geometries."""
import numpy as np

from .errors import ArgumentError
from .spline import KnotVector, NurbsPatch, elevate_degree, h_refine, subdivide

__all__ = [
    "line",
    "rectangle",
    "box",
    "quarter_annulus",
    "plate_with_hole",
    "cylinder_octant",
    "refine_to",
    "apply_refinement",
]

W45 = 1.0 / np.sqrt(2.0)


def _grid_points(kvs):
    """Identity-like control points at the Greville abscissae (x-fastest)."""
    g = [kv.greville() for kv in kvs]
    mesh = np.meshgrid(*g[::-1], indexing="ij")
    return np.column_stack([m.ravel() for m in mesh[::-1]])


def line(degree, n_el, lo=0.0, hi=1.0):
    """Straight 1D patch with a linear parametrization."""
    kv = KnotVector.open_uniform(degree, n_el, lo, hi)
    return NurbsPatch([kv], _grid_points([kv]))


def rectangle(degree, n_el, lo=(0.0, 0.0), hi=(1.0, 1.0)):
    """Axis-aligned rectangle; ``degree`` and ``n_el`` are per direction."""
    degree = np.broadcast_to(degree, 2)
    n_el = np.broadcast_to(n_el, 2)
    kvs = [KnotVector.open_uniform(int(degree[d]), int(n_el[d]), lo[d], hi[d]) for d in range(2)]
    return NurbsPatch(kvs, _grid_points(kvs))


def box(degree, n_el, lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)):
    """Axis-aligned brick."""
    degree = np.broadcast_to(degree, 3)
    n_el = np.broadcast_to(n_el, 3)
    kvs = [KnotVector.open_uniform(int(degree[d]), int(n_el[d]), lo[d], hi[d]) for d in range(3)]
    return NurbsPatch(kvs, _grid_points(kvs))


def quarter_annulus(r_in=1.0, r_out=2.0):
    """Quadratic-by-linear quarter annulus in the first quadrant; xi runs
    around, eta outward."""
    if not 0 < r_in < r_out:
        raise ArgumentError("need 0 < r_in < r_out")
    ku = KnotVector([0, 0, 0, 1, 1, 1], 2)
    kv = KnotVector([0, 0, 1, 1], 1)
    pts, w = [], []
    for r in (r_in, r_out):
        pts += [[r, 0.0], [r, r], [0.0, r]]
        w += [1.0, W45, 1.0]
    return NurbsPatch([ku, kv], np.array(pts), np.array(w))


def plate_with_hole(L=4.0, R=1.0):
    """Quarter plate ``[-L, 0] x [0, L]`` with a hole of radius ``R`` at the
    origin; two quadratic elements along xi, one along eta.

    ``xi`` runs from ``(-R, 0)`` to ``(0, R)`` along the hole, ``eta`` from
    the hole to the outer edges. The two outer-corner control points
    coincide, so the Jacobian is singular there.
    """
    if not 0 < R < L:
        raise ArgumentError("need 0 < R < L")
    ku = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    kv = KnotVector([0, 0, 0, 1, 1, 1], 2)
    t = np.sqrt(2.0) - 1.0
    wm = 0.5 * (1.0 + W45)
    m = 0.5 * (R + L)
    rows = [
        [[-R, 0.0], [-R, R * t], [R * (1 - np.sqrt(2.0)), R], [0.0, R]],
        [[-m, 0.0], [-m, 0.3 * m], [-0.3 * m, m], [0.0, m]],
        [[-L, 0.0], [-L, L], [-L, L], [0.0, L]],
    ]
    pts = np.array([p for row in rows for p in row], dtype=float)
    w = np.array([1.0, wm, wm, 1.0] + [1.0] * 8)
    return NurbsPatch([ku, kv], pts, w)


def cylinder_octant(R=300.0, half_length=300.0, t=3.0):
    """One eighth of a thick cylinder: quadratic around, linear along the
    axis and through the thickness.

    ``xi`` runs from the x axis to the y axis, ``eta`` along z from 0 to
    ``half_length``, ``zeta`` from the inner to the outer surface.
    """
    ku = KnotVector([0, 0, 0, 1, 1, 1], 2)
    kv = KnotVector([0, 0, 1, 1], 1)
    kw = KnotVector([0, 0, 1, 1], 1)
    pts, w = [], []
    for r in (R - 0.5 * t, R + 0.5 * t):
        for z in (0.0, half_length):
            pts += [[r, 0.0, z], [r, r, z], [0.0, r, z]]
            w += [1.0, W45, 1.0]
    return NurbsPatch([ku, kv, kw], np.array(pts), np.array(w))


def refine_to(patch, degrees, n_el):
    """Elevate to ``degrees`` then split so direction ``d`` has ``n_el[d]``
    elements (a multiple of the current count).

    Raises
    ------
    ArgumentError
        Target degree below the current one or element count not a
        multiple of the current count.
    """
    out = patch
    for d, p in enumerate(degrees):
        cur = out.knot_vectors[d].degree
        if p < cur:
            raise ArgumentError(f"cannot lower the degree in direction {d} from {cur} to {p}")
        if p > cur:
            out = elevate_degree(out, d, p - cur)
    counts = []
    for d, n in enumerate(n_el):
        cur = out.knot_vectors[d].n_elements
        if n % cur:
            raise ArgumentError(f"{n} elements is not a multiple of {cur} in direction {d}")
        counts.append(n // cur)
    return subdivide(out, counts)


def apply_refinement(patch, steps):
    """Apply refinement directives in order.

    Each step is a dict with ``type`` ``h`` (``levels``: bisections),
    ``p`` (``by``: degree raise) or ``k`` (``by`` then ``levels``), and an
    optional ``directions`` list. The order matters: elevation before
    insertion keeps higher continuity than the reverse.
    """
    out = patch
    for s in steps:
        dirs = s.get("directions", list(range(out.dim_p)))
        kind = s["type"]
        if kind in ("p", "k"):
            for d in dirs:
                out = elevate_degree(out, d, int(s.get("by", 1)))
        if kind in ("h", "k"):
            out = h_refine(out, int(s.get("levels", 1)), dirs)
        if kind not in ("h", "p", "k"):
            raise ArgumentError(f"unknown refinement type {kind!r}")
    return out
