"""Built-in verification cases.

Every case takes a parameter dict (defaults merged with user settings)
and returns a :class:`CaseResult` holding metric rows and the data needed
for VTK output.
"""
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry
from .assembly import (
    Material,
    assemble_body_force,
    assemble_elasticity,
    assemble_poisson_1d,
    assemble_traction,
    elasticity_D,
    strain_matrix,
)
from .bc import DirichletSpec, apply_dirichlet
from .errors import ArgumentError
from .mesh import build_vis_mesh, extract_boundary, generate_mesh
from .plate import (
    PlateMaterial,
    assemble_plate,
    clamp_boundary,
    deflection,
    symmetry_coupling,
    uniform_load,
)
from .post import ResultBundle, error_norms, load_patch, recover_fields
from .quadrature import evaluate_in_elements, gauss_rule, tabulate
from .solver import solve
from .spline import NurbsPatch, insert_knot
from .xiga import (
    Crack2D,
    Crack3D,
    XigaModel,
    assemble_enriched,
    cracked_vis_mesh,
    enriched_vis_fields,
    exact_griffith,
    exact_mode_I_3d,
    sif_interaction_integral,
)

__all__ = ["CaseResult", "CASES", "DEFAULTS", "run_case", "edge_crack_reference", "hole_exact_stress"]


@dataclass
class CaseResult:
    """Outcome of one case run.

    Attributes
    ----------
    name : str
    rows : list of dict
        Metric rows keyed like the metrics CSV header.
    bundle : ResultBundle
        Fields on the visualization mesh.
    values : dict
        Metric name -> value, for programmatic checks.
    patch, mesh, u
        Discretization and solution.
    elapsed : float
        Wall time in seconds.
    """

    name: str
    rows: list
    bundle: ResultBundle
    values: dict
    patch: object = None
    mesh: object = None
    u: np.ndarray = None
    elapsed: float = 0.0
    extra: dict = field(default_factory=dict)


def _row(case, mesh_label, p, dofs, metric, value, ref=None):
    rel = "" if ref in (None, 0) else abs(value - ref) / abs(ref)
    return {
        "case": case,
        "mesh": mesh_label,
        "p": p,
        "dofs": dofs,
        "metric": metric,
        "value": value,
        "ref": "" if ref is None else ref,
        "rel_error": rel,
    }


def _material(prm, default_mode):
    m = prm.get("material", {})
    return Material(float(m.get("E", 1.0)), float(m.get("nu", 0.3)), m.get("mode", default_mode))


def _bundle_from(vis, disp, stress):
    return ResultBundle(vis.nodes, vis.cells, vis.cell_type, vis.shape, disp, stress)


def _maybe_refine(patch, prm):
    steps = prm.get("refine") or []
    return geometry.apply_refinement(patch, steps) if steps else patch


def _rule(patch, prm):
    q = prm.get("quad")
    return None if q is None else gauss_rule([int(q)] * patch.dim_p)


# 1D Poisson

def poisson_1d(prm):
    """``-u'' = x`` on (0, 1) with ``u(0) = u(1) = 0``; exact
    ``u = (x - x^3) / 6``."""
    p, n = int(prm["degree"]), int(prm["elements"])
    patch = _maybe_refine(geometry.line(p, n), prm)
    mesh = generate_mesh(patch)
    system = assemble_poisson_1d(patch, mesh, b=lambda x: x, rule=_rule(patch, prm))
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["xi0", "xi1"], method=prm["bc_method"]))
    rep = solve(system, prm["solver"])
    exact = lambda x: (x[:, 0] - x[:, 0] ** 3) / 6.0
    grad = lambda x: ((1.0 - 3.0 * x[:, 0] ** 2) / 6.0).reshape(-1, 1, 1)
    l2, h1 = error_norms(patch, mesh, rep.u, exact, grad, ncomp=1)
    vis = build_vis_mesh(mesh, patch)
    b = recover_fields(patch, mesh, vis, rep.u)
    nodal = float(np.abs(b.displacement[:, 0] - exact(vis.nodes)).max())
    label = f"{mesh.n_el}"
    rows = [
        _row("poisson-1d", label, p, system.n_dof, "l2_error", l2),
        _row("poisson-1d", label, p, system.n_dof, "h1_error", h1),
        _row("poisson-1d", label, p, system.n_dof, "max_nodal_error", nodal),
    ]
    return CaseResult("poisson-1d", rows, b, {"l2_error": l2, "h1_error": h1, "max_nodal_error": nodal,
                                       "dofs": system.n_dof},
                      patch, mesh, rep.u)


def _gradient_patch(p, n, c0_at):
    """Uniform mesh of degree ``p`` with C0 knots inserted at ``c0_at``.

    The base mesh is chosen so the final element count is ``n``.
    """
    c0_at = sorted(float(x) for x in c0_at)
    n0 = n
    if c0_at:
        for cand in range(n - len(c0_at), 0, -1):
            br = np.linspace(0, 1, cand + 1)
            new = [x for x in c0_at if not np.any(np.isclose(br, x))]
            if cand + len(new) == n:
                n0 = cand
                break
        else:
            raise ArgumentError(f"cannot build {n} elements with C0 knots at {c0_at}")
    patch = geometry.line(p, n0)
    for x in c0_at:
        k = patch.knot_vectors[0].knots
        have = int(np.count_nonzero(np.isclose(k, x)))
        if p - have > 0:
            patch = insert_knot(patch, 0, x, p - have)
    return patch


def poisson_1d_gradient(prm):
    """``u'' + b = 0`` with a sharp Gaussian peak at ``x = 0.5``.

    Exact ``u = x + exp(-(alpha (x - 0.5))^2)``; ``u(0) = 0``, ``u(1) = 1``
    (the exact field at the ends, up to exp(-alpha^2/4)).
    """
    p, n, alpha = int(prm["degree"]), int(prm["elements"]), float(prm["alpha"])
    patch = _maybe_refine(_gradient_patch(p, n, prm.get("c0_at", [])), prm)
    mesh = generate_mesh(patch)

    def b(x):
        s = x - 0.5
        v = (2 * alpha ** 2 - 4 * (alpha ** 2 * s) ** 2) * np.exp(-(alpha * s) ** 2)
        return np.where((x >= 0.42) & (x <= 0.58), v, 0.0)

    exact = lambda x: x[:, 0] + np.exp(-(alpha * (x[:, 0] - 0.5)) ** 2)
    rule = gauss_rule(int(prm.get("quad") or 10), 1)
    system = assemble_poisson_1d(patch, mesh, b=b, rule=rule)
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["xi0"], value=0.0, method=prm["bc_method"]))
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["xi1"], value=1.0, method=prm["bc_method"]))
    rep = solve(system, prm["solver"])
    l2, _ = error_norms(patch, mesh, rep.u, exact, ncomp=1)
    vis = build_vis_mesh(mesh, patch)
    bnd = recover_fields(patch, mesh, vis, rep.u)
    nodal = float(np.abs(bnd.displacement[:, 0] - exact(vis.nodes)).max())
    xs = np.linspace(0, 1, 2001)
    idx, R = patch.basis(xs[:, None], 0)
    uh = np.einsum("qa,qa->q", R, rep.u[idx])
    sampled = float(np.abs(uh - exact(xs[:, None])).max())
    label = f"{mesh.n_el}" + ("-c0" if prm.get("c0_at") else "")
    rows = [
        _row("poisson-1d-gradient", label, p, system.n_dof, "l2_error", l2),
        _row("poisson-1d-gradient", label, p, system.n_dof, "max_nodal_error", nodal),
        _row("poisson-1d-gradient", label, p, system.n_dof, "max_error", sampled),
    ]
    vals = {"l2_error": l2, "max_nodal_error": nodal, "max_error": sampled, "dofs": system.n_dof}
    return CaseResult("poisson-1d-gradient", rows, bnd, vals, patch, mesh, rep.u)


# plate with a hole

def hole_exact_stress(x, R=1.0):
    """Exact (xx, yy, xy) stresses around a circular hole under unit
    tension along x."""
    r = np.hypot(x[:, 0], x[:, 1])
    th = np.arctan2(x[:, 1], x[:, 0])
    a2, a4 = (R / r) ** 2, (R / r) ** 4
    c2, c4, s2, s4 = np.cos(2 * th), np.cos(4 * th), np.sin(2 * th), np.sin(4 * th)
    sxx = 1 - a2 * (1.5 * c2 + c4) + 1.5 * a4 * c4
    syy = -a2 * (0.5 * c2 - c4) - 1.5 * a4 * c4
    sxy = -a2 * (0.5 * s2 + s4) + 1.5 * a4 * s4
    return np.column_stack([sxx, syy, sxy])


def _stress_l2(patch, mesh, u, mat, exact):
    rule = gauss_rule([p + 2 for p in patch.degrees])
    tab = tabulate(patch, mesh, rule)
    B = strain_matrix(tab.dRdx)
    Ue = u[: 2 * patch.n_points].reshape(-1, 2)[tab.idx].reshape(tab.idx.shape[0], -1)
    sig = np.einsum("eqsk,ek->eqs", B, Ue) @ elasticity_D(mat).T
    ex = exact(tab.x.reshape(-1, 2)).reshape(sig.shape)
    w = tab.wdet
    num = np.sum(w * np.sum((sig - ex) ** 2, axis=-1))
    den = np.sum(w * np.sum(ex ** 2, axis=-1))
    return float(np.sqrt(num / den))


def plate_hole(prm):
    """Quarter of an infinite plate with a hole, exact tractions on the
    outer edges, symmetry on the cut edges."""
    L, R = float(prm["L"]), float(prm["R"])
    mat = _material(prm, "plane-stress")
    p = int(prm["degree"])
    nel = prm["elements"]
    patch = geometry.refine_to(geometry.plate_with_hole(L, R), (p, p), tuple(nel))
    patch = _maybe_refine(patch, prm)
    mesh = generate_mesh(patch)
    rule = _rule(patch, prm)
    system = assemble_elasticity(patch, mesh, mat, rule)

    def trac(x, n):
        s = hole_exact_stress(x, R)
        return np.column_stack([s[:, 0] * n[:, 0] + s[:, 2] * n[:, 1], s[:, 2] * n[:, 0] + s[:, 1] * n[:, 1]])

    system.F += assemble_traction(patch, extract_boundary(mesh, patch, "eta1"), trac)
    m = prm["bc_method"]
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["xi0"], component=1, method=m))
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["xi1"], component=0, method=m))
    rep = solve(system, prm["solver"])
    vis = build_vis_mesh(mesh, patch)
    b = recover_fields(patch, mesh, vis, rep.u, mat)
    # stress concentration at the top of the hole
    k = int(np.argmin(np.linalg.norm(vis.nodes - np.array([0.0, R]), axis=1)))
    conc = float(b.stress[k, 0])
    err = _stress_l2(patch, mesh, rep.u, mat, lambda x: hole_exact_stress(x, R))
    t = np.linspace(0, 1, 100)
    edge = patch.eval(np.column_stack([t, np.zeros_like(t)]))
    geo = float(np.abs(np.linalg.norm(edge, axis=1) - R).max())
    label = f"{nel[0]}x{nel[1]}"
    rows = [
        _row("plate-hole", label, p, system.n_dof, "sigma_xx_concentration", conc, 3.0),
        _row("plate-hole", label, p, system.n_dof, "stress_l2_error", err),
        _row("plate-hole", label, p, system.n_dof, "hole_radius_error", geo),
    ]
    vals = {"sigma_xx_concentration": conc, "stress_l2_error": err, "hole_radius_error": geo,
            "dofs": system.n_dof}
    return CaseResult("plate-hole", rows, b, vals, patch, mesh, rep.u)


# cracks

def edge_crack_reference(a_over_b):
    """Empirical geometry factor for the single-edge-cracked strip."""
    r = a_over_b
    if r > 0.6:
        raise ArgumentError("the geometry factor is valid for a/b <= 0.6")
    return 1.12 - 0.23 * r + 10.55 * r ** 2 - 21.72 * r ** 3 + 30.39 * r ** 4


def _cp_rectangle(p, cps, lo, hi):
    """Rectangle with ``cps`` control points per direction."""
    nel = [c - p for c in cps]
    if min(nel) < 1:
        raise ArgumentError(f"{cps} control points are too few for degree {p}")
    return geometry.rectangle(p, nel, lo, hi)


def _crack_bundle(model, U):
    if model.crack.dim == 2:
        cv = cracked_vis_mesh(model, U)
        return ResultBundle(cv.nodes, cv.cells, 9, None, cv.displacement, cv.stress), cv
    d, s = enriched_vis_fields(model, U)
    return _bundle_from(model.vis, d, s), None


def edge_crack(prm):
    """Single-edge crack in a ``b x 2h`` strip under end tension."""
    a, b, h, sigma = float(prm["a"]), float(prm["b"]), float(prm["h"]), float(prm["sigma"])
    p = int(prm["degree"])
    cps = tuple(int(c) for c in prm["control_points"])
    mat = _material(prm, "plane-strain")
    patch = _maybe_refine(_cp_rectangle(p, cps, (0.0, -h), (b, h)), prm)
    mesh = generate_mesh(patch)
    crack = Crack2D(prm.get("crack") or [[0.0, 0.0], [a, 0.0]])
    model = XigaModel(patch, mesh, mat, crack, int(prm["enriched_quad"]), _rule(patch, prm))
    system = assemble_enriched(model)
    system.F[: 2 * patch.n_points] += assemble_traction(
        patch, extract_boundary(mesh, patch, "eta1"), [0.0, sigma]
    )
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["eta0"], component=1, method=prm["bc_method"]))
    apply_dirichlet(system, patch, mesh, DirichletSpec(nodes=[0], component=0))
    rep = solve(system, prm["solver"])
    sif = sif_interaction_integral(model, rep.u, rd=float(prm["rd"]))
    ref = edge_crack_reference(a / b) * sigma * np.sqrt(np.pi * a)
    bundle, cv = _crack_bundle(model, rep.u)
    label = f"{cps[0]}x{cps[1]}"
    rows = [_row("edge-crack", label, p, system.n_dof, "K_I", sif.K_I, ref)]
    vals = {"K_I": sif.K_I, "K_ref": ref, "rel_error": abs(sif.K_I - ref) / ref, "dofs": system.n_dof,
            "n_heaviside": int(model.enr.heav_nodes.size), "n_tip": int(model.enr.tip_nodes.size)}
    return CaseResult("edge-crack", rows, bundle, vals, patch, mesh, rep.u,
                      extra={"model": model, "cracked": cv})


def _disp_l2(model, U, exact, extra=2):
    """Relative L2 displacement error of an enriched solution."""
    num = den = 0.0
    base = gauss_rule([p + 1 + extra for p in model.patch.degrees])
    # even order: no point lands on a crack through the element centre,
    # where the discrete field takes the two-sided average
    n = model.enriched_rule.orders[0]
    special = gauss_rule([n + n % 2] * model.patch.dim_p)
    for e in range(model.mesh.n_el):
        rule = special if model.elem_special[e] else base
        rule, params, detp = model.quadrature(e, rule)
        u, _, x = model.field(U, e, params, grad=False)
        det = np.abs(evaluate_in_elements(model.patch, model.mesh, np.array([e]), params[None], 1)["det"][0])
        w = rule.weights * det * detp
        ue = exact(x)
        num += np.sum(w * np.sum((u - ue) ** 2, axis=1))
        den += np.sum(w * np.sum(ue ** 2, axis=1))
    return float(np.sqrt(num / den))


def griffith_mode_I(prm):
    """Square around a crack tip loaded by the exact mode I field.

    Displacements of the exact field are imposed on the bottom, right and
    top edges; the left edge (crossed by the crack) carries the exact
    traction.
    """
    W, a, sigma = float(prm["width"]), float(prm["a"]), float(prm["sigma"])
    p, nel = int(prm["degree"]), prm["elements"]
    mat = _material(prm, "plane-strain")
    patch = _maybe_refine(geometry.rectangle(p, nel, (0.0, -0.5 * W), (W, 0.5 * W)), prm)
    mesh = generate_mesh(patch)
    crack = Crack2D([[0.0, 0.0], [0.5 * W, 0.0]])
    model = XigaModel(patch, mesh, mat, crack, int(prm["enriched_quad"]), _rule(patch, prm))
    system = assemble_enriched(model)
    uex = lambda x: exact_griffith(x, crack, mat, sigma, a)

    def trac(x, n):
        _, s = exact_griffith(x, crack, mat, sigma, a, stress=True)
        return np.column_stack([s[:, 0] * n[:, 0] + s[:, 2] * n[:, 1], s[:, 2] * n[:, 0] + s[:, 1] * n[:, 1]])

    system.F[: 2 * patch.n_points] += assemble_traction(patch, extract_boundary(mesh, patch, "xi0"), trac)
    apply_dirichlet(system, patch, mesh, DirichletSpec(
        faces=["eta0", "xi1", "eta1"], field=uex, method=prm["bc_method"], penalty=float(prm["penalty"])))
    rep = solve(system, prm["solver"])
    sif = sif_interaction_integral(model, rep.u, rd=float(prm["rd"]))
    K = sigma * np.sqrt(np.pi * a)
    l2 = _disp_l2(model, rep.u, uex)
    bundle, cv = _crack_bundle(model, rep.u)
    label = f"{nel[0]}x{nel[1]}"
    rows = [
        _row("griffith-modeI", label, p, system.n_dof, "K_I", sif.K_I, K),
        _row("griffith-modeI", label, p, system.n_dof, "l2_error", l2),
    ]
    vals = {"K_I": sif.K_I, "K_ref": K, "l2_error": l2, "dofs": system.n_dof}
    return CaseResult("griffith-modeI", rows, bundle, vals, patch, mesh, rep.u,
                      extra={"model": model, "cracked": cv})


def mode_I_3d(prm):
    """Through crack in a slab loaded by the plane-strain mode I field.

    The slab is ``[0, 10] x [0, t] x [-5, 5]`` (y through the thickness)
    with the crack on ``z = 0`` for ``x < 5``. Exact displacements are
    imposed by penalty on the bottom, right and top faces, ``u_y = 0`` on
    both y faces, and the exact traction on the left face.
    """
    deg = [int(d) for d in prm["degree"]]
    nel = [int(n) for n in prm["elements"]]
    a, sigma, t = float(prm["a"]), float(prm["sigma"]), float(prm["thickness"])
    mat = _material(prm, "solid-3D")
    patch = _maybe_refine(geometry.box(deg, nel, (0.0, 0.0, -5.0), (10.0, t, 5.0)), prm)
    mesh = generate_mesh(patch)
    crack = Crack3D([[0.0, t, 0.0], [0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [5.0, t, 0.0]])
    model = XigaModel(patch, mesh, mat, crack, int(prm["enriched_quad"]), _rule(patch, prm))
    system = assemble_enriched(model)
    uex = lambda x: exact_mode_I_3d(x, crack, mat, sigma, a)

    def trac(x, n):
        _, s = exact_mode_I_3d(x, crack, mat, sigma, a, stress=True)
        S = s[:, [0, 3, 5, 3, 1, 4, 5, 4, 2]].reshape(-1, 3, 3)
        return np.einsum("nij,nj->ni", S, n)

    system.F[: 3 * patch.n_points] += assemble_traction(patch, extract_boundary(mesh, patch, "xi0"), trac)
    apply_dirichlet(system, patch, mesh, DirichletSpec(
        faces=["zeta0", "xi1", "zeta1"], field=uex, method=prm["bc_method"], penalty=float(prm["penalty"])))
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["eta0", "eta1"], component=1))
    # plane strain through the thickness: enrichment carries no u_y
    for fid in range(patch.n_points, model.enr.n_fun):
        system.fixed[3 * fid + 1] = 0.0
    rep = solve(system, prm["solver"])
    l2 = _disp_l2(model, rep.u, uex)
    bundle, _ = _crack_bundle(model, rep.u)
    n = patch.n_points
    ustd = rep.u[: 3 * n].reshape(n, 3)
    umax = float(np.abs(bundle.displacement).max())
    uy = float(max(np.abs(ustd[:, 1]).max(), np.abs(bundle.displacement[:, 1]).max()))
    # opening symmetry: u_z(x, y, z) = -u_z(x, y, -z) at vis nodes
    nodes = bundle.nodes
    mirror = nodes * np.array([1.0, 1.0, -1.0])
    dist, j = cKDTree(nodes).query(mirror)
    ok = dist < 1e-9
    sym = float(np.abs(bundle.displacement[ok, 2] + bundle.displacement[j[ok], 2]).max() / umax)
    label = "x".join(str(v) for v in nel)
    p = "/".join(str(d) for d in deg)
    rows = [
        _row("mode-I-3d", label, p, system.n_dof, "l2_error", l2),
        _row("mode-I-3d", label, p, system.n_dof, "uy_over_umax", uy / umax),
        _row("mode-I-3d", label, p, system.n_dof, "opening_asymmetry", sym),
    ]
    vals = {"l2_error": l2, "uy_over_umax": uy / umax, "opening_asymmetry": sym, "dofs": system.n_dof}
    return CaseResult("mode-I-3d", rows, bundle, vals, patch, mesh, rep.u, extra={"model": model})


# plates

def clamped_plate(prm):
    """Clamped square plate under uniform pressure.

    With ``symmetry`` the quarter ``[0, L/2]^2`` is modelled, clamped on
    ``x = 0`` and ``y = 0`` with penalty-tied rows on the symmetry edges.
    """
    L, q = float(prm["L"]), float(prm["q"])
    m = prm.get("material", {})
    mat = PlateMaterial(float(m.get("E", 1e6)), float(m.get("nu", 0.3)), float(m.get("h", 0.01)))
    p, nel = int(prm["degree"]), prm["elements"]
    quarter = bool(prm.get("symmetry", False))
    hi = (0.5 * L, 0.5 * L) if quarter else (L, L)
    patch = _maybe_refine(geometry.rectangle(p, nel, (0.0, 0.0), hi), prm)
    mesh = generate_mesh(patch)
    system = assemble_plate(patch, mesh, mat, _rule(patch, prm))
    uniform_load(system, patch, mesh, q)
    if quarter:
        clamp_boundary(system, patch, ["xi0", "eta0"])
        symmetry_coupling(system, patch, ["xi1", "eta1"], float(prm.get("coupling", 1e7)))
        centre = [0.5 * L, 0.5 * L]
    else:
        clamp_boundary(system, patch, ["xi0", "xi1", "eta0", "eta1"])
        centre = [0.5 * L, 0.5 * L]
    rep = solve(system, prm["solver"])
    wc = float(deflection(patch, rep.u, [centre])[0])
    coef = wc * mat.rigidity / (q * L ** 4)
    vis = build_vis_mesh(mesh, patch)
    b = recover_fields(patch, mesh, vis, rep.u, mat)
    label = f"{nel[0]}x{nel[1]}" + ("-quarter" if quarter else "")
    rows = [_row("clamped-plate", label, p, system.n_dof, "centre_deflection_coefficient", coef,
                 float(prm["reference"]))]
    vals = {"coefficient": coef, "w_centre": wc, "dofs": system.n_dof}
    return CaseResult("clamped-plate", rows, b, vals, patch, mesh, rep.u)


def pinched_cylinder(prm):
    """One eighth of a pinched cylinder with rigid end diaphragms, modelled
    with solid elements (qualitative output only)."""
    R, half, t, P = float(prm["R"]), float(prm["half_length"]), float(prm["thickness"]), float(prm["P"])
    mat = _material(prm, "solid-3D")
    deg = [int(d) for d in prm["degree"]]
    nel = [int(n) for n in prm["elements"]]
    patch = geometry.refine_to(geometry.cylinder_octant(R, half, t), deg, nel)
    patch = _maybe_refine(patch, prm)
    mesh = generate_mesh(patch)
    system = assemble_elasticity(patch, mesh, mat, _rule(patch, prm))
    m = prm["bc_method"]
    # symmetry planes y = 0 (xi0), x = 0 (xi1), z = 0 (eta0); diaphragm at eta1
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["xi0"], component=1, method=m))
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["xi1"], component=0, method=m))
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["eta0"], component=2, method=m))
    apply_dirichlet(system, patch, mesh, DirichletSpec(faces=["eta1"], component=[0, 1], method=m))
    # quarter of the load at the mid-surface point on the y axis
    xi = np.array([[1.0, 0.0, 0.5]])
    idx, Rb = patch.basis(xi, 0)
    np.add.at(system.F, 3 * idx[0] + 1, -0.25 * P * Rb[0])
    rep = solve(system, prm["solver"])
    vis = build_vis_mesh(mesh, patch)
    b = recover_fields(patch, mesh, vis, rep.u, mat)
    u_load = float(np.einsum("a,a->", Rb[0], rep.u[3 * idx[0] + 1]))
    label = "x".join(str(v) for v in nel)
    rows = [_row("pinched-cylinder-3d", label, "/".join(map(str, deg)), system.n_dof,
                 "load_point_displacement", u_load)]
    return CaseResult("pinched-cylinder-3d", rows, b, {"u_load": u_load, "dofs": system.n_dof},
                      patch, mesh, rep.u)


# generic elasticity from a patch description

def elasticity(prm):
    """Linear elasticity on a user patch with face conditions and loads.

    ``geometry`` holds a patch dict (``degrees``, ``knots``, ``points``,
    ``weights``) or ``{"file": path}``; ``bcs`` lists Dirichlet specs and
    ``loads`` lists face tractions (``{"face", "traction"}``) or a body
    force (``{"body": [...]}``).
    """
    g = prm.get("geometry")
    if g is None:
        raise ArgumentError("the elasticity case needs a geometry")
    patch = load_patch(g["file"]) if "file" in g else NurbsPatch.from_dict(g)
    patch = _maybe_refine(patch, prm)
    mesh = generate_mesh(patch)
    mode = "solid-3D" if patch.dim_s == 3 else "plane-stress"
    mat = _material(prm, mode)
    system = assemble_elasticity(patch, mesh, mat, _rule(patch, prm))
    for ld in prm.get("loads", []):
        if "face" in ld:
            system.F += assemble_traction(patch, extract_boundary(mesh, patch, ld["face"]), ld["traction"])
        elif "body" in ld:
            system.F += assemble_body_force(patch, mesh, ld["body"])
        else:
            raise ArgumentError("a load needs either 'face' and 'traction' or 'body'")
    for bc in prm.get("bcs", []):
        apply_dirichlet(system, patch, mesh, DirichletSpec(
            faces=bc.get("faces", ()), nodes=bc.get("nodes", ()), component=bc.get("component"),
            value=bc.get("value", 0.0), method=bc.get("method", prm["bc_method"]),
            penalty=float(bc.get("penalty", prm["penalty"]))))
    rep = solve(system, prm["solver"])
    vis = build_vis_mesh(mesh, patch)
    b = recover_fields(patch, mesh, vis, rep.u, mat)
    energy = 0.5 * float(rep.u @ (system.K @ rep.u))
    label = "x".join(str(kv.n_elements) for kv in patch.knot_vectors)
    rows = [_row("elasticity", label, "/".join(map(str, patch.degrees)), system.n_dof, "strain_energy", energy)]
    return CaseResult("elasticity", rows, b, {"strain_energy": energy, "dofs": system.n_dof},
                      patch, mesh, rep.u)


_COMMON = {"bc_method": "direct", "solver": "direct", "penalty": 1e10, "quad": None, "refine": []}

DEFAULTS = {
    "poisson-1d": {"degree": 3, "elements": 4},
    "poisson-1d-gradient": {"degree": 3, "elements": 16, "alpha": 50.0, "c0_at": [0.42, 0.5, 0.58],
                            "quad": 10},
    "plate-hole": {"degree": 2, "elements": [32, 16], "L": 4.0, "R": 1.0,
                   "material": {"E": 1e3, "nu": 0.3, "mode": "plane-stress"}},
    "edge-crack": {"degree": 3, "control_points": [36, 72], "a": 0.3, "b": 1.0, "h": 1.0, "sigma": 1.0,
                   "rd": 2.0, "enriched_quad": 13,
                   "material": {"E": 1e3, "nu": 0.3, "mode": "plane-strain"}},
    "griffith-modeI": {"degree": 3, "elements": [15, 15], "width": 10.0, "a": 100.0, "sigma": 1e4,
                       "rd": 2.0, "enriched_quad": 13, "bc_method": "least-squares",
                       "material": {"E": 1e7, "nu": 0.3, "mode": "plane-strain"}},
    "mode-I-3d": {"degree": [2, 1, 2], "elements": [7, 2, 7], "a": 100.0, "sigma": 1e4, "thickness": 2.0,
                  "enriched_quad": 13, "bc_method": "penalty",
                  "material": {"E": 1e7, "nu": 0.3, "mode": "solid-3D"}},
    "clamped-plate": {"degree": 4, "elements": [16, 16], "L": 1.0, "q": 1.0, "symmetry": False,
                      "reference": 0.00126, "material": {"E": 1e6, "nu": 0.3, "h": 0.01}},
    "pinched-cylinder-3d": {"degree": [2, 2, 2], "elements": [8, 8, 1], "R": 300.0, "half_length": 300.0,
                            "thickness": 3.0, "P": 1.0,
                            "material": {"E": 3e6, "nu": 0.3, "mode": "solid-3D"}},
    "elasticity": {},
}

CASES = {
    "poisson-1d": poisson_1d,
    "poisson-1d-gradient": poisson_1d_gradient,
    "plate-hole": plate_hole,
    "edge-crack": edge_crack,
    "griffith-modeI": griffith_mode_I,
    "mode-I-3d": mode_I_3d,
    "clamped-plate": clamped_plate,
    "pinched-cylinder-3d": pinched_cylinder,
    "elasticity": elasticity,
}


def merged_params(name, overrides=None):
    """Defaults of case ``name`` updated with ``overrides``."""
    if name not in CASES:
        raise ArgumentError(f"unknown case {name!r}; available: {', '.join(CASES)}")
    prm = dict(_COMMON)
    prm.update(DEFAULTS[name])
    for k, v in (overrides or {}).items():
        if k == "material" and isinstance(v, dict):
            prm["material"] = {**prm.get("material", {}), **v}
        elif v is not None:
            prm[k] = v
    return prm


def run_case(name, overrides=None):
    """Run a catalog case and time it."""
    prm = merged_params(name, overrides)
    t0 = time.perf_counter()
    res = CASES[name](prm)
    res.elapsed = time.perf_counter() - t0
    res.extra.setdefault("params", prm)
    return res
