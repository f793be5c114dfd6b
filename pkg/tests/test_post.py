import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from isoga import geometry
from isoga.assembly import Material, elasticity_D
from isoga.errors import ArgumentError, IOFailure
from isoga.mesh import build_vis_mesh, generate_mesh
from isoga.plate import PlateMaterial
from isoga.post import (
    METRIC_HEADER,
    error_norms,
    load_patch,
    recover_fields,
    stress_names,
    write_bundle,
    write_metrics,
    write_vtk,
    save_patch,
)

MAT = Material(2.0, 0.25)
QUAD = 9

GOLDEN_VTK = """# vtk DataFile Version 3.0
isoga results
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0.0000000000000000e+00 0.0000000000000000e+00 0.0000000000000000e+00
1.0000000000000000e+00 0.0000000000000000e+00 0.0000000000000000e+00
1.0000000000000000e+00 1.0000000000000000e+00 0.0000000000000000e+00
0.0000000000000000e+00 1.0000000000000000e+00 0.0000000000000000e+00
CELLS 1 5
4 0 1 2 3
CELL_TYPES 1
9
POINT_DATA 4
SCALARS t double 1
LOOKUP_TABLE default
5.0000000000000000e-01
2.5000000000000000e-01
0.0000000000000000e+00
-1.0000000000000000e+00
VECTORS displacement double
1.0000000000000000e+00 2.0000000000000000e+00 0.0000000000000000e+00
0.0000000000000000e+00 0.0000000000000000e+00 0.0000000000000000e+00
0.0000000000000000e+00 0.0000000000000000e+00 0.0000000000000000e+00
0.0000000000000000e+00 0.0000000000000000e+00 0.0000000000000000e+00
"""

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def _linear_field(patch, a):
    """Control values of ``u = A x`` (affine maps reproduce it exactly)."""
    return (patch.points @ np.asarray(a).T).ravel()


def _setup(p=2, n=(3, 2)):
    patch = geometry.rectangle(p, n, (0.0, 0.0), (2.0, 1.0))
    mesh = generate_mesh(patch)
    return patch, mesh, build_vis_mesh(mesh, patch)


class TestVtk:
    def test_legacy_golden(self, tmp_path):
        disp = np.zeros((4, 2))
        disp[0] = [1.0, 2.0]
        data = {"t": np.array([0.5, 0.25, 0.0, -1.0]), "displacement": disp}
        path = write_vtk(tmp_path / "a.vtk", SQUARE, [[0, 1, 2, 3]], QUAD, data)
        assert open(path).read() == GOLDEN_VTK

    def test_vtu_structure(self, tmp_path):
        patch, mesh, vis = _setup()
        b = recover_fields(patch, mesh, vis, np.zeros(2 * patch.n_points), MAT)
        root = ET.parse(write_bundle(b, tmp_path / "r.vtu")).getroot()
        piece = root.find(".//Piece")
        assert int(piece.get("NumberOfPoints")) == vis.n_nodes
        assert int(piece.get("NumberOfCells")) == vis.cells.shape[0]
        arrays = {a.get("Name"): a for a in root.iter("DataArray")}
        offsets = np.array(arrays["offsets"].text.split(), dtype=int)
        np.testing.assert_array_equal(offsets, 4 * np.arange(1, vis.cells.shape[0] + 1))
        conn = np.array(arrays["connectivity"].text.split(), dtype=int)
        np.testing.assert_array_equal(conn, vis.cells.ravel())
        assert arrays["displacement"].get("NumberOfComponents") == "3"
        assert arrays["stress"].get("NumberOfComponents") == "3"

    def test_vts_needs_3d_grid(self, tmp_path):
        patch = geometry.box(2, (2, 1, 1))
        mesh = generate_mesh(patch)
        vis = build_vis_mesh(mesh, patch)
        b = recover_fields(patch, mesh, vis, np.zeros(3 * patch.n_points), Material(1.0, 0.3, "solid-3D"))
        root = ET.parse(write_bundle(b, tmp_path / "r.vts")).getroot()
        assert root.find(".//StructuredGrid").get("WholeExtent") == " ".join(f"0 {k - 1}" for k in vis.shape)
        with pytest.raises(ArgumentError):
            write_vtk(tmp_path / "b.vts", SQUARE, [[0, 1, 2, 3]], QUAD, {}, shape=(2, 2))

    def test_deterministic(self, tmp_path, rng):
        patch, mesh, vis = _setup()
        u = rng.standard_normal(2 * patch.n_points)
        a = write_bundle(recover_fields(patch, mesh, vis, u, MAT), tmp_path / "a.vtu")
        b = write_bundle(recover_fields(patch, mesh, vis, u, MAT), tmp_path / "b.vtu")
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_bad_extension_and_path(self, tmp_path):
        with pytest.raises(ArgumentError):
            write_vtk(tmp_path / "a.txt", SQUARE, [[0, 1, 2, 3]], QUAD, {})
        with pytest.raises(IOFailure):
            write_vtk(tmp_path / "missing" / "a.vtk", SQUARE, [[0, 1, 2, 3]], QUAD, {})


class TestRecovery:
    def test_rigid_motion_is_stress_free(self):
        patch, mesh, vis = _setup()
        P = patch.points
        u = np.column_stack([0.3 - 0.01 * P[:, 1], -0.2 + 0.01 * P[:, 0]]).ravel()
        b = recover_fields(patch, mesh, vis, u, MAT)
        np.testing.assert_allclose(b.stress, 0.0, atol=1e-14)
        X = vis.nodes
        np.testing.assert_allclose(b.displacement, np.column_stack([0.3 - 0.01 * X[:, 1], -0.2 + 0.01 * X[:, 0]]), atol=1e-14)

    def test_uniform_strain(self):
        patch, mesh, vis = _setup()
        A = np.array([[1e-3, 2e-3], [0.0, -5e-4]])
        b = recover_fields(patch, mesh, vis, _linear_field(patch, A), MAT)
        ref = elasticity_D(MAT) @ [1e-3, -5e-4, 2e-3]
        np.testing.assert_allclose(b.stress, np.tile(ref, (vis.n_nodes, 1)), atol=1e-15)
        assert stress_names(b.stress.shape[1]) == ["xx", "yy", "xy"]

    @pytest.mark.parametrize("p,continuous", [(2, True), (1, False)])
    def test_shared_nodes(self, rng, p, continuous):
        # C1 bases give stresses that agree across cells; C0 ones do not
        patch, mesh, vis = _setup(p, (4, 3))
        b = recover_fields(patch, mesh, vis, rng.standard_normal(2 * patch.n_points), MAT)
        gap = np.abs(b.cell_stress - b.stress[vis.cells]).max() / np.abs(b.stress).max()
        assert (gap < 1e-12) == continuous

    def test_scalar_flux(self):
        patch, mesh, vis = _setup()
        b = recover_fields(patch, mesh, vis, 3 * patch.points[:, 0] - patch.points[:, 1])
        np.testing.assert_allclose(b.stress, np.tile([3.0, -1.0], (vis.n_nodes, 1)), atol=1e-13)

    def test_plate_moments(self):
        patch, mesh, vis = _setup(3, (2, 2))
        mat = PlateMaterial(1.0, 0.3, 0.2)
        # w = x y: only the twisting curvature 2 w_xy = 2
        w = patch.points[:, 0] * patch.points[:, 1]
        b = recover_fields(patch, mesh, vis, w, mat)
        np.testing.assert_allclose(b.stress, np.tile(-mat.D @ [0.0, 0.0, 2.0], (vis.n_nodes, 1)), atol=1e-13)

    def test_singular_corner_shifted(self):
        patch = geometry.plate_with_hole()
        mesh = generate_mesh(patch)
        vis = build_vis_mesh(mesh, patch)
        b = recover_fields(patch, mesh, vis, np.zeros(2 * patch.n_points), MAT)
        assert np.all(np.isfinite(b.stress))


class TestErrorNorms:
    def test_exact_reproduction(self):
        patch, mesh, _ = _setup()
        A = np.array([[1.0, 2.0], [-1.0, 0.5]])
        l2, en = error_norms(patch, mesh, _linear_field(patch, A), lambda x: x @ A.T,
                             lambda x: np.broadcast_to(A, (len(x), 2, 2)), mat=MAT)
        assert l2 < 1e-14 and en < 1e-14

    def test_zero_solution_is_unit_error(self):
        patch, mesh, _ = _setup()
        l2, en = error_norms(patch, mesh, np.zeros(patch.n_points), lambda x: np.sin(x[:, 0]),
                             lambda x: np.column_stack([np.cos(x[:, 0]), 0 * x[:, 0]]))
        assert l2 == pytest.approx(1.0) and en == pytest.approx(1.0)

    def test_scalar_l2_value(self):
        # u_h = 1/2 against u = 1: relative error 1/2 whatever the area
        patch, mesh, _ = _setup()
        l2, en = error_norms(patch, mesh, np.full(patch.n_points, 0.5), lambda x: np.ones(len(x)))
        assert l2 == pytest.approx(0.5) and en is None


class TestFiles:
    def test_metrics_csv(self, tmp_path):
        path = tmp_path / "m.csv"
        row = {"case": "c", "mesh": "4x4", "p": 2, "dofs": 50, "metric": "K_I", "value": 1 / 3, "ref": 0.5, "rel_error": 0.1}
        write_metrics(path, [row])
        write_metrics(path, [dict(row, value=2.0)], append=True)
        rows = list(csv.reader(open(path)))
        assert tuple(rows[0]) == METRIC_HEADER
        assert rows[1][5] == "0.3333333333" and rows[2][5] == "2"
        assert len(rows) == 3

    def test_patch_roundtrip(self, tmp_path, test_patches):
        for name, patch in test_patches.items():
            save_patch(patch, tmp_path / f"{name}.json")
            back = load_patch(tmp_path / f"{name}.json")
            np.testing.assert_array_equal(back.points, patch.points)
            np.testing.assert_array_equal(back.weights, patch.weights)
            for a, b in zip(back.knot_vectors, patch.knot_vectors):
                np.testing.assert_array_equal(a.knots, b.knots)

    def test_missing_patch(self, tmp_path):
        with pytest.raises(IOFailure):
            load_patch(tmp_path / "none.json")
