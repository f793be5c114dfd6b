import numpy as np
import pytest

from isoga import geometry
from isoga.errors import ArgumentError, SingularGeometryError
from isoga.mesh import extract_boundary, generate_mesh
from isoga.quadrature import (
    gauss_legendre,
    gauss_rule,
    integrate,
    map_point,
    parent_jacobian,
    parent_to_param,
    tabulate,
    tabulate_boundary,
)
from isoga.spline import NurbsPatch, eval_point, h_refine

ANNULUS_AREA = np.pi * (0.5**2 - 0.3**2) / 4


class TestGaussRule:
    def test_two_point(self):
        x, w = gauss_legendre(2)
        np.testing.assert_allclose(x, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
        np.testing.assert_allclose(w, [1, 1], atol=1e-15)

    def test_one_point_2d(self):
        r = gauss_rule(1, 2)
        np.testing.assert_array_equal(r.points, [[0, 0]])
        np.testing.assert_allclose(r.weights, [4])

    def test_x6_with_four_points(self):
        x, w = gauss_legendre(4)
        assert abs(np.sum(w * x**6) - 2 / 7) < 1e-14

    @pytest.mark.parametrize("n", [1, 2, 5, 11, 20, 30])
    def test_exactness_and_symmetry(self, n):
        x, w = gauss_legendre(n)
        assert abs(w.sum() - 2) < 1e-13
        np.testing.assert_array_equal(x, -x[::-1])
        assert np.all(w > 0)
        for k in range(0, 2 * n, 2):
            assert abs(np.sum(w * x**k) - 2 / (k + 1)) < 1e-13

    def test_tensor_weights(self):
        r = gauss_rule((2, 3, 4))
        assert r.n_q == 24 and r.dim == 3
        assert abs(r.weights.sum() - 8) < 1e-13
        # x-fastest
        assert r.points[0, 0] < r.points[1, 0] and r.points[0, 1] == r.points[1, 1]

    @pytest.mark.parametrize("n", [0, 31])
    def test_bad_order(self, n):
        with pytest.raises(ArgumentError):
            gauss_rule(n)


class TestParentMap:
    def test_endpoints_and_midpoint(self):
        assert parent_to_param([0, 0.5], -1.0) == pytest.approx(0.0)
        assert parent_to_param([0, 0.5], 0.0) == pytest.approx(0.25)
        assert parent_to_param([0, 0.5], 1.0) == pytest.approx(0.5)

    def test_jacobian(self):
        assert parent_jacobian([[0, 0.5], [0, 0.5]]) == pytest.approx(1 / 16)


class TestMapPoint:
    def test_identity_patch(self):
        patch = geometry.rectangle(1, 2)
        mesh = generate_mesh(patch)
        m = map_point(patch, mesh, 3, [0.2, -0.4])
        np.testing.assert_allclose(m.J, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(m.dRdx, m.dRdxi, atol=1e-14)
        assert m.det == pytest.approx(m.det_param * m.det_parent)

    def test_scaled_patch_halves_derivatives(self):
        a = geometry.rectangle(2, 2)
        b = NurbsPatch(a.knot_vectors, 2 * a.points, a.weights)
        ma = map_point(a, generate_mesh(a), 1, [0.3, 0.1])
        mb = map_point(b, generate_mesh(b), 1, [0.3, 0.1])
        np.testing.assert_allclose(mb.dRdx, 0.5 * ma.dRdx, atol=1e-14)

    def test_annulus_fd_jacobian(self):
        patch = geometry.quarter_annulus(0.3, 0.5)
        mesh = generate_mesh(patch)
        m = map_point(patch, mesh, 0, [0.37, -0.21])
        h = 1e-6
        J = np.column_stack([
            (eval_point(patch, m.xi + h * e) - eval_point(patch, m.xi - h * e)) / (2 * h)
            for e in np.eye(2)
        ])
        assert abs(m.det_param) == pytest.approx(abs(np.linalg.det(J)), rel=1e-6)

    def test_composition_and_pou(self, test_patches):
        for name in ("annulus", "plate_hole", "cylinder"):
            patch = test_patches[name]
            mesh = generate_mesh(patch)
            xt = np.linspace(-0.7, 0.6, patch.dim_p)
            m = map_point(patch, mesh, mesh.n_el - 1, xt)
            np.testing.assert_allclose(m.x, eval_point(patch, m.xi), atol=1e-14)
            np.testing.assert_allclose(m.dRdx.sum(axis=0), 0, atol=1e-12)

    def test_singular_corner(self):
        patch = geometry.plate_with_hole()
        mesh = generate_mesh(patch)
        with pytest.raises(SingularGeometryError) as exc:
            map_point(patch, mesh, 0, [1.0, 1.0])
        assert exc.value.element == 0


class TestIntegrate:
    def test_unit_square(self):
        patch = geometry.rectangle(2, 3)
        mesh = generate_mesh(patch)
        assert integrate(patch, mesh, lambda x: np.ones(len(x))) == pytest.approx(1, abs=1e-14)
        assert integrate(patch, mesh, lambda x: x[:, 0]) == pytest.approx(0.5, abs=1e-14)

    def test_annulus_area(self):
        patch = h_refine(geometry.quarter_annulus(0.3, 0.5), 3)
        mesh = generate_mesh(patch)
        area = integrate(patch, mesh, lambda x: np.ones(len(x)))
        assert abs(area - ANNULUS_AREA) < 1e-10

    def test_rational_convergence(self):
        patch = geometry.quarter_annulus(0.3, 0.5)
        mesh = generate_mesh(patch)
        one = lambda x: np.ones(len(x))
        err = [abs(integrate(patch, mesh, one, gauss_rule(n, 2)) - ANNULUS_AREA) for n in range(2, 7)]
        assert all(b < a for a, b in zip(err, err[1:]))

    def test_cylinder_volume(self, test_patches):
        patch = test_patches["cylinder"]
        mesh = generate_mesh(patch)
        vol = integrate(patch, mesh, lambda x: np.ones(len(x)), gauss_rule(12, 3))
        exact = np.pi / 4 * (301.5**2 - 298.5**2) * 300
        assert vol == pytest.approx(exact, rel=1e-8)

    def test_table_shapes(self, annulus):
        mesh = generate_mesh(annulus)
        t = tabulate(annulus, mesh, order=2)
        assert t.R.shape == (1, 6, 6)
        assert t.d2Rdx.shape == (1, 6, 6, 2, 2)
        np.testing.assert_allclose(t.R.sum(axis=2), 1, atol=1e-14)


class TestBoundaryTable:
    def test_arc_length_and_normal(self):
        patch = geometry.quarter_annulus(0.3, 0.5)
        mesh = generate_mesh(patch)
        t = tabulate_boundary(patch, extract_boundary(mesh, patch, "eta1"), gauss_rule(10))
        assert t.wdet.sum() == pytest.approx(np.pi * 0.5 / 2, rel=1e-8)
        radial = t.x / np.linalg.norm(t.x, axis=-1, keepdims=True)
        np.testing.assert_allclose(t.normal, radial, atol=1e-12)

    def test_inner_normal_points_inward(self):
        patch = geometry.quarter_annulus(0.3, 0.5)
        t = tabulate_boundary(patch, extract_boundary(generate_mesh(patch), patch, "eta0"))
        assert np.all(np.sum(t.normal * t.x, axis=-1) < 0)

    def test_face_area(self):
        patch = geometry.box(1, (2, 1, 3), hi=(2.0, 3.0, 4.0))
        t = tabulate_boundary(patch, extract_boundary(generate_mesh(patch), patch, "zeta1"))
        assert t.wdet.sum() == pytest.approx(6.0)
        np.testing.assert_allclose(t.normal.reshape(-1, 3), np.tile([0, 0, 1], (t.wdet.size, 1)), atol=1e-14)
