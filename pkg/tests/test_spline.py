"""Knot vectors, B-spline/NURBS bases, refinement and Bezier extraction."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import W45, cox_de_boor, quarter_circle
from isoga import geometry
from isoga.errors import ArgumentError, DomainError
from isoga.spline import (
    KnotVector,
    NurbsPatch,
    bernstein,
    bezier_extract,
    bezier_extract_patch,
    bspline_basis,
    bspline_ders,
    elevate_degree,
    eval_point,
    find_span,
    from_homogeneous,
    h_refine,
    insert_knot,
    k_refine,
    nurbs_basis_ders,
    to_homogeneous,
)


class TestKnotVector:
    def test_open_uniform(self):
        kv = KnotVector.open_uniform(2, 4)
        assert_allclose(kv.knots, [0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1])
        assert kv.n == 6 and kv.n_elements == 4 and kv.is_open

    def test_rejects_decreasing(self):
        with pytest.raises(ArgumentError):
            KnotVector([0, 0, 1, 0.5, 1, 1], 1)

    def test_rejects_interior_multiplicity_above_p(self):
        with pytest.raises(ArgumentError):
            KnotVector([0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1], 2)

    def test_greville(self):
        assert_allclose(KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2).greville(), [0, 0.25, 0.75, 1])

    def test_interval_round_trip(self):
        kv = KnotVector([0, 0, 0, 0.3, 1, 1, 1], 2)
        back = KnotVector.from_intervals(kv.intervals(), 2)
        assert_allclose(back.knots, kv.knots)


class TestFindSpan:
    kv = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)

    def test_interior(self):
        assert find_span(self.kv, 0.3) == 2

    def test_last_knot(self):
        assert find_span(self.kv, 1.0) == 3

    def test_single_span(self):
        assert find_span(KnotVector([0, 0, 1, 1], 1), 0.0) == 1

    def test_matches_linear_scan(self, rng):
        kv = KnotVector([0, 0, 0, 1, 2, 3, 4, 4, 5, 5, 5], 2)
        for x in rng.uniform(0, 5, 50):
            scan = max(s for s in range(kv.knots.size - 1) if kv.knots[s] <= x < kv.knots[s + 1])
            assert find_span(kv, x) == scan

    @pytest.mark.parametrize("x", [-0.1, 1.2])
    def test_outside(self, x):
        with pytest.raises(DomainError):
            find_span(self.kv, x)


class TestBsplineBasis:
    def test_quadratic_bernstein(self):
        assert_allclose(bspline_basis(KnotVector([0, 0, 0, 1, 1, 1], 2), 0.5), [0.25, 0.5, 0.25])

    def test_linear_hats(self):
        assert_allclose(bspline_basis(KnotVector([0, 0, 1, 1], 1), 0.3), [0.7, 0.3])

    def test_against_recursive_oracle(self, rng):
        kv = KnotVector([0, 0, 0, 1, 2, 3, 4, 4, 5, 5, 5], 2)
        for x in np.r_[2.5, rng.uniform(0, 5, 20), 5.0]:
            s = find_span(kv, x)
            ref = [cox_de_boor(kv.knots, 2, i, x) for i in range(s - 2, s + 1)]
            assert_allclose(bspline_basis(kv, x), ref, atol=1e-14)

    def test_c0_at_double_knot(self):
        # the function peaking at the double knot x=4 interpolates there
        kv = KnotVector([0, 0, 0, 1, 2, 3, 4, 4, 5, 5, 5], 2)
        N = bspline_basis(kv, 4.0)
        assert_allclose(np.sort(N), [0, 0, 1], atol=1e-15)
        assert cox_de_boor(kv.knots, 2, 5, 4.0) == 1.0


class TestBsplineDers:
    def test_linear_slope(self):
        assert_allclose(bspline_ders(KnotVector([0, 0, 1, 1], 1), 0.5, 1)[1], [-1, 1])

    def test_quadratic_second(self):
        assert_allclose(bspline_ders(KnotVector([0, 0, 0, 1, 1, 1], 2), 0.5, 2)[2], [2, -4, 2])

    def test_derivative_sums_vanish(self, rng):
        kv = KnotVector([0, 0, 0, 0, 0.3, 0.5, 0.5, 1, 1, 1, 1], 3)
        for x in rng.random(20):
            d = bspline_ders(kv, x, 2)
            assert abs(d[1].sum()) < 1e-12 and abs(d[2].sum()) < 1e-10

    def test_order_above_degree(self):
        with pytest.raises(ArgumentError):
            bspline_ders(KnotVector([0, 0, 1, 1], 1), 0.5, 2)

    def test_finite_differences(self, rng):
        kv = KnotVector([0, 0, 0, 0, 0.3, 0.6, 1, 1, 1, 1], 3)
        h = 1e-6
        for x in 0.05 + 0.9 * rng.random(10):
            s = find_span(kv, x)
            d = bspline_ders(kv, x, 2, s)
            up, dn = bspline_ders(kv, x + h, 1, s), bspline_ders(kv, x - h, 1, s)
            assert_allclose((up[0] - dn[0]) / (2 * h), d[1], rtol=1e-6, atol=1e-7)
            assert_allclose((up[1] - dn[1]) / (2 * h), d[2], rtol=1e-4, atol=1e-5)

    def test_continuity_across_knot(self):
        # multiplicity m=2, p=3: C1 across 0.5, second derivative jumps
        kv = KnotVector([0, 0, 0, 0, 0.5, 0.5, 1, 1, 1, 1], 3)
        patch = NurbsPatch([kv], np.linspace(0, 1, kv.n)[:, None] ** 2)
        left = patch.basis([[0.5]], 2, spans=[[3]])
        right = patch.basis([[0.5]], 2, spans=[[5]])

        def dense(res, k):
            M = np.zeros(kv.n)
            M[res[0][0]] = res[1 + k][0].reshape(res[1][0].shape[0], -1)[:, 0] if k else res[1][0]
            return M

        for k in (0, 1):
            assert_allclose(dense(left, k), dense(right, k), atol=1e-8)
        assert np.abs(dense(left, 2) - dense(right, 2)).max() > 1e-3


class TestNurbs:
    def test_unit_weights_match_bspline(self, rng):
        p = geometry.rectangle((2, 3), (3, 2))
        xi = rng.random((10, 2))
        idx, R = p.basis(xi, 0)
        for q in range(10):
            nu = bspline_basis(p.knot_vectors[0], xi[q, 0])
            nv = bspline_basis(p.knot_vectors[1], xi[q, 1])
            assert_allclose(np.sort(R[q]), np.sort(np.outer(nv, nu).ravel()), atol=1e-14)

    def test_quarter_circle_end(self):
        R = nurbs_basis_ders(quarter_circle(), [0.0], 0)[1]
        assert_allclose(R, [1, 0, 0])

    def test_quarter_circle_midpoint(self):
        c = quarter_circle()
        x = eval_point(c, [0.5])
        assert_allclose(x, [np.sqrt(0.5)] * 2, atol=1e-15)
        W = 0.25 + 0.5 * W45 + 0.25
        assert_allclose(nurbs_basis_ders(c, [0.5], 0)[1], [0.25 / W, 0.5 * W45 / W, 0.25 / W])

    def test_circle_radius(self):
        xi = np.linspace(0, 1, 101)[:, None]
        assert np.abs(np.linalg.norm(quarter_circle().eval(xi), axis=1) - 1).max() < 1e-12

    def test_open_end_interpolates(self):
        c = quarter_circle()
        assert_allclose(eval_point(c, [0.0]), [1, 0], atol=0)

    def test_bilinear_midpoint(self):
        p = NurbsPatch([KnotVector([0, 0, 1, 1], 1)] * 2, [[0, 0], [1, 0], [0, 1], [1, 1]])
        assert_allclose(eval_point(p, [0.5, 0.5]), [0.5, 0.5])

    def test_partition_and_local_support(self, test_patches, rng):
        for p in test_patches.values():
            xi = rng.random((84, p.dim_p))
            idx, R = p.basis(xi, 0)
            assert R.shape[1] == np.prod([d + 1 for d in p.degrees])
            assert_allclose(R.sum(axis=1), 1.0, atol=1e-12)
            assert R.min() >= -1e-14

    @pytest.mark.parametrize("name", ["annulus", "plate_hole", "cylinder"])
    def test_rational_derivatives_fd(self, test_patches, name, rng):
        p = test_patches[name]
        xi = 0.1 + 0.8 * rng.random((50, p.dim_p))
        _, R, dR, d2R = p.basis(xi, 2)
        h = 1e-6
        for d in range(p.dim_p):
            e = np.zeros(p.dim_p)
            e[d] = h
            fd = (p.basis(xi + e, 0)[1] - p.basis(xi - e, 0)[1]) / (2 * h)
            assert_allclose(fd, dR[..., d], rtol=1e-6, atol=1e-6)
            fd2 = (p.basis(xi + e * 100, 1)[2] - p.basis(xi - e * 100, 1)[2]) / (200 * h)
            assert_allclose(fd2, d2R[..., d], rtol=1e-4, atol=1e-4)

    def test_second_derivative_symmetry(self, annulus, rng):
        _, _, _, d2R = annulus.basis(rng.random((10, 2)), 2)
        assert_allclose(d2R, np.swapaxes(d2R, -1, -2), atol=1e-12)

    def test_outside_domain(self, annulus):
        with pytest.raises(DomainError):
            annulus.eval([[1.5, 0.5]])

    def test_serialization_round_trip(self, annulus):
        back = NurbsPatch.from_dict(annulus.to_dict())
        assert_allclose(back.points, annulus.points)
        assert_allclose(back.weights, annulus.weights)

    def test_from_dict_dims_mismatch(self, annulus):
        d = annulus.to_dict()
        d["dims"] = [2, 2]
        with pytest.raises(ArgumentError):
            NurbsPatch.from_dict(d)


class TestHomogeneous:
    def test_example(self):
        assert_allclose(to_homogeneous([[2.0, 0.0, 0.0]], [0.5]), [[1, 0, 0, 0.5]])

    def test_unit_weight(self):
        assert_allclose(to_homogeneous([[1.0, 2.0]], [1.0]), [[1, 2, 1]])

    def test_round_trip(self, rng):
        P, w = rng.random((7, 3)), 0.2 + rng.random(7)
        Q, v = from_homogeneous(to_homogeneous(P, w))
        assert_allclose(Q, P, atol=1e-14)
        assert_allclose(v, w, atol=1e-14)

    def test_nonpositive_weight(self):
        with pytest.raises(ArgumentError):
            to_homogeneous([[1.0, 0.0]], [0.0])


class TestRefinement:
    def test_insert_into_single_span(self):
        c = insert_knot(quarter_circle(), 0, 0.5)
        assert_allclose(c.knot_vectors[0].knots, [0, 0, 0, 0.5, 1, 1, 1])
        assert c.n_points == 4
        xi = np.linspace(0, 1, 100)[:, None]
        assert_allclose(c.eval(xi), quarter_circle().eval(xi), atol=1e-12)

    def test_insert_p_times_gives_c0(self):
        p = geometry.line(3, 2)
        p = p.copy_with(points=p.points ** 2)
        q = insert_knot(p, 0, 0.5, 2)
        assert q.knot_vectors[0].multiplicity(0.5) == 3
        # interpolatory at the C0 knot
        _, R = q.basis([[0.5]], 0)
        assert_allclose(np.sort(R[0])[-1], 1.0, atol=1e-14)

    def test_multiplicity_overflow(self):
        with pytest.raises(ArgumentError):
            insert_knot(geometry.line(2, 2), 0, 0.5, 2)

    def test_h_refine_midpoints(self):
        p = h_refine(geometry.line(2, 2), 1)
        assert_allclose(p.knot_vectors[0].breaks, [0, 0.25, 0.5, 0.75, 1])

    @pytest.mark.parametrize("name", ["annulus", "plate_hole", "cylinder"])
    def test_geometry_invariance(self, test_patches, name, rng):
        p = test_patches[name]
        xi = rng.random((100, p.dim_p))
        x0 = p.eval(xi)
        for d in range(p.dim_p):
            times = min(2, p.degrees[d])
            assert_allclose(insert_knot(p, d, 0.37, times).eval(xi), x0, atol=1e-12 * np.abs(x0).max())
            q = elevate_degree(p, d, 2)
            assert q.degrees[d] == p.degrees[d] + 2
            assert_allclose(q.eval(xi), x0, atol=1e-12 * np.abs(x0).max())

    def test_elevate_segment(self):
        seg = NurbsPatch([KnotVector([0, 0, 1, 1], 1)], [[0.0, 0.0], [2.0, 4.0]])
        assert_allclose(elevate_degree(seg, 0, 1).points, [[0, 0], [1, 2], [2, 4]])

    def test_elevation_raises_interior_multiplicity(self):
        q = elevate_degree(geometry.line(2, 3), 0, 1)
        assert all(q.knot_vectors[0].multiplicity(v) == 2 for v in q.knot_vectors[0].breaks[1:-1])

    def test_k_refinement_fewer_functions(self):
        base = geometry.line(1, 1)
        k = k_refine(base, 2, 2)
        hp = elevate_degree(h_refine(base, 2), 0, 2)
        assert k.degrees == hp.degrees
        assert k.n_points < hp.n_points


class TestBezier:
    def test_single_segment_identity(self):
        assert_allclose(bezier_extract(KnotVector([0, 0, 0, 1, 1, 1], 2))[0], np.eye(3))

    def test_bernstein_at_left_end(self):
        assert_allclose(bernstein(3, [-1.0])[0, 0], [1, 0, 0, 0])

    @pytest.mark.parametrize("knots,p", [
        ([0, 0, 0, 0.5, 1, 1, 1], 2),
        ([0, 0, 0, 0, 0.2, 0.4, 0.4, 0.7, 1, 1, 1, 1], 3),
        ([0, 0, 0, 0, 0, 0.25, 0.5, 0.5, 0.5, 0.75, 1, 1, 1, 1, 1], 4),
    ])
    def test_extraction_identity(self, knots, p, rng):
        kv = KnotVector(knots, p)
        C = bezier_extract(kv)
        assert C.shape == (kv.n_elements, p + 1, p + 1)
        assert_allclose(C.sum(axis=1), 1.0, atol=1e-13)  # column sums
        for e, s in enumerate(kv.element_spans()):
            t = rng.uniform(-1, 1, 20)
            lo, hi = kv.knots[s], kv.knots[s + 1]
            xi = 0.5 * ((hi - lo) * t + hi + lo)
            N = np.array([bspline_basis(kv, x, s) for x in xi])
            assert np.abs(N - bernstein(p, t)[:, 0] @ C[e].T).max() < 1e-12

    def test_non_open_rejected(self):
        with pytest.raises(ArgumentError):
            bezier_extract(KnotVector([0, 1, 2, 3, 4, 5], 2))

    def test_patch_operators_are_kronecker(self):
        p = geometry.rectangle((2, 2), (2, 3))
        ops = bezier_extract_patch(p)
        Cu, Cv = bezier_extract(p.knot_vectors[0]), bezier_extract(p.knot_vectors[1])
        assert ops.shape == (6, 9, 9)
        assert_allclose(ops[4], np.kron(Cv[2], Cu[0]))
