import numpy as np
import pytest

from isoga import geometry
from isoga.assembly import Material, assemble_elasticity, assemble_poisson_1d, assemble_traction
from isoga.bc import (
    DirichletSpec,
    apply_direct,
    apply_lagrange,
    apply_least_squares,
    apply_penalty,
    couple_dofs_penalty,
    least_squares_project,
)
from isoga.errors import ArgumentError, MethodError, SingularConstraintError
from isoga.mesh import extract_boundary, face_nodes, generate_mesh
from isoga.solver import solve
from isoga.spline import h_refine

MAT = Material(1.0, 0.3)


def _grid_2x4():
    patch = geometry.rectangle((1, 2), (1, 2))
    return patch, generate_mesh(patch)


def _cantilever(n=(4, 2)):
    patch = geometry.rectangle(2, n, hi=(4.0, 1.0))
    mesh = generate_mesh(patch)
    s = assemble_elasticity(patch, mesh, MAT)
    s.F += assemble_traction(patch, extract_boundary(mesh, patch, "xi1"), [0.0, -1e-3])
    return patch, mesh, s


def _solve_with(method, **kw):
    patch, mesh, s = _cantilever()
    spec = DirichletSpec(faces=["xi0"], method=method, **kw)
    {"direct": apply_direct, "penalty": apply_penalty, "lagrange": apply_lagrange}[method](s, patch, mesh, spec)
    return solve(s).u


class TestDirect:
    def test_edge_ux_zero(self):
        patch, mesh = _grid_2x4()
        s = assemble_elasticity(patch, mesh, MAT)
        apply_direct(s, patch, mesh, DirichletSpec(faces=["xi1"], component=0))
        assert sorted(s.fixed) == [2 * (n - 1) for n in (2, 4, 6, 8)]
        assert set(s.fixed.values()) == {0.0}

    def test_edge_uniform_uy(self):
        patch, mesh = _grid_2x4()
        s = assemble_elasticity(patch, mesh, MAT)
        apply_direct(s, patch, mesh, DirichletSpec(faces=["xi0"], component=1, value=0.25))
        assert s.fixed == {2 * (n - 1) + 1: 0.25 for n in (1, 3, 5, 7)}

    def test_no_constraints(self):
        patch, mesh = _grid_2x4()
        s = assemble_elasticity(patch, mesh, MAT)
        K0 = s.K.toarray()
        apply_direct(s, patch, mesh, DirichletSpec())
        assert s.fixed == {}
        np.testing.assert_array_equal(s.K.toarray(), K0)

    def test_varying_field_rejected(self):
        patch, mesh = _grid_2x4()
        s = assemble_elasticity(patch, mesh, MAT)
        with pytest.raises(MethodError):
            apply_direct(s, patch, mesh, DirichletSpec(faces=["xi0"], field=lambda x: x))

    def test_interior_point_rejected(self):
        patch, mesh = _grid_2x4()
        s = assemble_elasticity(patch, mesh, MAT)
        with pytest.raises(MethodError):
            apply_direct(s, patch, mesh, DirichletSpec(nodes=[2], component=1, value=0.1))
        apply_direct(s, patch, mesh, DirichletSpec(nodes=[2], component=1, value=0.0))
        apply_direct(s, patch, mesh, DirichletSpec(nodes=[7], component=1, value=0.1))

    def test_reactions_balance_load(self):
        patch, mesh, s = _cantilever()
        apply_direct(s, patch, mesh, DirichletSpec(faces=["xi0"]))
        rep = solve(s)
        ry = sum(v for d, v in rep.reactions.items() if d % 2 == 1)
        assert ry == pytest.approx(1e-3, rel=1e-10)


class TestMethodConsistency:
    def test_direct_penalty_lagrange_agree(self):
        ud = _solve_with("direct")
        up = _solve_with("penalty", penalty=1e10)
        ul = _solve_with("lagrange")
        scale = np.abs(ud).max()
        assert np.abs(up - ud).max() < 1e-5 * scale
        assert np.abs(ul - ud).max() < 1e-5 * scale

    def test_penalty_zero_is_noop(self):
        patch, mesh, s = _cantilever()
        K0 = s.K.toarray()
        apply_penalty(s, patch, mesh, DirichletSpec(faces=["xi0"]), alpha=0.0)
        np.testing.assert_array_equal(s.K.toarray(), K0)

    def test_penalty_negative(self):
        patch, mesh, s = _cantilever()
        with pytest.raises(ArgumentError):
            apply_penalty(s, patch, mesh, DirichletSpec(faces=["xi0"]), alpha=-1.0)


class TestLagrange:
    def test_single_pin_matches_direct(self):
        patch = geometry.line(2, 4)
        mesh = generate_mesh(patch)
        a = assemble_poisson_1d(patch, mesh, 1.0)
        b = assemble_poisson_1d(patch, mesh, 1.0)
        apply_direct(a, patch, mesh, DirichletSpec(nodes=[0, patch.n_points - 1]))
        apply_lagrange(b, patch, mesh, DirichletSpec(nodes=[0, patch.n_points - 1]))
        np.testing.assert_allclose(solve(b).u, solve(a).u, atol=1e-14)

    def test_constraint_residual(self):
        patch, mesh, s = _cantilever()
        g = lambda x: np.column_stack([1e-3 * x[:, 1], 2e-3 * x[:, 1] ** 2])
        apply_lagrange(s, patch, mesh, DirichletSpec(faces=["xi0"], field=g))
        u = solve(s).u
        G, gv = s.constraints[0]
        assert np.abs(G @ u - gv).max() < 1e-10 * np.abs(gv).max()
        # the quadratic trace is reproduced exactly by the quadratic basis
        y = np.linspace(0, 1, 11)
        bm = extract_boundary(mesh, patch, "xi0")
        idx, R = patch.basis(bm.embed(y[:, None]), 0)
        uy = np.sum(R * u.reshape(-1, 2)[idx, 1], axis=1)
        np.testing.assert_allclose(uy, 2e-3 * y**2, atol=1e-12)

    def test_duplicate_rows(self):
        patch, mesh, s = _cantilever()
        apply_lagrange(s, patch, mesh, DirichletSpec(nodes=[0], component=0))
        with pytest.raises(SingularConstraintError):
            apply_lagrange(s, patch, mesh, DirichletSpec(nodes=[0], component=0))


class TestLeastSquares:
    def test_linear_reproduction(self):
        patch = geometry.rectangle(3, (4, 3), hi=(2.0, 1.0))
        mesh = generate_mesh(patch)
        g = lambda x: np.column_stack([0.3 + 2 * x[:, 1], -x[:, 1]])
        nodes, q = least_squares_project(patch, mesh, ["xi0"], g, 2)
        bm = extract_boundary(mesh, patch, "xi0")
        y = np.linspace(0, 1, 50)
        bidx, R = bm.patch.basis(y[:, None], 0)
        pos = np.searchsorted(nodes, bm.nodes[bidx])
        vals = np.einsum("qa,qac->qc", R, q[pos])
        np.testing.assert_allclose(vals, g(np.column_stack([np.zeros(50), y])), atol=1e-10)

    def test_constant(self, annulus):
        patch = h_refine(geometry.refine_to(annulus, (3, 2), (1, 1)), 2)
        mesh = generate_mesh(patch)
        nodes, q = least_squares_project(patch, mesh, ["eta1", "xi0"], [1.5], 1)
        np.testing.assert_allclose(q, 1.5, atol=1e-12)

    def test_only_boundary_points_and_optimality(self, annulus):
        patch = h_refine(geometry.refine_to(annulus, (2, 2), (1, 1)), 2)
        mesh = generate_mesh(patch)
        g = lambda x: np.sin(3 * x[:, :1])
        nodes, q, ps = least_squares_project(patch, mesh, ["eta1"], g, 1, return_system=True)
        assert set(nodes) <= set(face_nodes(patch, "eta1").tolist())
        assert ps.A.shape == (nodes.size, nodes.size)
        np.testing.assert_allclose(ps.A, ps.A.T)
        f0 = ps.objective(q)
        for a in range(nodes.size):
            for h in (1e-3, -1e-3):
                dq = q.copy()
                dq[a] += h
                assert ps.objective(dq) > f0

    def test_too_few_points(self, annulus):
        mesh = generate_mesh(annulus)
        with pytest.raises(ArgumentError):
            least_squares_project(annulus, mesh, ["eta1"], [0.0], 1, n_c=1)

    def test_apply_fixes_projection(self):
        patch, mesh, s = _cantilever()
        apply_least_squares(s, patch, mesh, DirichletSpec(faces=["xi0"], value=[0.0, 0.01], method="least-squares"))
        u = solve(s).u.reshape(-1, 2)
        np.testing.assert_allclose(u[face_nodes(patch, "xi0")], [[0.0, 0.01]] * 4, atol=1e-14)


class TestCoupling:
    def test_pairs_tied(self):
        patch, mesh, s = _cantilever()
        apply_direct(s, patch, mesh, DirichletSpec(faces=["xi0"]))
        tip = face_nodes(patch, "xi1")
        pairs = [(2 * tip[0] + 1, 2 * tip[-1] + 1)]
        s.F[2 * tip[0] + 1] -= 1e-3
        couple_dofs_penalty(s, pairs, 1e7)
        u = solve(s).u
        assert abs(u[pairs[0][0]] - u[pairs[0][1]]) < 1e-5 * np.abs(u).max()

    def test_noops(self):
        patch, mesh, s = _cantilever()
        K0 = s.K.toarray()
        couple_dofs_penalty(s, [(1, 5)], 0.0)
        np.testing.assert_array_equal(s.K.toarray(), K0)
        couple_dofs_penalty(s, [(3, 3)], 1e7)
        np.testing.assert_allclose(s.K.toarray(), K0, atol=1e-9)
