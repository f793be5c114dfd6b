import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from isoga import _kernels_py, geometry, kernels
from isoga.assembly import AssembledSystem, Material, assemble_elasticity, assemble_poisson_1d
from isoga.errors import ConvergenceError, SingularMatrixError
from isoga.mesh import generate_mesh
from isoga.solver import EnvelopeCholesky, pcg, solve, solve_matrix
from isoga.spline import KnotVector, find_spans


def _spd(n, rng, density=0.05):
    A = sp.random(n, n, density=density, random_state=np.random.RandomState(3))
    A = A + A.T
    return (A + sp.diags(np.abs(A).sum(axis=1).A1 + 1.0)).tocsr()


def _system(K, F):
    K = sp.csr_matrix(K)
    return AssembledSystem(K, np.asarray(F, dtype=float), 1, K.shape[0])


class TestDirect:
    def test_identity(self):
        F = np.arange(1.0, 6.0)
        rep = solve(_system(sp.identity(5), F))
        np.testing.assert_array_equal(rep.u, F)
        assert rep.residual == 0.0

    def test_poisson_matches_dense(self):
        patch = geometry.line(2, 4)
        s = assemble_poisson_1d(patch, generate_mesh(patch), lambda x: np.sin(3 * x))
        s.fixed.update({0: 0.0, patch.n_points - 1: 0.0})
        u = solve(s).u
        K, F = s.K.toarray()[1:-1, 1:-1], s.F[1:-1]
        np.testing.assert_allclose(u[1:-1], np.linalg.inv(K) @ F, rtol=1e-12, atol=1e-15)

    def test_unconstrained_elasticity_singular(self):
        patch = geometry.rectangle(2, 2)
        s = assemble_elasticity(patch, generate_mesh(patch), Material(1.0, 0.3))
        s.F[3] = 1.0
        with pytest.raises(SingularMatrixError) as exc:
            solve(s)
        assert exc.value.dof is not None and 0 <= exc.value.dof < s.n_dof

    def test_indefinite_rejected(self):
        with pytest.raises(SingularMatrixError):
            EnvelopeCholesky(sp.diags([1.0, -1.0, 2.0]))

    def test_matches_scipy(self, rng):
        A = _spd(300, rng)
        b = rng.standard_normal(300)
        x, _, _ = solve_matrix(A, b)
        np.testing.assert_allclose(x, sp.linalg.spsolve(A.tocsc(), b), rtol=1e-11)

    def test_reordering_shrinks_envelope(self, rng):
        patch = geometry.rectangle(2, 8)
        K = assemble_elasticity(patch, generate_mesh(patch), Material(1.0, 0.3)).K
        K = K + sp.identity(K.shape[0])
        perm = rng.permutation(K.shape[0])
        Kp = K[perm][:, perm]
        assert EnvelopeCholesky(Kp).envelope_size < EnvelopeCholesky(Kp, reorder=False).envelope_size

    def test_deterministic(self, rng):
        A = _spd(200, rng)
        b = rng.standard_normal(200)
        a1, _, _ = solve_matrix(A, b)
        a2, _, _ = solve_matrix(A, b)
        assert a1.tobytes() == a2.tobytes()

    def test_multiple_rhs(self, rng):
        A = _spd(50, rng, 0.2)
        B = rng.standard_normal((50, 3))
        X = EnvelopeCholesky(A).solve(B)
        np.testing.assert_allclose(A @ X, B, atol=1e-12)


class TestCG:
    def test_agrees_with_direct(self, rng):
        A = _spd(400, rng)
        b = rng.standard_normal(400)
        xd, _, _ = solve_matrix(A, b)
        xc, it, trace = solve_matrix(A, b, "cg", tol=1e-12)
        assert np.linalg.norm(xc - xd) / np.linalg.norm(xd) < 1e-7
        assert it > 0 and len(trace) == it + 1

    def test_elasticity_system(self):
        patch = geometry.rectangle(2, 6, hi=(3.0, 1.0))
        s = assemble_elasticity(patch, generate_mesh(patch), Material(1.0, 0.3))
        for n in range(0, patch.n_points, patch.dims[0]):
            s.fixed[2 * n] = s.fixed[2 * n + 1] = 0.0
        s.F[-1] = -1e-3
        ud = solve(s).u
        rep = solve(s, "cg")
        assert rep.method == "jacobi-pcg"
        assert np.linalg.norm(rep.u - ud) / np.linalg.norm(ud) < 1e-7

    def test_nonconvergence_trace(self, rng):
        A = _spd(200, rng)
        with pytest.raises(ConvergenceError) as exc:
            pcg(A, rng.standard_normal(200), tol=1e-14, maxit=2)
        assert len(exc.value.trace) == 3

    def test_zero_rhs(self, rng):
        x, it, _ = pcg(_spd(10, rng, 0.5), np.zeros(10))
        assert it == 0 and not x.any()


class TestSaddle:
    def test_constraints_satisfied(self):
        K = sp.diags([2.0, 2.0, 2.0]) - sp.diags([1.0, 1.0], 1) - sp.diags([1.0, 1.0], -1)
        s = _system(K, [0.0, 1.0, 0.0])
        s.constraints.append((sp.csr_matrix([[1.0, 0.0, -1.0]]), np.array([0.5])))
        rep = solve(s)
        assert rep.u[0] - rep.u[2] == pytest.approx(0.5, abs=1e-12)
        assert rep.multipliers.shape == (1,)
        assert rep.method == "dense-saddle"


class TestBackends:
    def test_basis_kernel_agrees(self, rng):
        knots = np.array([0, 0, 0, 0, 0.2, 0.5, 0.5, 0.7, 1, 1, 1, 1], dtype=float)
        xi = np.sort(rng.uniform(0, 1, 40))
        kv = KnotVector(knots, 3)
        spans = find_spans(kv, xi)
        a = kernels.basis_ders(knots, 3, xi, spans, 2)
        b = _kernels_py.basis_ders(knots, 3, xi, spans, 2)
        np.testing.assert_allclose(a, b, atol=1e-13)

    def test_cholesky_kernel_agrees(self, rng):
        A = _spd(80, rng, 0.1)
        L1 = EnvelopeCholesky(A)
        first, ptr = L1.first.copy(), L1.ptr.copy()
        Ap = A[L1.perm][:, L1.perm]
        L = sp.tril(Ap, format="coo")
        env = np.zeros(ptr[-1])
        np.add.at(env, ptr[L.row] + L.col - first[L.row], L.data)
        assert _kernels_py.env_cholesky(first, ptr, env, 1e-12) == -1
        np.testing.assert_allclose(env, L1.env, rtol=1e-12, atol=1e-14)

    def test_pure_python_env(self):
        code = "from isoga import kernels; print(kernels.BACKEND)"
        out = subprocess.run(
            [sys.executable, "-c", code], env={"ISOGA_PURE_PYTHON": "1", "PATH": ""},
            capture_output=True, text=True, check=True,
        )
        assert out.stdout.strip() == "python"
