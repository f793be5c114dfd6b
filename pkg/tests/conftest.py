"""Shared fixtures and independent oracles."""
import numpy as np
import pytest

from isoga import geometry
from isoga.spline import KnotVector, NurbsPatch

W45 = 1.0 / np.sqrt(2.0)


def cox_de_boor(knots, p, i, x):
    """Textbook recursion for ``N_{i,p}(x)`` with 0/0 = 0; the last knot
    closes the final non-degenerate span."""
    k = np.asarray(knots, dtype=float)
    if p == 0:
        if k[i] <= x < k[i + 1]:
            return 1.0
        last = np.flatnonzero(k < k[-1]).max()
        return 1.0 if (x == k[-1] and i == last) else 0.0
    out = 0.0
    if k[i + p] != k[i]:
        out += (x - k[i]) / (k[i + p] - k[i]) * cox_de_boor(k, p - 1, i, x)
    if k[i + p + 1] != k[i + 1]:
        out += (k[i + p + 1] - x) / (k[i + p + 1] - k[i + 1]) * cox_de_boor(k, p - 1, i + 1, x)
    return out


def full_basis(patch, xi):
    """Dense ``(npts, n_points)`` basis from :meth:`NurbsPatch.basis`."""
    idx, R = patch.basis(np.atleast_2d(xi), 0)
    M = np.zeros((R.shape[0], patch.n_points))
    np.put_along_axis(M, idx, R, axis=1)
    return M


def quarter_circle():
    return NurbsPatch([KnotVector([0, 0, 0, 1, 1, 1], 2)], [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], [1.0, W45, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def annulus():
    return geometry.quarter_annulus(1.0, 2.0)


@pytest.fixture
def test_patches():
    """Six patches covering 1D/2D/3D, rational and non-uniform cases."""
    rect = geometry.rectangle((2, 3), (3, 2), (0.0, 0.0), (2.0, 1.0))
    return {
        "circle": quarter_circle(),
        "line": geometry.line(3, 4),
        "rectangle": rect,
        "annulus": geometry.quarter_annulus(),
        "plate_hole": geometry.plate_with_hole(),
        "cylinder": geometry.cylinder_octant(),
    }


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
