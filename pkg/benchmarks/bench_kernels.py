"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best time of each backend and the
speed-up. The compiled timings are skipped when the extension is missing.
"""
import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from isoga import _kernels_py, geometry
from isoga.assembly import Material, assemble_elasticity
from isoga.mesh import generate_mesh
from isoga.solver import EnvelopeCholesky
from isoga.spline import KnotVector, find_spans

try:
    from isoga import _kernels
except ImportError:
    _kernels = None


def basis_case(n_pts=20000, p=3, n_el=64):
    knots = np.concatenate([np.zeros(p), np.linspace(0.0, 1.0, n_el + 1), np.ones(p)])
    xi = np.random.default_rng(0).uniform(0.0, 1.0, n_pts)
    spans = find_spans(KnotVector(knots, p), xi)
    return lambda mod: mod.basis_ders(knots, p, xi, spans, 2)


def cholesky_case(n_el=24):
    patch = geometry.rectangle(2, n_el)
    K = assemble_elasticity(patch, generate_mesh(patch), Material(1.0, 0.3)).K
    K = (K + sp.identity(K.shape[0])).tocsr()
    ref = EnvelopeCholesky(K)
    first, ptr = ref.first, ref.ptr
    Kp = K[ref.perm][:, ref.perm]
    L = sp.tril(Kp, format="coo")
    env0 = np.zeros(ptr[-1])
    np.add.at(env0, ptr[L.row] + L.col - first[L.row], L.data)
    b = np.ones(K.shape[0])

    def run(mod):
        env = env0.copy()
        mod.env_cholesky(first, ptr, env, 1e-12)
        return mod.env_solve(first, ptr, env, b)

    return run, K.shape[0], ptr[-1]


def best(fn, mod, repeat):
    return min(timeit.repeat(lambda: fn(mod), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    chol, n, env_size = cholesky_case()
    cases = [
        ("basis_ders (20000 points, p=3, 2 derivatives)", basis_case()),
        (f"envelope Cholesky + solve (n={n}, envelope {env_size})", chol),
    ]
    for name, fn in cases:
        t_py = best(fn, _kernels_py, args.repeat)
        if _kernels is None:
            print(f"{name}: python {t_py * 1e3:.2f} ms, compiled backend unavailable")
            continue
        t_c = best(fn, _kernels, args.repeat)
        print(f"{name}: python {t_py * 1e3:.2f} ms, cython {t_c * 1e3:.2f} ms, speed-up {t_py / t_c:.1f}x")


if __name__ == "__main__":
    main()
