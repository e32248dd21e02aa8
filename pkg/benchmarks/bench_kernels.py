"""Compare the compiled grid kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 20]

Prints one line per kernel and grid size with the best time of each backend,
the speedup, and the largest difference between their outputs. Also times
one sparse-matrix product with the assembled Liouvillian for reference.
"""

import argparse
import timeit

import numpy as np

from hybrid_koopman import _kernels
from hybrid_koopman.classical_koopman import build_liouvillian
from hybrid_koopman.phase_space import build_grid, hamiltonian_field


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    py, cc = _kernels.python_backend, _kernels.compiled_backend
    if cc is None:
        print("compiled backend not built; only the numpy fallback is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':18s} {'n':>5s} {'python_ms':>10s} {'compiled_ms':>12s} {'speedup':>8s} {'max_diff':>9s}")
    for n in args.sizes:
        g = build_grid((-6, 6, -6, 6), n, n)
        L = build_liouvillian(hamiltonian_field(0.5 * (g.q**2 + g.p**2) + 0.1 * np.cos(g.q), g))
        psi = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        args_l = (g.as_2d(psi), g.as_2d(L.field.alpha), g.as_2d(L.field.beta), 0.5 / g.dq, 0.5 / g.dp, True)
        fq = rng.uniform(-1, n + 1, g.size)
        fp = rng.uniform(-1, n + 1, g.size)
        f = g.as_2d(rng.random(g.size))
        cases = [
            ("liouvillian_apply", lambda b: b.liouvillian_apply(*args_l)),
            ("bilinear_sample", lambda b: b.bilinear_sample(f, fq, fp, True)),
        ]
        for name, call in cases:
            t_py = best(lambda: call(py), args.repeat)
            if cc is not None:
                t_cc = best(lambda: call(cc), args.repeat)
                diff = float(np.abs(np.asarray(call(py)) - np.asarray(call(cc))).max())
                print(f"{name:18s} {n:5d} {1e3 * t_py:10.3f} {1e3 * t_cc:12.3f} {t_py / t_cc:8.2f} {diff:9.1e}")
            else:
                print(f"{name:18s} {n:5d} {1e3 * t_py:10.3f} {'-':>12s} {'-':>8s} {'-':>9s}")
        t_sp = best(lambda: L.matrix @ psi, args.repeat)
        print(f"{'csr_matvec':18s} {n:5d} {1e3 * t_sp:10.3f} {'-':>12s} {'-':>8s} {'-':>9s}")


if __name__ == "__main__":
    main()
