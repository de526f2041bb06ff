"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--grid 256] [--repeat 5]

The numba variants are compiled (and checked against numpy) before timing.
"""
import argparse
import time

import numpy as np

from topophase import kernels
from topophase._accel import USE_NUMBA
from topophase.clifford import ID4, build_representation


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(grid, rng):
    n_pts = grid * grid
    pts = rng.uniform(-10, 10, size=(n_pts, 2))
    src = rng.uniform(-1, 1, size=(5, 2))
    q = rng.uniform(-3, 3, size=5)

    ang = np.linspace(0, 2 * np.pi, 65)[:-1]
    a = np.column_stack([3 * np.cos(ang), 3 * np.sin(ang)])
    b = np.roll(a, -1, axis=0)

    rep = build_representation()
    terms = kernels.sparse_terms(np.stack([ID4, *rep.alphas, rep.gamma0]))
    psi = rng.normal(size=(2, 2, grid, grid)) + 1j * rng.normal(size=(2, 2, grid, grid))
    psi = np.concatenate([psi, np.zeros_like(psi)], axis=1)
    coefs = rng.normal(size=(4, grid, grid)) + 0j

    return {
        f"coulomb_field ({n_pts} pts, 5 src)": (
            lambda: kernels.coulomb_field_nb(pts, src, q),
            lambda: kernels.coulomb_field_np(pts, src, q)),
        "segment_integrals (64 seg, tol 1e-12)": (
            lambda: kernels.segment_integrals_nb(a, b, src, q, 1e-12, 100000),
            lambda: kernels.segment_integrals_np(a, b, src, q, 1e-12, 100000)),
        f"spinor_mix (2x4x{grid}x{grid})": (
            lambda: kernels.spinor_mix_nb(psi, coefs, *terms),
            lambda: kernels.spinor_mix_np(psi, coefs, *terms)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not USE_NUMBA:
        print("numba disabled or missing: only the numpy column is meaningful")
    rng = np.random.default_rng(0)
    print(f"{'kernel':45s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, (f_nb, f_np) in cases(args.grid, rng).items():
        r_nb, r_np = f_nb(), f_np()  # warm-up / compile
        if isinstance(r_nb, tuple):
            r_nb, r_np = r_nb[0], r_np[0]
        assert np.allclose(r_nb, r_np, rtol=1e-10, atol=1e-12), name
        t_nb = best_of(f_nb, args.repeat)
        t_np = best_of(f_np, args.repeat)
        print(f"{name:45s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
