"""Time the numba kernels against their numpy twins.

Measures the three dispatched hot spots (pair-coupling fill, two-level RHS,
four-level RHS) per call and, optionally, a full cumulant evolution under
each backend.  Run from the repo root:

    python3 benchmarks/backend_timing.py
    python3 benchmarks/backend_timing.py --sizes 64,144,256 --evolve
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from superburst import _kernels as kernels


def _timeit(fn, args, repeats):
    fn(*args)   # warm up (JIT compile on the numba side)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _pair_args(rng, n):
    pos = rng.uniform(-2000.0, 2000.0, (n, 3))
    pos[:, 2] = 0.0
    proj = rng.uniform(0.0, 1.0, (n, n))
    return pos, 2.0 * np.pi / 689.0, 0.5 * (proj + proj.T)


def _zero_diag(rng, n, complex_=False):
    m = rng.uniform(-0.5, 0.5, (n, n)).astype(complex if complex_ else float)
    if complex_:
        m += 1j * rng.uniform(-0.5, 0.5, (n, n))
    np.fill_diagonal(m, 0.0)
    return m


def _two_level_args(rng, n):
    at = rng.uniform(0.0, 1.0, n)
    e = _zero_diag(rng, n)
    p = _zero_diag(rng, n, complex_=True)
    bmat = _zero_diag(rng, n, complex_=True)
    gg = _zero_diag(rng, n)
    return at, e, p, bmat, gg, np.conj(bmat) @ p, p @ bmat


def _four_level_args(rng, n):
    at, bt, ct = (rng.uniform(0.0, 0.5, n) for _ in range(3))
    e, f, g = (_zero_diag(rng, n) for _ in range(3))
    q, p, r = (_zero_diag(rng, n, complex_=True) for _ in range(3))
    couplings = [_zero_diag(rng, n, complex_=True) for _ in range(3)]
    diss = [_zero_diag(rng, n) for _ in range(3)]
    products = []
    for cm, coh in zip(couplings, (q, p, r)):
        products += [np.conj(cm) @ coh, coh @ cm]
    return (at, bt, ct, e, f, g, q, p, r, *couplings, *diss, *products,
            0.5, 0.3)


_KERNELS = (
    ("pair fill", _pair_args,
     kernels._pair_couplings_numpy, kernels._pair_couplings_numba),
    ("two-level RHS", _two_level_args,
     kernels._two_level_rhs_numpy, kernels._two_level_rhs_numba),
    ("four-level RHS", _four_level_args,
     kernels._four_level_rhs_numpy, kernels._four_level_rhs_numba),
)


def run_kernels(sizes, repeats):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'N':>6}{'numpy us':>12}{'numba us':>12}{'speedup':>9}")
    for name, make_args, fn_np, fn_nb in _KERNELS:
        for n in sizes:
            args = make_args(rng, n)
            t_np = _timeit(fn_np, args, repeats)
            t_nb = _timeit(fn_nb, args, repeats)
            print(f"{name:<16}{n:>6}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}"
                  f"{t_np / t_nb:>8.1f}x")


def run_evolution(side):
    from superburst.atoms import build_level_scheme
    from superburst.cumulant import evolve_cumulant
    from superburst.geometry import square_lattice
    from superburst.interactions import coupling_matrices

    scheme = build_level_scheme("Yb174", "D1_m0")
    cs = coupling_matrices(
        square_lattice(side, side, 0.3 * scheme.channel("f").wavelength), scheme)
    print(f"\nfull evolution, {side}x{side} four-level array, t=2:")
    for backend in ("numpy", "numba"):
        os.environ["SUPERBURST_BACKEND"] = backend
        evolve_cumulant(cs, 0.05, n_samples=3)   # warm up
        t0 = time.perf_counter()
        rec = evolve_cumulant(cs, 2.0, n_samples=100)
        dt = time.perf_counter() - t0
        print(f"  {backend:<6} {dt:8.2f} s   peak rate {rec.total_rate.max():.4f}")
    os.environ.pop("SUPERBURST_BACKEND", None)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="16,36,64,100,144,196",
                        help="comma-separated atom numbers")
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--evolve", action="store_true",
                        help="also time a full cumulant evolution per backend")
    parser.add_argument("--side", type=int, default=6,
                        help="array side for --evolve")
    args = parser.parse_args(argv)
    if not kernels.HAS_NUMBA:
        parser.error("numba is not installed; install the 'fast' extra")
    sizes = [int(s) for s in args.sizes.split(",")]
    run_kernels(sizes, args.repeats)
    if args.evolve:
        run_evolution(args.side)


if __name__ == "__main__":
    main()
