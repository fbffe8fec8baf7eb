#!/usr/bin/env python3
"""Side-by-side timing of the numba and numpy kernel backends.

Every hot kernel runs on both backends with large inputs.  The script checks
that the two implementations agree (1e-12 relative for float outputs, exact
equality for integer counts) and prints a timing table with the speedup.
First numba calls compile, so each kernel is warmed up on tiny inputs before
the clock starts.

Usage:
    python3 benchmarks/bench_backends.py [--repeats N] [--threads N]
"""

import argparse
import time

import numpy as np

from frailty_shapes import Poisson, support_table
from frailty_shapes import _kernels as K


def _piecewise_arrays(n_segments, rng):
    """edges / cumulative-at-edge / rate arrays for a piecewise-constant rate."""
    widths = rng.uniform(0.05, 0.4, size=n_segments)
    edges = np.concatenate([[0.0], np.cumsum(widths)[:-1]])
    rates = rng.uniform(0.2, 3.0, size=n_segments)
    cums = np.concatenate([[0.0], np.cumsum(rates[:-1] * widths[:-1])])
    return edges, cums, rates


def build_cases(rng):
    cases = []

    tab = support_table(Poisson(eta=8.0), tail=1e-14)
    lam = np.linspace(0.0, 30.0, 50_001)
    cases.append((
        "survivor_moment_grid",
        f"{tab.z.size} x {lam.size}",
        lambda: K.survivor_moment_grid(tab.z, tab.pmf, lam),
    ))

    z = np.sort(rng.uniform(0.0, 5.0, size=40))
    pr = rng.dirichlet(np.ones(40))
    lam_k = np.linspace(0.0, 12.0, 20_001)
    cases.append((
        "kpoint_rfv_grid",
        f"{z.size} x {lam_k.size}",
        lambda: K.kpoint_rfv_grid(z, pr, lam_k),
    ))

    edges, cums, rates = _piecewise_arrays(256, rng)
    t = rng.uniform(0.0, edges[-1] * 1.2, size=4_000_000)
    cases.append((
        "piecewise_cumulative",
        f"{rates.size} seg, {t.size:.0e} pts",
        lambda: K.piecewise_cumulative(edges, cums, rates, t),
    ))

    u = K.piecewise_cumulative(edges, cums, rates, t)
    cases.append((
        "piecewise_inverse",
        f"{rates.size} seg, {u.size:.0e} pts",
        lambda: K.piecewise_inverse(edges, cums, rates, u),
    ))

    n, n_values = 4_000_000, 64
    codes = rng.integers(0, n_values, size=n)
    times = rng.exponential(1.0, size=(n, 2)) / np.maximum(codes[:, None], 0.25)
    times[codes == 0] = np.inf  # cured clusters never leave the risk set
    cases.append((
        "riskset_value_counts",
        f"{n:.0e} x 2",
        lambda: K.riskset_value_counts(codes, times, np.array([0.4, 0.7]), n_values),
    ))

    ta = rng.exponential(1.0, size=n)
    tb = 0.5 * ta + rng.exponential(0.5, size=n)
    cases.append((
        "crf_cell_counts",
        f"{n:.0e} pairs",
        lambda: K.crf_cell_counts(ta, tb, 0.6, 0.6, 0.05),
    ))

    return cases


def _agree(a, b):
    if not isinstance(a, tuple):
        a, b = (a,), (b,)
    for x, y in zip(a, b):
        if np.issubdtype(np.asarray(x).dtype, np.integer):
            np.testing.assert_array_equal(x, y)
        else:
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=0.0)
    return True


def _best_of(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timed runs per kernel per backend; best is reported")
    ap.add_argument("--threads", type=int, default=None,
                    help="cap the numba worker pool")
    args = ap.parse_args()

    if not K.HAS_NUMBA:
        print("numba is not importable; nothing to compare "
              "(the numpy backend is always available).")
        return 0
    if args.threads is not None:
        K.set_thread_cap(args.threads)

    rng = np.random.default_rng(8451)
    cases = build_cases(rng)

    print("Warming up numba compilation...")
    t0 = time.perf_counter()
    K.set_backend("numba")
    tiny = np.array([0.0, 1.0])
    K.survivor_moment_grid(tiny, np.array([0.5, 0.5]), tiny)
    K.kpoint_rfv_grid(np.array([0.5, 1.5]), np.array([0.5, 0.5]), tiny)
    K.piecewise_cumulative(np.array([0.0]), np.array([0.0]), np.array([1.0]), tiny)
    K.piecewise_inverse(np.array([0.0]), np.array([0.0]), np.array([1.0]), tiny)
    K.riskset_value_counts(np.array([0, 1]), np.ones((2, 1)), np.array([0.5]), 2)
    K.crf_cell_counts(tiny, tiny, 0.5, 0.5, 0.1)
    print(f"compiled in {time.perf_counter() - t0:.1f}s\n")

    header = (f"{'kernel':<22}  {'size':>20}  {'numpy (ms)':>10}  "
              f"{'numba (ms)':>10}  {'speedup':>8}  {'agree':>5}")
    print(header)
    print("-" * len(header))

    original = K.active_backend()
    try:
        for name, size, fn in cases:
            K.set_backend("numpy")
            t_np, out_np = _best_of(fn, args.repeats)
            K.set_backend("numba")
            t_nb, out_nb = _best_of(fn, args.repeats)
            ok = _agree(out_np, out_nb)
            print(f"{name:<22}  {size:>20}  {t_np * 1e3:>10.2f}  "
                  f"{t_nb * 1e3:>10.2f}  {t_np / t_nb:>7.1f}x  "
                  f"{'ok' if ok else 'FAIL':>5}")
    finally:
        K.set_backend(original)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
