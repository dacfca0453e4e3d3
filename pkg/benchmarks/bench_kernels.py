"""Time the hot kernels under the numba and pure-numpy backends.

    python3 benchmarks/bench_kernels.py [--reps 50] [--n 2048] [--q 16]

Both backends run in the same process via ``set_backend``; outputs are
checked for equality before timing.
"""

import argparse
import time

import numpy as np

from sketchinf import _accel, kernels
from sketchinf.datagen import gen_case1
from sketchinf.rng import stream
from sketchinf.sketch import apply_srht, apply_sse


def median_time(fn, reps):
    fn()  # warm-up (JIT compile / cache load)
    ts = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return float(np.median(ts))


def cases(n, q, m, zeta):
    rng = np.random.default_rng(0)
    n_pad = kernels.next_pow2(n)
    W = rng.standard_normal((n_pad, q))
    words = stream(0, "bench").bit_generator.random_raw(kernels.sse_word_count(n, zeta))
    X = rng.standard_normal((n, q))
    rows, signs = kernels.sse_pattern_from_bits(words, n, zeta, m)
    data = gen_case1(n, q - 1, 1)
    return {
        "fwht": lambda: kernels.fwht_inplace(W.copy()),
        "sse_pattern": lambda: kernels.sse_pattern_from_bits(words, n, zeta, m),
        "sse_scatter": lambda: kernels.sse_scatter(X, rows, signs, m, zeta ** -0.5),
        "apply_srht": lambda: apply_srht(data.X, m, 3, y=data.y),
        "apply_sse": lambda: apply_sse(data.X, m, zeta, 3, y=data.y),
    }


def check_agreement(n, q, m, zeta):
    out = {}
    for backend in ("numba", "numpy"):
        _accel.set_backend(backend)
        out[backend] = {k: fn() for k, fn in cases(n, q, m, zeta).items()}
    for k in out["numba"]:
        a, b = out["numba"][k], out["numpy"][k]
        if hasattr(a, "Xs"):
            a, b = a.Xs, b.Xs
        elif isinstance(a, tuple):
            a, b = a[0], b[0]
        if not np.allclose(a, b, rtol=0, atol=1e-12):
            raise SystemExit(f"backends disagree on {k}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--q", type=int, default=16, help="columns (p + 1 with the response)")
    ap.add_argument("--m", type=int, default=800)
    ap.add_argument("--zeta", type=int, default=8)
    ap.add_argument("--reps", type=int, default=50)
    args = ap.parse_args(argv)

    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    check_agreement(args.n, args.q, args.m, args.zeta)

    res = {}
    for backend in ("numba", "numpy"):
        _accel.set_backend(backend)
        for name, fn in cases(args.n, args.q, args.m, args.zeta).items():
            res[(name, backend)] = median_time(fn, args.reps)
    _accel.set_backend("numba")

    print(f"n={args.n} q={args.q} m={args.m} zeta={args.zeta} reps={args.reps}")
    print(f"{'kernel':<12} {'numba_ms':>10} {'numpy_ms':>10} {'speedup':>8}")
    for name in cases(8, 2, 4, 1):
        a, b = res[(name, "numba")], res[(name, "numpy")]
        print(f"{name:<12} {a * 1e3:10.4f} {b * 1e3:10.4f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
