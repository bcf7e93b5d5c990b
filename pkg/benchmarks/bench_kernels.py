"""Timing comparison of the compiled kernels against the pure-python fallback.

Runs the forward and backward chain on representative network shapes and
prints per-call times for both implementations.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--batch N]
"""
import argparse
import timeit

import numpy as np

from suntrack import _kernels, _kernels_py

SHAPES = {
    "tracker (227-64-64-2)": (227, 64, 64, 2),
    "q-network (23-64-64-13)": (23, 64, 64, 13),
    "wide (512-256-128-10)": (512, 256, 128, 10),
}


def build_case(sizes, batch, seed=0):
    rng = np.random.default_rng(seed)
    weights = [np.ascontiguousarray(rng.normal(size=(a, b)))
               for a, b in zip(sizes, sizes[1:])]
    biases = [np.ascontiguousarray(rng.normal(size=b)) for b in sizes[1:]]
    x = np.ascontiguousarray(rng.normal(size=(batch, sizes[0])))
    d_y = np.ascontiguousarray(rng.normal(size=(batch, sizes[-1])))
    return weights, biases, x, d_y


def time_call(fn, repeats):
    per_call = min(timeit.repeat(fn, number=50, repeat=repeats)) / 50
    return per_call * 1e6


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repetitions, best is reported")
    ap.add_argument("--batch", type=int, default=64)
    args = ap.parse_args()

    print(f"batch={args.batch}, best of {args.repeats} x 50 calls, "
          f"times in microseconds per call")
    header = f"{'shape':<26} {'direction':<9} {'compiled':>10} {'python':>10} {'ratio':>7}"
    print(header)
    print("-" * len(header))
    for name, sizes in SHAPES.items():
        weights, biases, x, d_y = build_case(sizes, args.batch)
        _, acts = _kernels_py.forward_chain(weights, biases, x)
        rows = [
            ("forward",
             lambda: _kernels.forward_chain(weights, biases, x),
             lambda: _kernels_py.forward_chain(weights, biases, x)),
            ("backward",
             lambda: _kernels.backward_chain(weights, acts, d_y),
             lambda: _kernels_py.backward_chain(weights, acts, d_y)),
        ]
        for direction, compiled_fn, python_fn in rows:
            t_c = time_call(compiled_fn, args.repeats)
            t_p = time_call(python_fn, args.repeats)
            print(f"{name:<26} {direction:<9} {t_c:>10.1f} {t_p:>10.1f} "
                  f"{t_p / t_c:>6.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
