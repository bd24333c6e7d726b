"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--repeat 3] [--json out.json]

Each kernel runs on identical inputs and seeds under both backends; the
table reports the best-of-``repeat`` wall time and the speed-up.
"""
import argparse
import json
import time

import numpy as np

from pgdglm import _backend


def _pg_case(b, n):
    psi = np.random.default_rng(0).normal(scale=2.0, size=n)
    bs = np.full(n, b)

    def run(k):
        k.pg_draw_many(bs, psi, np.random.default_rng(1), np.zeros(n), None, 50, 200)

    return run


def _ffbs_case(t_len, p):
    rng = np.random.default_rng(2)
    args = (rng.normal(size=t_len), rng.uniform(0.5, 2.0, t_len), rng.normal(size=(t_len, p)),
            np.ones(t_len, dtype=bool), np.zeros(p), 0.95 * np.eye(p), 0.01 * np.eye(p),
            np.zeros(p), np.eye(p))

    def run(k):
        k.ffbs_draw(*args, np.random.default_rng(3))

    return run


CASES = {
    "pg b=1 x 10000": _pg_case(1.0, 10_000),
    "pg b=20 x 1000": _pg_case(20.0, 1_000),
    "pg b=3.5 x 1000": _pg_case(3.5, 1_000),
    "ffbs T=100 P=2": _ffbs_case(100, 2),
    "ffbs T=500 P=2": _ffbs_case(500, 2),
}


def best_time(fn, kernels, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(kernels)
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args(argv)
    if "cython" not in _backend.available():
        parser.error("compiled extension not built; run `pip install -e . --no-build-isolation`")
    py, cy = _backend.load("python"), _backend.load("cython")
    results = []
    print(f"{'case':<20}{'python s':>12}{'cython s':>12}{'speed-up':>10}")
    for name, fn in CASES.items():
        t_py = best_time(fn, py, args.repeat)
        t_cy = best_time(fn, cy, args.repeat)
        results.append({"case": name, "python_seconds": t_py, "cython_seconds": t_cy})
        print(f"{name:<20}{t_py:>12.4f}{t_cy:>12.5f}{t_py / t_cy:>9.0f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
