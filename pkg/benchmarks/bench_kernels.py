"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 256] [--repeat 20]

Prints the median time per call for each kernel and backend, and the
largest difference between the two results.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from kg2d import _kernels_py

try:
    from kg2d import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def median_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(n: int, rng: np.random.Generator):
    u = rng.standard_normal((n, n))
    ut = rng.standard_normal((n, n))
    m = 48
    f = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    x = np.linspace(-10, 10, m, endpoint=False)
    p = rng.uniform(-10, 10, (2, 4 * n))
    yield "cubic_power", lambda k: k.cubic_power(u)
    yield "cubic_kick", lambda k: k.cubic_kick(ut.copy(), u, 0.01)
    yield "nonuniform_eval", lambda k: k.nonuniform_eval(f, x, x, p[0], p[1], -1.0)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if _compiled is None:
        print("compiled extension not available; timing the fallback only")
    print(f"{'kernel':<18}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}{'max diff':>12}")
    for name, call in cases(args.n, rng):
        tp = median_time(lambda: call(_kernels_py), args.repeat)
        if _compiled is None:
            print(f"{name:<18}{1e3 * tp:>14.3f}")
            continue
        tc = median_time(lambda: call(_compiled), args.repeat)
        diff = float(np.max(np.abs(np.asarray(call(_kernels_py)) - np.asarray(call(_compiled)))))
        print(f"{name:<18}{1e3 * tp:>14.3f}{1e3 * tc:>16.3f}{tp / tc:>10.2f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
