"""Time the WENO5 divergence kernel on every available backend.

    python benchmarks/bench_kernels.py --sizes 200,1600,12800 --repeat 20
"""

import argparse
import time

import numpy as np

from relaxrk.kernels import available_backends


def bench(kernel, n, m, repeat):
    rng = np.random.default_rng(1)
    fp = rng.standard_normal((n + 6, m))
    fm = rng.standard_normal((n + 6, m))
    kernel(fp, fm, 0.1)  # warm-up
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernel(fp, fm, 0.1)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="200,1600,12800")
    parser.add_argument("--components", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    backends = available_backends()
    print(f"{'n':>8}  " + "  ".join(f"{name + ' [us]':>14}" for name in backends) + "  speedup")
    for n in sizes:
        times = {name: bench(mod.weno5_divergence, n, args.components, args.repeat) for name, mod in backends.items()}
        cells = "  ".join(f"{1e6 * t:14.1f}" for t in times.values())
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{n:>8}  {cells}  {speedup:7.2f}")


if __name__ == "__main__":
    main()
