"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_accel.py [--n 25600] [--repeat 20]

Both flavours are importable in one process, so no environment flag is
needed here; the flag only decides which one the library calls.
"""

import argparse
import time

import numpy as np

from preavg import _loops
from preavg._accel import HAS_NUMBA
from preavg.kernels import DiscreteWeights, get_weight


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=25600)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.n
    k = int(round(np.sqrt(n)))
    w = DiscreteWeights.build(get_weight("triangle"), k).g_vals[1:]
    dz = rng.standard_normal(n)
    z = rng.standard_normal(n)
    noise = rng.standard_normal((64, 3 * 500))
    starts = rng.integers(0, 1000, size=(64, 11))
    ww = rng.standard_normal(500)

    cases = {
        "windowed_sum": (lambda: _loops.windowed_sum_numpy(dz, w),
                         lambda: _loops._windowed_sum_jit(dz, w)),
        "heston_variance": (lambda: _loops.heston_variance_numpy(0.04, 5.0, 0.04, 0.5, 1.0 / n, z),
                            lambda: _loops._heston_variance_jit(0.04, 5.0, 0.04, 0.5, 1.0 / n, z)),
        "window_dots": (lambda: _loops.window_dots_numpy(noise, starts, ww),
                        lambda: _loops._window_dots_jit(noise, starts, ww)),
    }
    print(f"n={n} k_n={k} numba={'yes' if HAS_NUMBA else 'no'}")
    print(f"{'kernel':<18s}{'numpy [ms]':>12s}{'numba [ms]':>12s}{'speedup':>10s}")
    for name, (np_fn, nb_fn) in cases.items():
        a = np_fn()
        b = nb_fn()
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12), name
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat) if HAS_NUMBA else float("nan")
        print(f"{name:<18s}{1e3 * t_np:12.3f}{1e3 * t_nb:12.3f}{t_np / t_nb:10.1f}")


if __name__ == "__main__":
    main()
