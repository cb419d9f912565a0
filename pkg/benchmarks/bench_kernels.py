"""Benchmark the numba and numpy implementations of the hot kernels.

Times the continuous-continuous energy sum and the form application on a
mid-size mesh for both backends and reports per-call timings plus the
speedup.  Run directly:

    python3 benchmarks/bench_kernels.py --mesh 256 --repeats 20
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hybridvar import kernels
from hybridvar.quadrature import build_pair_templates


def _time_call(fn, args, repeats: int) -> float:
    fn(*args)  # warm (JIT compile, caches)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mesh", type=int, default=256)
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--order", type=int, default=6)
    parser.add_argument("--subdivisions", type=int, default=36)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    tpl = build_pair_templates(args.mesh, args.alpha, args.order, args.subdivisions)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(args.mesh + 1)
    p = rng.standard_normal(args.mesh + 1)
    flat = (tpl.offsets, tpl.a0, tpl.a1, tpl.b0, tpl.b1, tpl.w)

    cases = {
        "cc_energy": (c,) + flat,
        "cc_pairing": (c, p) + flat,
        "cc_apply": (c,) + flat + (np.zeros(args.mesh + 1),),
    }

    backends = {"numpy": kernels.implementations("numpy")}
    try:
        backends["numba"] = kernels.implementations("numba")
    except ImportError:
        print("numba not importable; timing numpy only")

    print(f"mesh={args.mesh} alpha={args.alpha} order={args.order} "
          f"subdivisions={args.subdivisions} points={tpl.w.size} (active: {kernels.ACTIVE_BACKEND})")
    print(f"{'kernel':<12}" + "".join(f"{name + ' [ms]':>14}" for name in backends)
          + ("{:>10}".format("speedup") if len(backends) == 2 else ""))
    for name, call_args in cases.items():
        times = {}
        for backend, impl in backends.items():
            if name == "cc_apply":
                call_args = call_args[:-1] + (np.zeros(args.mesh + 1),)
            times[backend] = _time_call(impl[name], call_args, args.repeats)
        row = f"{name:<12}" + "".join(f"{1e3 * times[b]:>14.3f}" for b in backends)
        if len(times) == 2:
            row += f"{times['numpy'] / times['numba']:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
