"""Throughput of the compiled and pure-Python simulation kernels.

Runs one replication of INDEX(0.01) on a bundled scenario with each backend,
checks that both return identical results, and reports events per second.

    python3 bench/bench_core.py [--scenario fig1a] [--h 10] [--horizon 200]
"""

import argparse
import time
import warnings

from resalloc.model import load_scenario
from resalloc.multipliers import fixed_point_iteration
from resalloc.policy import PolicySpec
from resalloc.simulator import _kernel_args, get_kernel, replication_seed


def run(backend, args, kw):
    kernel = get_kernel(backend)
    t0 = time.perf_counter()
    out = kernel(**kw, horizon=args.horizon, t_warm=0.2 * args.horizon,
                 seed=replication_seed(args.seed, 0))
    return out, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="fig1a")
    ap.add_argument("--h", type=int, default=10)
    ap.add_argument("--horizon", type=float, default=200.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = load_scenario(args.scenario)
    trace = fixed_point_iteration(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        kw = _kernel_args(model, PolicySpec.index(trace.ranking_star, 0.01), args.h)

    results, times = {}, {}
    for backend in ("compiled", "python"):
        try:
            out, dt = run(backend, args, kw)
        except RuntimeError as e:
            print(f"{backend:9s} unavailable: {e}")
            continue
        results[backend] = out
        times[backend] = dt
        print(f"{backend:9s} events={out[4]:>9d}  time={dt:8.3f}s  "
              f"rate={out[4] / dt:12.0f} ev/s")
    if len(results) == 2:
        same = results["compiled"][:5] == results["python"][:5]
        print(f"identical results: {same}")
        print(f"speedup: {times['python'] / times['compiled']:.1f}x")


if __name__ == "__main__":
    main()
