"""Compare the compiled and pure-Python RREF kernels.

Two workloads per backend:

* ``receiver``: one receiver fed random combinations over a sliding window,
  the pattern the simulator produces under random coding.
* ``simulate``: a full two-receiver run with next-unseen coding.

Usage: python3 benchmarks/bench_kernel.py [--steps N] [--slots N] [--repeat R]
"""

import argparse
import time

import numpy as np

from fbnc.kernel import BACKENDS
from fbnc.knowledge import ReceiverKnowledge
from fbnc.simulator import SimConfig, run


def receiver_workload(backend: str, steps: int, q: int = 257, lam: float = 0.45, mu: float = 0.5, seed: int = 0):
    rng = np.random.default_rng(seed)
    rk = ReceiverKnowledge(q, backend=backend)
    arrivals = rng.random(steps) < lam
    receptions = rng.random(steps) < mu
    for t in range(steps):
        if arrivals[t]:
            rk.extend(1)
        lo = rk.front + 1
        if receptions[t] and rk.stream_len >= lo:
            ids = np.arange(lo, rk.stream_len + 1)
            rk.incorporate(ids, rng.integers(1, q, size=ids.size))
    return rk.rank


def simulate_workload(backend: str, slots: int):
    cfg = SimConfig(lam=0.4, mu=0.5, n=2, policy="alg2b", coding="next_unseen", slots=slots, seed=1,
                    backend=backend)
    return run(cfg).summary.mean_virt_q_avg


def best_of(fn, repeat):
    best, value = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--slots", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    workloads = {
        "receiver": (lambda b: receiver_workload(b, args.steps), args.steps),
        "simulate": (lambda b: simulate_workload(b, args.slots), args.slots),
    }
    print(f"{'workload':<10} {'backend':<8} {'total s':>9} {'us/step':>9} {'speedup':>8}  result")
    for name, (fn, n) in workloads.items():
        timings = {}
        results = {}
        for backend in sorted(BACKENDS, reverse=True):
            timings[backend], results[backend] = best_of(lambda: fn(backend), args.repeat)
        base = timings.get("python")
        for backend, sec in timings.items():
            speed = f"{base / sec:7.1f}x" if base else "       -"
            print(f"{name:<10} {backend:<8} {sec:9.3f} {sec / n * 1e6:9.1f} {speed}  {results[backend]}")
        if len(set(map(str, results.values()))) != 1:
            raise SystemExit(f"{name}: backends disagree: {results}")


if __name__ == "__main__":
    main()
