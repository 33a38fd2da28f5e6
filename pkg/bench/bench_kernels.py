"""Compare the compiled and numpy kernel backends.

    python3 bench/bench_kernels.py [--repeat 5] [--horizon 5000]

Reports per-call timings for the three kernels and the wall time of a full
SAMOCP run on the crossing scenario.
"""

import argparse
import timeit

import numpy as np

from confstream import kernels
from confstream.runner import LearnerConfig, run_config
from confstream.scoring import ScoreParams
from confstream.simulator import crossing_config, generate_stream


def kernel_cases(n=40, m=4, k=10, seed=0):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(k), size=m)
    state = dict(alpha=rng.random((n, m)), cumsq=rng.random((n, m)), logw=rng.normal(size=(n, m)),
                 logh=rng.normal(size=n), eps=rng.uniform(0.01, 0.9, n), wbar=np.zeros((n, m)), hbar=np.zeros(n))
    mass, out, bars = np.zeros(m), np.empty((m, k)), rng.random(m)

    def scores(mod):
        mod.raps_scores(probs, 0.5, 0.1, 1, out)

    def aggregate(mod):
        mod.aggregate(state["alpha"], state["logw"], state["logh"], n, state["wbar"], state["hbar"], mass)

    def update(mod):
        # restore state so every call sees the same inputs
        s = {key: v.copy() for key, v in state.items()}
        mod.update(s["alpha"], s["cumsq"], s["logw"], s["logh"], s["eps"], s["wbar"], s["hbar"], n, bars,
                   0.1, 0.05, -1, -1, 1.0)

    return {"raps_scores": scores, "aggregate": aggregate, "update": update}


def per_call_us(fn, mod, repeat):
    timer = timeit.Timer(lambda: fn(mod))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--horizon", type=int, default=5000)
    args = ap.parse_args()

    names = sorted(kernels.BACKENDS)
    if "cython" not in names:
        print("compiled extension not built; only the numpy backend is available")

    print(f"{'kernel':<14}" + "".join(f"{n + ' (us)':>16}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for label, fn in kernel_cases().items():
        times = {n: per_call_us(fn, kernels.BACKENDS[n], args.repeat) for n in names}
        line = f"{label:<14}" + "".join(f"{times[n]:>16.2f}" for n in names)
        if len(names) > 1:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)

    stream = generate_stream(crossing_config(seed=0, horizon=args.horizon))
    previous = kernels.BACKEND
    walls = {}
    try:
        for n in names:
            kernels.use_backend(n)
            walls[n] = min(timeit.repeat(lambda: run_config(LearnerConfig(), stream, ScoreParams(), 0),
                                         number=1, repeat=max(1, args.repeat // 2)))
    finally:
        kernels.use_backend(previous)
    print(f"\nfull run, T={args.horizon}, M=2:")
    for n in names:
        print(f"  {n:<8} {walls[n]:.3f} s  ({walls[n] / args.horizon * 1e6:.1f} us/step)")


if __name__ == "__main__":
    main()
