"""Compare the compiled and pure-Python eta kernels.

Times single coefficient evaluations on the presets and on random pulses
with 2..12 segments, then a full multistart solve with each kernel swapped
into the optimizer. Run with ``python benchmarks/bench_eta.py``.
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from shapedpulse import _kernels, optimize
from shapedpulse.optimize import PulseTemplate, SolveOptions, solve
from shapedpulse.pulse import PRESET_NAMES, preset


def _random_cases(n: int, rng: np.random.Generator):
    cases = []
    for _ in range(n):
        m = int(rng.integers(2, 13))
        sw = np.sort(rng.uniform(0.0, 1.0, m - 1))
        edges = np.concatenate([[0.0], sw, [1.0]])
        amps = rng.uniform(-8.0, 8.0, m)
        cases.append((edges, amps, float(rng.uniform(0.05, 0.95))))
    return cases


def _per_call(fn, cases, repeat: int) -> float:
    def run():
        for c in cases:
            fn(*c)

    best = min(timeit.repeat(run, number=1, repeat=repeat))
    return best / len(cases)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if _kernels.eta_compiled is None:
        print("compiled kernel not built; only the Python kernel is available")
    rng = np.random.default_rng(7)
    presets = [
        (p.edges, np.asarray(p.amplitudes), p.tau_s) for p in (preset(n) for n in PRESET_NAMES)
    ]
    sets = {"presets": presets * max(1, args.cases // len(presets)), "random": _random_cases(args.cases, rng)}

    kernels = {"python": _kernels.eta_python}
    if _kernels.eta_compiled is not None:
        kernels["cython"] = _kernels.eta_compiled

    if "cython" in kernels:
        diff = max(
            max(abs(a - b) for a, b in zip(kernels["python"](*c), kernels["cython"](*c)))
            for c in sets["random"]
        )
        print(f"max |python - cython| over random cases: {diff:.2e}")

    print(f"{'case set':<10s} {'kernel':<8s} {'us/call':>9s}")
    times = {}
    for label, cases in sets.items():
        for kname, fn in kernels.items():
            t = _per_call(fn, cases, args.repeat)
            times[label, kname] = t
            print(f"{label:<10s} {kname:<8s} {t * 1e6:9.2f}")
        if "cython" in kernels:
            print(f"{label:<10s} speedup  {times[label, 'python'] / times[label, 'cython']:9.1f}x")

    tpl = PulseTemplate(5, math.pi / 2, ("eta11", "eta12", "eta21", "eta22"), signs=(1, -1, 1, -1, 1))
    opts = SolveOptions()
    print("\nmultistart solve, symmetric 5-segment pi/2 template")
    saved = optimize.eta_kernel
    try:
        for kname, fn in kernels.items():
            optimize.eta_kernel = fn
            t0 = timeit.default_timer()
            rep = solve(tpl, opts)
            dt = timeit.default_timer() - t0
            print(f"  {kname:<8s} {dt:7.3f} s   B_m = {max(abs(a) for a in rep.pulse.amplitudes):.6f}")
    finally:
        optimize.eta_kernel = saved


if __name__ == "__main__":
    main()
