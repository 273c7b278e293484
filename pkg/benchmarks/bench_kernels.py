"""Time the compiled Chambolle sweep against the pure-NumPy fallback.

Runs the same dual-ascent workload through both backends, checks they
agree to floating-point roundoff, and reports wall-clock times and the
speedup.  Usage::

    python3 benchmarks/bench_kernels.py [--size 256] [--sweeps 200] [--repeats 5]
"""

import argparse
import sys
import time

import numpy as np

from pidal.kernels import native, reference


def _workload(module, image, beta, sweeps):
    pv = np.zeros_like(image)
    ph = np.zeros_like(image)
    start = time.perf_counter()
    out = module.chambolle_sweep(image, beta, 0.125, sweeps, pv, ph)
    return out, pv, ph, time.perf_counter() - start


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=256, help="square image side")
    parser.add_argument("--sweeps", type=int, default=200, help="dual sweeps per call")
    parser.add_argument("--repeats", type=int, default=5, help="timed repetitions")
    args = parser.parse_args(argv)

    if native is None:
        print("compiled backend unavailable; nothing to compare", file=sys.stderr)
        return 1

    rng = np.random.default_rng(42)
    image = np.ascontiguousarray(rng.poisson(40.0, (args.size, args.size)).astype(np.float64))
    beta = 0.25

    out_n, pv_n, ph_n, _ = _workload(native, image, beta, args.sweeps)
    out_r, pv_r, ph_r, _ = _workload(reference, image, beta, args.sweeps)
    worst = max(np.max(np.abs(out_n - out_r)),
                np.max(np.abs(pv_n - pv_r)),
                np.max(np.abs(ph_n - ph_r)))
    print(f"agreement: max |native - reference| = {worst:.3e} "
          f"over {args.sweeps} sweeps on {args.size}x{args.size}")
    if worst > 1e-10:
        print("backends disagree beyond roundoff", file=sys.stderr)
        return 1

    times = {"native": [], "reference": []}
    for _ in range(args.repeats):
        for name, module in (("native", native), ("reference", reference)):
            *_, elapsed = _workload(module, image, beta, args.sweeps)
            times[name].append(elapsed)

    best_native = min(times["native"])
    best_reference = min(times["reference"])
    print(f"native:    best {best_native * 1e3:8.2f} ms over {args.repeats} runs")
    print(f"reference: best {best_reference * 1e3:8.2f} ms over {args.repeats} runs")
    print(f"speedup:   {best_reference / best_native:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
