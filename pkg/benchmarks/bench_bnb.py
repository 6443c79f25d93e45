"""Compare the compiled and pure-Python branch-and-bound kernels.

    python3 benchmarks/bench_bnb.py [--seeds N] [--jobs 12,16,20] [--repeat R]

Each scenario is solved by both kernels; the script checks that they agree
on the objective, the assignment and the node count, then prints the median
wall time per scenario size and the speedup.
"""

import argparse
import statistics
import sys
import time

from schedlab import kernels
from schedlab.kernels import bnb_py
from schedlab.model import generate_scenario, small_config
from schedlab.offline import OfflineProblem


def timed(fn, args, repeat):
    best = None
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        dt = time.perf_counter() - start
        best = dt if best is None else min(best, dt)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--jobs", default="12,16,20")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if kernels.BACKEND != "cython":
        print("compiled kernel not available; build with `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    print(f"{'jobs':>5}{'nodes':>12}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for n in (int(x) for x in args.jobs.split(",")):
        py_t, cy_t, nodes = [], [], []
        for seed in range(args.seeds):
            sc = generate_scenario(small_config(seed, num_jobs=n))
            p = OfflineProblem(sc)
            inputs = (p.release, p.deadline, sc.demand, sc.completion_value)
            tp, ref = timed(bnb_py.solve, inputs, args.repeat)
            tc, got = timed(kernels.solve, inputs, args.repeat)
            if list(ref[0]) != list(got[0]) or ref[1:] != got[1:]:
                print(f"kernels disagree on jobs={n} seed={seed}", file=sys.stderr)
                return 2
            py_t.append(tp)
            cy_t.append(tc)
            nodes.append(ref[2])
        mp, mc = statistics.median(py_t), statistics.median(cy_t)
        print(f"{n:>5}{statistics.median(nodes):>12.0f}{mp:>12.4f}{mc:>12.5f}{mp / mc:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
