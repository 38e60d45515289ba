"""Compiled vs numpy kernels on canonical workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time of each workload per backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from afkp import kernels
from afkp.eigensolver import solve_spectrum
from afkp.overlaps import build_overlap_matrix
from afkp.potential import lattice


def workloads(backend):
    p1 = lattice(10, 10, 50, 0.0)
    p2 = lattice(10, 10, 50, 0.04)
    ks = np.linspace(0.5, 600.0, 20000)
    s1 = solve_spectrum(p1, 60)
    s2 = solve_spectrum(p2, 2000)
    fns = kernels.get_backend(backend)

    def shoot():
        fns.shoot(ks, p2.widths, p2.strengths)

    def overlaps():
        with kernels.using(backend):
            build_overlap_matrix(s1, s2, 60, 2000)

    def solve():
        solve_spectrum(p2, 2000, backend=backend)

    return {"shoot 20000 k": shoot, "overlap 60x2000": overlaps, "solve 2000 levels": solve}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = [b for b in ("python", "cython") if b in kernels.BACKENDS]
    results = {}
    for b in names:
        for label, fn in workloads(b).items():
            results[label, b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    labels = list(workloads(names[0]))
    print(f"{'workload':<20}" + "".join(f"{b:>12}" for b in names) + "     speedup")
    for label in labels:
        row = f"{label:<20}" + "".join(f"{results[label, b]:>11.4f}s" for b in names)
        if len(names) == 2:
            row += f"{results[label, 'python'] / results[label, 'cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
