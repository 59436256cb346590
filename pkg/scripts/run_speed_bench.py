"""Time the naive ambient scatter distance against the projected pipeline.

Defaults match the motivating workload: d = 4096 feature dimension with 30
source and 3 target columns, i.e. a reduction to 33 dimensions.
"""

import argparse
import sys

from spdalign.bench import run_bench
from spdalign.distances import DistanceKind


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--d", type=int, default=4096)
    parser.add_argument("--n", type=int, default=30)
    parser.add_argument("--nstar", type=int, default=3)
    parser.add_argument("--reps", type=int, default=3)
    parser.add_argument("--kind", default="jbld")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    kind = DistanceKind.parse(args.kind)
    result = run_bench(args.d, args.n, args.nstar, args.reps, kind, seed=args.seed)
    print(f"kind={kind.value}  d={args.d}  d'={args.n + args.nstar}  reps={args.reps}")
    print(f"naive ambient : {result.naive_mean:9.4f}s  (std {result.naive_std:.4f}s)")
    print(f"projected     : {result.projected_mean:9.6f}s  (std {result.projected_std:.6f}s)")
    print(f"speedup       : {result.speedup:9.1f}x")
    print(f"value gap     : {abs(result.naive_value - result.projected_value):.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
