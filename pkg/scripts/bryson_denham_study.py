"""Bryson-Denham: approaches (a)/(b)/(c) at n = 3 and a degree sweep.

Writes ``bd_modes.json`` with the three n = 3 records (trajectories alongside)
and ``bd_degree_<mode>.csv`` for n = 3..10.
"""
import argparse
from pathlib import Path

from flexcolloc.cli import ExperimentConfig, emit, run, sweep
from flexcolloc.problems import bryson_denham_cost, bryson_denham_reference


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results/bryson_denham")
    parser.add_argument("--degrees", default="3,4,5,6,7,8,9,10")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    modes = [run(ExperimentConfig(problem="bryson-denham", mode=m, degree=3, intervals=3, flex=0.5))
             for m in "abc"]
    emit(modes, out / "bd_modes.json", "json")
    for r in modes:
        print(f"mode {r.config['mode']}: cost {r.cost:.8f}  ineq {r.inequality_violation:.2e}  "
              f"dyn {r.dynamic_violation:.2e}  breaks {[round(b, 4) for b in r.breakpoints]}")

    ref = bryson_denham_reference()
    print(f"reference cost {ref:.10f} (closed form {bryson_denham_cost():.10f})")
    degrees = [int(v) for v in args.degrees.split(",")]
    for m in "abc":
        base = ExperimentConfig(problem="bryson-denham", mode=m, intervals=3, flex=0.5)
        records = sweep(base, "degree", degrees, jobs=args.jobs)
        emit(records, out / f"bd_degree_{m}.csv", "csv")
        for r in records:
            print(f"mode {m} n={r.config['degree']:2d} cost err {abs(r.cost - ref) / ref:.2e}  "
                  f"ineq {r.inequality_violation:.2e}  dyn {r.dynamic_violation:.2e}")


if __name__ == "__main__":
    main()
