"""Final-epoch relative stationarity of ME1, ME+, PM, EM and RM per problem and seed.

Uses the frozen protocol in ``sipm.experiments`` (exponents from
``scripts/exponent_sweep.py``, power-law steps, 200 epochs). With
``--defaults`` every variant runs its default schedule at s_eta = 0.5
and is scored on the last iterate instead.

    python scripts/ordering.py
    python scripts/ordering.py --defaults --seeds 0,1,2
"""

import argparse
import time

from sipm.experiments import (
    ORDERING_VARIANTS,
    PROBLEMS,
    ExperimentConfig,
    ordering_config,
    ordering_holds,
    ordering_score,
    run_config,
)


def default_config(problem, variant, seed, epochs):
    return ExperimentConfig(
        problem=problem, variant=variant, s_eta=0.5, epsilon=1e-3, seed=seed, epochs=epochs,
        record_every=10, stop_at_tolerance=False,
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--problems", default=",".join(PROBLEMS))
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--epochs", type=float, default=200.0)
    ap.add_argument("--defaults", action="store_true", help="default schedules, last-iterate score")
    args = ap.parse_args()
    seeds = [int(s) for s in args.seeds.split(",")]
    print(f"{'problem':<10} {'seed':>4} " + " ".join(f"{v:>9}" for v in ORDERING_VARIANTS) + "  ordering")
    t0 = time.perf_counter()
    for problem in args.problems.split(","):
        held = 0
        for seed in seeds:
            stat = {}
            for v in ORDERING_VARIANTS:
                if args.defaults:
                    stat[v] = run_config(default_config(problem, v, seed, args.epochs)).final().stat_rel
                else:
                    stat[v] = ordering_score(run_config(ordering_config(problem, v, seed, args.epochs)))
            ok = ordering_holds(stat)
            held += ok
            print(f"{problem:<10} {seed:>4} " + " ".join(f"{stat[v]:9.2e}" for v in ORDERING_VARIANTS) + f"  {'holds' if ok else 'fails'}")
        print(f"{problem:<10} ordering holds on {held}/{len(seeds)} seeds")
    print(f"{time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
