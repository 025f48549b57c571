"""Generate, label, train and evaluate one scenario end to end.

    python scripts/run_experiment.py --scenario adhoc --out runs/adhoc
    python scripts/run_experiment.py --scenario dronecell --out runs/drone --workers 4

Writes the artifacts described in ``dppl.experiment`` and prints the mean
sum-rate of every scheduler.
"""
import argparse
import json
import logging
import time

from dppl import experiment as ex


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", choices=("adhoc", "dronecell"), default="adhoc")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-size", type=int)
    p.add_argument("--test-size", type=int, default=200)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--brute", action="store_true",
                   help="also run brute force; instances with m > 20 fail its size guard, "
                        "so its mean covers fewer instances")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = ex.ExperimentConfig(scenario=args.scenario, seed=args.seed, train_size=args.train_size,
                              test_size=args.test_size, workers=args.workers)
    t0 = time.perf_counter()
    ex.cmd_generate(cfg, args.out)
    for solver in ["gp"] + (["brute"] if args.brute else []):
        failed = ex.cmd_solve(args.out, solver)
        logging.info("%s done, %d failures", solver, failed)
    params = ex.cmd_train(args.out, "gp")
    logging.info("trained: %s", params.to_json())
    summary = ex.cmd_eval(args.out)
    print(json.dumps(summary["meanSumRate"], indent=2))
    logging.info("total %.1f s", time.perf_counter() - t0)


if __name__ == "__main__":
    main()
