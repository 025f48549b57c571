"""GP vs DPP (kernel build + MAP) wall time over network sizes.

    python scripts/bench_runtime.py --scenario dronecell --sizes 21,57 --reps 30
    python scripts/bench_runtime.py --scenario adhoc --sizes 10,20,40 --params runs/adhoc/model.json

Drone sizes are 3 x cell count (3, 21, 57, 111, ...).
"""
import argparse

from dppl import experiment as ex


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", choices=("adhoc", "dronecell"), default="dronecell")
    p.add_argument("--sizes", default="21,57")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", help="trained model.json (default: initial parameters)")
    p.add_argument("--out", default="bench")
    args = p.parse_args()

    cfg = ex.ExperimentConfig(scenario=args.scenario, seed=args.seed)
    params = ex.load_params(args.params) if args.params else None
    sizes = [int(s) for s in args.sizes.split(",")]
    for row in ex.cmd_bench(cfg, args.out, sizes, params, args.reps):
        print(f"m={row['m']:4d}  gp {row['gpMeanMicros'] / 1e3:9.2f} ms  "
              f"dppl {row['dpplMeanMicros'] / 1e3:7.3f} ms  ratio {row['ratio']:8.1f}")


if __name__ == "__main__":
    main()
