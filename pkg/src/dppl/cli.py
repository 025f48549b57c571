"""Command-line entry point: ``dppl {generate,solve,train,eval,bench}``.

Exit codes: 0 success, 1 solver failures present, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiment as ex
from . import model as md

log = logging.getLogger("dppl")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _sizes(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dppl", description="DPP-learning link scheduling experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="experiment config (JSON)")
            sp.add_argument("--seed", type=int, help="master seed (overrides config)")
            sp.add_argument("--scenario", choices=("adhoc", "dronecell"))
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--workers", type=int, help="process count")

    g = sub.add_parser("generate", help="draw train and test network instances")
    common(g)
    g.add_argument("--train-size", type=int)
    g.add_argument("--test-size", type=int)

    s = sub.add_parser("solve", help="run a baseline scheduler on a generated dataset")
    common(s, config=False)
    s.add_argument("--solver", default="gp", type=_csv_list, help="gp, brute or both (comma list)")

    t = sub.add_parser("train", help="fit the DPP model to the training labels")
    common(t, config=False)
    t.add_argument("--solver", default="gp", help="which labels to train on")
    t.add_argument("--theta", type=float, nargs="+", help="initial theta")
    t.add_argument("--sigma", type=float, help="initial sigma")
    t.add_argument("--max-iter", type=int, default=2000)

    e = sub.add_parser("eval", help="DPP inference and thinning on the test split, plus reports")
    common(e, config=False)
    e.add_argument("--params", help="model file (default OUT/model.json)")
    e.add_argument("--mode", type=_csv_list, help="map, sample or both (comma list)")

    b = sub.add_parser("bench", help="GP vs DPP runtime over network sizes")
    common(b)
    b.add_argument("--sizes", type=_sizes, help="comma-separated link counts")
    b.add_argument("--reps", type=int)
    b.add_argument("--params", help="model file (default: initial parameters)")
    return p


def _config(args) -> ex.ExperimentConfig:
    raw = {}
    if args.config:
        raw = ex.ExperimentConfig.load(args.config).to_dict()
    if args.scenario:
        raw["scenario"] = args.scenario
        if not args.config or "trainSize" not in raw:
            raw.pop("trainSize", None)
    if args.seed is not None:
        raw["seed"] = args.seed
    if getattr(args, "train_size", None):
        raw["trainSize"] = args.train_size
    if getattr(args, "test_size", None):
        raw["testSize"] = args.test_size
    if args.workers:
        raw["workers"] = args.workers
    return ex.ExperimentConfig.from_dict(raw)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            ex.cmd_generate(_config(args), args.out)
        elif args.command == "solve":
            failures = sum(ex.cmd_solve(args.out, s, args.workers) for s in args.solver)
            if failures:
                log.error("%d instance(s) failed", failures)
                return 1
        elif args.command == "train":
            ds = ex.Dataset(args.out)
            init = md.ModelParams.default(ds.config.scenario)
            if args.theta is not None:
                init.theta = args.theta
            if args.sigma is not None:
                init.sigma = args.sigma
            init = md.ModelParams(init.family, init.theta, init.sigma)
            params = ex.cmd_train(args.out, args.solver, init,
                                  md.TrainConfig(max_iter=args.max_iter, seed=ds.config.seed))
            print(params.to_json())
        elif args.command == "eval":
            summary = ex.cmd_eval(args.out, args.params, args.mode, args.workers)
            for tag, rate in summary["meanSumRate"].items():
                print(f"{tag:12s} mean sum-rate {rate:.4f}")
        elif args.command == "bench":
            cfg = _config(args)
            params = ex.load_params(args.params) if args.params else None
            for row in ex.cmd_bench(cfg, args.out, args.sizes, params, args.reps):
                print(f"m={row['m']:4d}  gp {row['gpMeanMicros']:.0f} us  "
                      f"dppl {row['dpplMeanMicros']:.0f} us  ratio {row['ratio']:.1f}")
    except ex.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
