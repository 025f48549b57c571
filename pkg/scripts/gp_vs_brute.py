"""Quantized GP sum-rate relative to the brute-force optimum on small ad hoc networks.

Two ways of getting m <= 8 networks:

* ``filter``: default instances (density 20 on the unit square) with m <= 8;
* ``dense``:  exactly m links on a square of area m / 20, so density stays 20.

    python scripts/gp_vs_brute.py --protocol dense --count 100
"""
import argparse
import math

import numpy as np

from dppl.network import AdHocConfig, gen_adhoc
from dppl.schedulers import brute_force_schedule, gp_schedule


def instances(protocol, count, seed):
    rng = np.random.default_rng(seed)
    k = 0
    while count:
        if protocol == "filter":
            inst = gen_adhoc(AdHocConfig(), seed=[seed, k])
            k += 1
            if inst.m > 8:
                continue
        else:
            m = int(rng.integers(1, 9))
            inst = gen_adhoc(AdHocConfig(num_links=m, side=math.sqrt(m / 20)), seed=[seed, k])
            k += 1
        count -= 1
        yield inst


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--protocol", choices=("filter", "dense"), default="filter")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=105)
    args = p.parse_args()

    ratios, sizes = [], []
    for inst in instances(args.protocol, args.count, args.seed):
        ratios.append(gp_schedule(inst).sum_rate / brute_force_schedule(inst).sum_rate)
        sizes.append(inst.m)
    ratios = np.array(ratios)
    print(f"{args.protocol}: mean ratio {ratios.mean():.4f}  min {ratios.min():.3f}  "
          f"below 0.9: {np.sum(ratios < 0.9)}/{len(ratios)}  mean m {np.mean(sizes):.1f}")


if __name__ == "__main__":
    main()
