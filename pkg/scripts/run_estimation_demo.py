#!/usr/bin/env python3
"""End-to-end demo on the synthetic 33-bus feeder: 5 areas, 5 time steps,
half-observed scada measurements with 1% noise, 5 seeded repeats.

Writes results.json, trace.csv, and spectrum.csv under results/demo and
prints the aggregate error report with confidence intervals.
"""

import argparse
import json
from pathlib import Path

from gridmc import cli
from gridmc import completion as cp


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("results/demo"))
    parser.add_argument("--areas", type=int, default=5)
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    config = cli.ExperimentConfig(
        feeder="feeder33",
        time_steps=5,
        areas=args.areas,
        policy="scada",
        fraction=0.5,
        noise_pct=1.0,
        runs=args.runs,
        seed=args.seed,
        admm=cp.AdmmConfig(mu=1e4, nu=1e4, gamma=1e3, lam=1e3, rank=5),
    )
    payload = cli.run_experiment(config, args.out)
    print(json.dumps(payload["estimate"], indent=2))
    print(f"iterations: {payload['iterations']}")
    print(f"low observability: {payload['low_observability']}")
    for entry in payload["communication"]:
        print(f"pair {entry['pair']}: {entry['per_iteration_measured']} reals "
              f"per iteration (full exchange {entry['full_exchange']})")
    print(f"outputs in {args.out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
