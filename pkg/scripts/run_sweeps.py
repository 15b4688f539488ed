#!/usr/bin/env python3
"""Parameter sweeps on the synthetic 33-bus feeder: observed fraction, time
window length, and area count.  Each sweep writes a plot-ready sweep.csv plus
per-point results.json directories under results/sweeps/<param>/.
"""

import argparse
from pathlib import Path

from gridmc import cli

SWEEPS = {
    "fraction": "0.3,0.4,0.5,0.7,0.9",
    "time-steps": "1,2,5,10",
    "areas": "1,2,4,5",
}

BASE = [
    "--feeder", "feeder33", "--time-steps", "5", "--areas", "5",
    "--policy", "scada", "--fraction", "0.5", "--noise-pct", "1.0",
    "--rank", "5", "--mu", "1e4", "--nu", "1e4",
    "--gamma", "1e3", "--lambda", "1e3", "--seed", "0",
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("results/sweeps"))
    parser.add_argument("--only", choices=sorted(SWEEPS), default=None,
                        help="run a single sweep instead of all three")
    args = parser.parse_args()

    names = [args.only] if args.only else sorted(SWEEPS)
    for name in names:
        print(f"== sweep over {name} ==")
        rc = cli.main([
            "sweep", *BASE, "--param", name, "--values", SWEEPS[name],
            "--out", str(args.out / name.replace("-", "_")),
        ])
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
