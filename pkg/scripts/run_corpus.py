#!/usr/bin/env python3
"""Run the full stasis -> cycle -> sweep -> verify pipeline on a scenario
directory and summarize the results.

Usage: python scripts/run_corpus.py [--scenarios DIR] [--out DIR]
                                    [--delta F]
"""

import argparse
import glob
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from kcycle.cli import main as cli_main  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenarios",
                        default=os.path.join(os.path.dirname(__file__), "..",
                                             "scenarios"))
    parser.add_argument("--out", default="corpus_results")
    parser.add_argument("--delta", default="0.2",
                        help="total cycle time for the cycle stage")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for path in sorted(glob.glob(os.path.join(args.scenarios, "*.json"))):
        name = os.path.splitext(os.path.basename(path))[0]
        print(f"=== {name} ===")
        stasis = cli_main(["stasis", "--scenario", path])
        cycle = cli_main(["cycle", "--scenario", path, "--delta", args.delta,
                          "--out", args.out])
        sweep = cli_main(["sweep", "--scenario", path, "--out", args.out])
        verify = None
        if cycle == 0:
            record = glob.glob(os.path.join(args.out, "*_cycle.json"))
            latest = max(record, key=os.path.getmtime)
            verify = cli_main(["verify", latest])
        rows.append((name, stasis, cycle, sweep, verify))
        print()

    print(f"{'scenario':22s} stasis cycle sweep verify")
    for name, stasis, cycle, sweep, verify in rows:
        v = "-" if verify is None else str(verify)
        print(f"{name:22s} {stasis:6d} {cycle:5d} {sweep:5d} {v:>6s}")


if __name__ == "__main__":
    main()
