#!/usr/bin/env python3
"""Recomputes the exported latency summary from frames.csv.

Usage: check_cdf.py <vidlink binary> <work dir>
"""

import csv
import json
import math
import pathlib
import subprocess
import sys


def nearest_rank(sorted_values, p):
    rank = max(1, math.ceil(p * len(sorted_values)))
    return sorted_values[rank - 1]


def main():
    binary, work = sys.argv[1], pathlib.Path(sys.argv[2])
    out = work / "run"
    subprocess.run([binary, "run", "paper-default", "--seed", "3",
                    "--out", str(out)], check=True, stdout=subprocess.DEVNULL)
    summary = json.loads((out / "summary.json").read_text())

    e2e, rtt = [], []
    with open(out / "frames.csv", newline="") as f:
        for row in csv.DictReader(f):
            if row["stream_id"] == "0" and row["e2e_us"]:
                e2e.append(int(row["e2e_us"]))
                rtt.append(int(row["rtt_us"]))
    e2e.sort()
    rtt.sort()

    n = len(e2e)
    cdf = []
    for i, v in enumerate(e2e):
        if i + 1 == n or e2e[i + 1] != v:
            cdf.append([v, (i + 1) / n])

    budget = summary["qos_budget_us"]
    errors = []
    if [p[0] for p in summary["e2e_cdf"]] != [p[0] for p in cdf]:
        errors.append("CDF latencies differ")
    if any(abs(a[1] - b[1]) > 1e-12 for a, b in zip(summary["e2e_cdf"], cdf)):
        errors.append("CDF fractions differ")
    violation = sum(1 for v in e2e if v > budget) / n
    if abs(summary["violation_fraction"] - violation) > 1e-12:
        errors.append(f"violation {summary['violation_fraction']} != {violation}")
    if summary["rtt"]["median_us"] != nearest_rank(rtt, 0.5):
        errors.append("RTT median differs")
    if summary["e2e"]["p75_us"] != nearest_rank(e2e, 0.75):
        errors.append("e2e p75 differs")
    if summary["completed_detections"] != n:
        errors.append("detection count differs")

    for e in errors:
        print("FAIL:", e)
    print(f"checked {n} frames")
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
