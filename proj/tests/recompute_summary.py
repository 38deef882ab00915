"""Recompute per-(metric, N) means and standard errors from raw.csv and
compare them with summary.json."""
import csv
import json
import math
import sys
from collections import OrderedDict
from pathlib import Path


def main(d: Path) -> int:
    groups = OrderedDict()
    with open(d / "raw.csv", newline="") as f:
        for row in csv.DictReader(f):
            groups.setdefault((row["metric"], int(row["N"])), []).append(float(row["value"]))
    summary = json.loads((d / "summary.json").read_text())["aggregates"]
    if len(summary) != len(groups):
        print("aggregate count mismatch")
        return 1
    bad = 0
    for agg, ((metric, n), vals) in zip(summary, groups.items()):
        mean = math.fsum(vals) / len(vals)
        se = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1) / len(vals)) if len(vals) > 1 else 0.0
        if agg["metric"] != metric or agg["N"] != n or agg["count"] != len(vals):
            print("key mismatch", agg, metric, n)
            bad += 1
        elif abs(agg["mean"] - mean) > 1e-12 or abs(agg["stderr"] - se) > 1e-12:
            print("value mismatch", metric, n, agg["mean"], mean, agg["stderr"], se)
            bad += 1
    print(f"{len(groups)} aggregates checked, {bad} mismatches")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(Path(sys.argv[1])))
