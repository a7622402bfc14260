#!/usr/bin/env python3
"""Recompute report.json aggregates from trials.csv and compare them.

Usage: recompute_report.py OUT_DIR [--tol 1e-9]
Exits nonzero when any statistic differs by more than the tolerance.
"""
import argparse
import csv
import json
import math
import sys
from pathlib import Path


def stat(values):
    vals = [v for v in values if math.isfinite(v)]
    if not vals:
        return {"mean": None, "std": None, "n": 0}
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / len(vals)
    return {"mean": mean, "std": math.sqrt(var), "n": len(vals)}


def recompute(trials_csv):
    with open(trials_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    conv = [r for r in rows if r["converged"] == "1"]
    col = lambda name, scale: [float(r[name]) * scale for r in conv]
    return {
        "trials": len(rows),
        "converged": len(conv),
        "convergence_rate_pct": 100.0 * len(conv) / len(rows) if rows else 0.0,
        "end_error_mm": stat(col("end_error_m", 1000.0)),
        "end_error_deg": stat(col("end_error_rad", 180.0 / math.pi)),
        "ape_cm": stat(col("ape_trans_m", 100.0)),
        "ape_deg": stat(col("ape_rot_rad", 180.0 / math.pi)),
        "length_ratio": stat(col("length_ratio", 1.0)),
    }


def close(a, b, tol):
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def compare(expected, report, tol):
    problems = []
    for key, want in expected.items():
        got = report.get(key)
        if isinstance(want, dict):
            for field in ("mean", "std", "n"):
                if not close(want[field], got[field], tol):
                    problems.append(f"{key}.{field}: report {got[field]!r}, recomputed {want[field]!r}")
        elif not close(want, got, tol):
            problems.append(f"{key}: report {got!r}, recomputed {want!r}")
    return problems


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args()
    expected = recompute(args.out_dir / "trials.csv")
    report = json.loads((args.out_dir / "report.json").read_text())
    problems = compare(expected, report, args.tol)
    for p in problems:
        print(p)
    print("report matches trials.csv" if not problems else f"{len(problems)} mismatches")
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
