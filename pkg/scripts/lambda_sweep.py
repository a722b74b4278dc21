"""Solution counts across a lambda grid (wraps the ``sweep`` CLI command).

    python scripts/lambda_sweep.py configs/example_cascade.yaml --out results/sweep.json
"""
import argparse
import sys

from anisolap.cli import build_report, emit
from anisolap.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    cfg = load_config(args.config)
    report, tables, code = build_report("sweep", cfg)
    res = report["payload"]["result"]
    iv = res.get("interval", {})
    print(f"interval ]{iv.get('lower')}, {iv.get('upper')}[  fallback range used: {res.get('used_fallback_range')}")
    for pt in res.get("points", []):
        print(f"  lambda = {pt['lambda']:<12.6g} solutions = {pt['n_solutions']:<3} ({pt['method']})")
    if args.out:
        emit(report, tables, args.out, "both")
    return code


if __name__ == "__main__":
    sys.exit(main())
