"""Quotient tables G(s_m)/s_m^gamma and G(t_m)/t_m^(gamma-1) in log2, with the bound checks.

    python scripts/example_quotients.py --gamma 3 --m 4 7
"""
import argparse
import time
from fractions import Fraction

import mpmath

from anisolap import ExampleG, quotient_tables


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", default="3")
    ap.add_argument("--m", type=int, nargs=2, default=None, metavar=("LO", "HI"))
    args = ap.parse_args()

    ex = ExampleG(Fraction(args.gamma))
    ms = range(args.m[0], args.m[1] + 1) if args.m else None
    t0 = time.perf_counter()
    tab = quotient_tables(ex, ms)
    print(f"{ex}, {tab.prec} bits, {time.perf_counter() - t0:.2f} s")
    print(f"{'m':>3} {'log2 upper':>14} {'log2 lower':>22} {'bounds':>8}")
    for m, u, lo, a, b in zip(tab.ms, tab.upper_log2, tab.lower_log2, tab.upper_bound_ok, tab.lower_bound_ok):
        print(f"{m:>3} {float(u):>14.4f} {mpmath.nstr(lo, 8):>22} {'ok' if a and b else 'FAIL':>8}")
    print(f"upper decreasing: {tab.upper_decreasing}, lower increasing: {tab.lower_increasing}")


if __name__ == "__main__":
    main()
