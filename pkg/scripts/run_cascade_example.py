"""Cascade of small solutions on the factorial-scale example.

    python scripts/run_cascade_example.py --T 2 --lam 1 --gamma 3 --m 4 7
"""
import argparse
import time

import mpmath

from anisolap import cascade, make_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=2)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--gamma", default="3")
    ap.add_argument("--m", type=int, nargs=2, default=(4, 7), metavar=("LO", "HI"))
    args = ap.parse_args()

    inst = make_instance(f"example_esempio({args.gamma})", args.T, lam=args.lam)
    ex = inst.meta["example"]
    cs = [ex.s(m) for m in range(args.m[0], args.m[1] + 1)]
    t0 = time.perf_counter()
    rep = cascade(inst, cs)
    print(f"{inst.nonlinearity.name}, T={args.T}, lambda={args.lam}: {time.perf_counter() - t0:.1f} s")
    print(f"{'level':>5} {'log2 c':>8} {'status':>14} {'log2 probe b':>13}")
    for lv in rep.levels:
        b = f"{float(mpmath.log(lv.probe.b, 2)):.1f}" if lv.probe else "-"
        print(f"{lv.level:>5} {float(mpmath.log(lv.c, 2)):>8.0f} {lv.status:>14} {b:>13}")
    print(f"\n{'level':>5} {'log2 |u|_inf':>13} {'log2 Phi':>10} {'scaled res':>11}")
    for s in sorted(rep.solutions, key=lambda s: s.level):
        print(
            f"{s.level:>5} {float(mpmath.log(s.sup_norm, 2)):>13.2f} "
            f"{float(mpmath.log(s.phi, 2)):>10.1f} {s.scaled_residual:>11.1e}"
        )
    print("converged" if rep.converged else "NOT converged")


if __name__ == "__main__":
    main()
