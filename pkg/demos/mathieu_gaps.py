"""Print Mathieu gap lengths next to their classical asymptotic form.

Usage: python3 demos/mathieu_gaps.py [q]
"""
import math
import sys

from hillbasis import criteria as cr
from hillbasis import potential as pt


def main(q=1.0):
    asm, rep = cr.analyze(pt.mathieu(q), "PerPlus", 64, validate=False)
    print(f"{'n':>3} {'|gamma_n|':>14} {'asymptote':>14} {'kappa_n':>10} {'t_n':>10}")
    for b in asm.blocks:
        g = b.exact["gamma"] if b.exact and "gamma" in b.exact else b.gamma
        asym = 8 * (abs(q) / 4) ** b.n / math.factorial(b.n - 1) ** 2
        kap = rep.kappa_seq.get(b.n, float("nan"))
        t = rep.t_seq.get(b.n, float("nan"))
        print(f"{b.n:>3} {float(abs(g)):>14.6e} {asym:>14.6e} {kap:>10.5f} {t:>10.5f}")
    for name, v in rep.verdicts.items():
        print(f"criterion {name}: {v.status}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 1.0)
