"""Where do the two critical exponents cross?

For a fixed metric exponent k we walk through the spatial dimension and
print p0, p1 and the lifespan law just below the larger of the two.  The
crossing dimension N(k) is where the governing exponent switches from p1
to p0.

    python demos/exponent_landscape.py [k]
"""
import sys

from edes_lifespan.exponents import (classify_lifespan, critical_exponent_p0,
                                     critical_exponent_p1, threshold_N)

k = float(sys.argv[1]) if len(sys.argv) > 1 else 2 / 3
print(f"k = {k:.4f}, N(k) = {threshold_N(k):.6f}\n")
print(f"{'n':>3} {'p0':>10} {'p1':>10}  governing  law just below")
for n in range(1, 9):
    p0, p1 = critical_exponent_p0(n, k), critical_exponent_p1(n, k)
    pc = max(p0, p1)
    law = classify_lifespan(n, k, 1 + 0.9 * (pc - 1))
    which = "p1" if n <= threshold_N(k) else "p0"
    print(f"{n:>3} {p0:>10.6f} {p1:>10.6f}  {which:>9}  T ~ eps^-{law.exponent:.4f} ({law.regime})")
