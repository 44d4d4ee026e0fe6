"""Three routes to the same kernel at k = 2/3.

The fundamental solutions y0, y1 of y'' = lam^2 t^{-2k} y can be written
with modified Bessel functions for any k.  At k = 2/3 there is also an
elementary closed form and a pair built from confluent hypergeometric
functions.  This script evaluates all three on a small grid and prints the
largest relative disagreement.
"""
import numpy as np

from edes_lifespan.kernels import (SpacetimeParams, kernel_pair_2_3_hypergeometric, kernel_y0,
                                   kernel_y0_elementary, kernel_y1, kernel_y1_elementary)

params = SpacetimeParams(2 / 3)
worst = 0.0
print(f"{'t':>6} {'s':>5} {'lam':>5} {'y1 (Bessel)':>22} {'y1 (elementary)':>22}")
for t in (2.0, 8.0, 30.0):
    for s in (1.0, t ** 0.5):
        for lam in (0.1, 1.0, 3.0):
            b0 = kernel_y0(t, s, lam, params).value
            b1 = kernel_y1(t, s, lam, params).value
            e0, e1 = kernel_y0_elementary(t, s, lam), kernel_y1_elementary(t, s, lam)
            h0, h1 = kernel_pair_2_3_hypergeometric(t, s, lam, params)
            for ref, others in ((b0, (e0, h0)), (b1, (e1, h1))):
                worst = max(worst, max(abs(o - ref) / abs(ref) for o in others))
            if lam == 1.0:
                print(f"{t:6.1f} {s:5.2f} {lam:5.1f} {b1:22.15e} {e1:22.15e}")
print(f"\nlargest relative disagreement: {worst:.2e}")
