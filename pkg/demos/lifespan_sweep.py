"""Measure the lifespan of small solutions and compare with the predicted law.

Runs the radial simulator for a decade of data sizes eps at
(k, n, p) = (0, 1, 2), fits log T against log(1/eps), and prints the
fitted slope next to the predicted exponent.  Takes under a minute.
"""
from edes_lifespan import pde_sim as ps

eps_values = [0.5 * 10 ** (-j / 4) for j in range(5)]
configs = [ps.SimConfig(k=0.0, n=1, p=2.0, eps=e, dr=1 / 100, t_max=1e4, compute_curly=False)
           for e in eps_values]
report = ps.sweep_and_fit(configs, workers=1)
for run in report["runs"]:
    print(f"eps = {run['eps']:.4f}   T_num = {run['T_num']:10.3f}   "
          f"refinement agreement {run['refinement_agreement']:.1e}")
print(f"\nfitted slope {report['fitted_slope']:.4f}, predicted {report['predicted_exponent']}"
      f" ({report['verdict']})")
