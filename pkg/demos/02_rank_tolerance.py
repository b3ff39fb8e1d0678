"""How the SVD truncation tolerance limits the attainable accuracy.

Runs the 1D constant-medium study with several tolerances and prints the
final-time energy error per iteration. Errors first fall, then level off
at roughly sqrt(tol).
"""
import numpy as np

from paratime.experiments import execute, preset

tols = [1e-12, 1e-9, 1e-6, 1e-3]
runs = {}
for tol in tols:
    runs[tol] = execute(preset("rank-tolerance").with_overrides(tol=tol, K=15)).final_energy_errors()

print("k   " + "".join(f"{f'tol={t:g}':>12s}" for t in tols))
for k in range(15):
    print(f"{k + 1:<4d}" + "".join(f"{runs[t][k]:12.3e}" for t in tols))

print("\nsqrt(tol)" + "".join(f"{np.sqrt(t):12.3e}" for t in tols))
