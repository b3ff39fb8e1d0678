"""Procrustes alignment and the streaming SVD behind the phase corrector.

A hidden rotation maps one set of vectors onto another; the solver recovers
it from data alone, and feeding the data in blocks gives the same answer as
solving with everything at once.
"""
import numpy as np
from scipy.stats import ortho_group

from paratime.procrustes import PhaseCorrector, procrustes_solve, relative_residual, update_svd

rng = np.random.default_rng(0)
rows, cols = 12, 30

true_rotation = ortho_group.rvs(rows, random_state=1)
G = rng.standard_normal((rows, cols))
F = true_rotation @ G + 1e-3 * rng.standard_normal((rows, cols))  # slightly noisy images

omega = procrustes_solve(F, G)
print(f"rank {omega.rank}, relative residual {relative_residual(omega, F, G):.2e}")
print("rotation error:", np.linalg.norm(omega.left @ omega.right.T - true_rotation))

# same data, three blocks at a time
stream = PhaseCorrector.empty(rows)
for block in np.array_split(np.arange(cols), 3):
    stream = update_svd(stream, F[:, block], G[:, block])
print("streamed vs batch correlation:", np.linalg.norm(stream.correlation() - omega.correlation()))

# truncation: a looser tolerance keeps fewer directions and fits worse
for tol in (1e-14, 1e-1, 5e-1):
    c = procrustes_solve(F, G, tol=tol)
    print(f"tol {tol:g}: rank {c.rank:2d}, residual {relative_residual(c, F, G):.3f}")
