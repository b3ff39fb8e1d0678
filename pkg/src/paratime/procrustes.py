"""Orthogonal Procrustes alignment of coarse snapshots onto fine ones.

The correlation matrix ``M = F G^T`` of two snapshot matrices is kept only
as a truncated SVD ``X diag(s) Y^T``; the aligning map is ``X Y^T``, which
is never formed densely. Snapshot matrices are plain 2D arrays with one
stacked energy-component vector per column.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .energy import EnergyComponents, stacked_components
from .grid import GridTransfer, SpeedField, WaveState, restrict

QR_DROP = 1e-14


@dataclass(frozen=True)
class PhaseCorrector:
    """Truncated SVD factors of the accumulated correlation matrix.

    ``left`` and ``right`` have orthonormal columns; applying the corrector
    maps ``v`` to ``left @ (right.T @ v)``.
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    tol: float = 1e-14

    def __post_init__(self):
        left = np.asarray(self.left, dtype=float)
        right = np.asarray(self.right, dtype=float)
        s = np.asarray(self.singular_values, dtype=float).ravel()
        if left.ndim != 2 or right.shape != left.shape or left.shape[1] != s.size:
            raise ValueError(
                f"inconsistent factor shapes {left.shape}, {s.shape}, {right.shape}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "singular_values", s)

    @classmethod
    def empty(cls, rows: int, tol: float = 1e-14) -> "PhaseCorrector":
        return cls(np.zeros((rows, 0)), np.zeros(0), np.zeros((rows, 0)), tol)

    @property
    def rows(self) -> int:
        return self.left.shape[0]

    @property
    def rank(self) -> int:
        return self.singular_values.size

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``X (Y^T v)`` for a vector or for each column of a matrix."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.rows:
            raise ValueError(f"vector length {v.shape[0]} does not match corrector rows {self.rows}")
        return self.left @ (self.right.T @ v)

    def correlation(self) -> np.ndarray:
        """Dense ``X diag(s) Y^T``; for tests and small problems only."""
        return (self.left * self.singular_values) @ self.right.T

    def drop_leading(self, count: int) -> "PhaseCorrector":
        """Remove the ``count`` largest singular triplets."""
        count = min(int(count), self.rank)
        return replace(self, left=self.left[:, count:], right=self.right[:, count:],
                       singular_values=self.singular_values[count:])


def truncated_qr(a: np.ndarray, scale: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR that drops numerically dependent directions.

    Uses column pivoting so that discarded rows of ``R`` are negligible;
    a row is dropped when its diagonal is below ``QR_DROP * scale``
    (``scale`` defaults to ``||a||_F``). Returns ``Q`` (m x p) and ``R``
    (p x n) with ``Q @ R ~= a`` and ``p <= min(m, n)``.
    """
    a = np.asarray(a, dtype=float)
    m, n = a.shape
    if scale is None:
        scale = np.linalg.norm(a)
    if n == 0 or scale == 0 or not np.any(a):
        return np.zeros((m, 0)), np.zeros((0, n))
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    keep = int(np.sum(np.abs(np.diag(r)) > QR_DROP * scale))
    r_unpiv = np.empty((keep, n))
    r_unpiv[:, piv] = r[:keep]
    return q[:, :keep], r_unpiv


def _sign_fix(u, v):
    if u.shape[1] == 0:
        return u, v
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, v * signs


def _truncate(xh, s, yh_t, basis_left, basis_right, tol, rows):
    if s.size == 0 or s[0] <= 0:
        return PhaseCorrector.empty(rows, tol)
    keep = int(np.sum(s / s[0] > tol))
    left = basis_left @ xh[:, :keep]
    right = basis_right @ yh_t[:keep].T
    left, right = _sign_fix(left, right)
    return PhaseCorrector(left, s[:keep].copy(), right, tol)


def _check_tol(tol):
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")


def procrustes_solve(F: np.ndarray, G: np.ndarray, tol: float = 1e-14) -> PhaseCorrector:
    """Minimize ``||F - Omega G||_F`` over orthogonal ``Omega`` via thin QR + small SVD.

    ``M = F G^T = Q_F (R_F R_G^T) Q_G^T``; the SVD of the small middle factor
    gives the singular vectors of ``M``. Only singular values with
    ``s_i / s_max > tol`` are kept.
    """
    _check_tol(tol)
    F, G = _check_pair(F, G)
    qf, rf = truncated_qr(F)
    qg, rg = truncated_qr(G)
    if rf.shape[0] == 0 or rg.shape[0] == 0:
        return PhaseCorrector.empty(F.shape[0], tol)
    xh, s, yh_t = np.linalg.svd(rf @ rg.T, full_matrices=False)
    return _truncate(xh, s, yh_t, qf, qg, tol, F.shape[0])


def _check_pair(F, G):
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    if F.ndim != 2 or F.shape != G.shape:
        raise ValueError(f"snapshot matrices must share a 2D shape, got {F.shape} and {G.shape}")
    return F, G


def _project_out(basis, a):
    """Coefficients and residual of ``a`` against an orthonormal basis (two passes)."""
    coef = basis.T @ a
    resid = a - basis @ coef
    extra = basis.T @ resid
    return coef + extra, resid - basis @ extra


def update_svd(corrector: PhaseCorrector, F: np.ndarray, G: np.ndarray,
               tol: float | None = None) -> PhaseCorrector:
    """Truncated SVD of ``X diag(s) Y^T + F G^T`` from that of the current corrector.

    New columns are split into the part inside the current singular
    subspaces and an orthonormalized remainder; the SVD of the small core
    matrix then rotates the enlarged bases.
    """
    tol = corrector.tol if tol is None else tol
    _check_tol(tol)
    F, G = _check_pair(F, G)
    if F.shape[0] != corrector.rows:
        raise ValueError(f"snapshot rows {F.shape[0]} do not match corrector rows {corrector.rows}")
    if corrector.rank == 0:
        return procrustes_solve(F, G, tol)
    U, S, V = corrector.left, corrector.singular_values, corrector.right
    uf, resid_f = _project_out(U, F)
    vg, resid_g = _project_out(V, G)
    qf, rf = truncated_qr(resid_f, scale=np.linalg.norm(F))
    qg, rg = truncated_qr(resid_g, scale=np.linalg.norm(G))
    r = S.size
    core = np.vstack([uf, rf]) @ np.vstack([vg, rg]).T
    core[:r, :r] += np.diag(S)
    xh, s, yh_t = np.linalg.svd(core, full_matrices=False)
    return _truncate(xh, s, yh_t, np.hstack([U, qf]), np.hstack([V, qg]), tol, corrector.rows)


def relative_residual(corrector: PhaseCorrector, F: np.ndarray, G: np.ndarray) -> float:
    """``||F - X Y^T G||_F / ||F||_F``."""
    nf = np.linalg.norm(F)
    if nf == 0:
        return 0.0
    return float(np.linalg.norm(F - corrector.apply(G)) / nf)


def assemble_snapshots(fine_states: Sequence[WaveState], coarse_states: Sequence[WaveState],
                       transfer: GridTransfer, coarse_speed: SpeedField,
                       scheme="fd2") -> tuple[np.ndarray, np.ndarray]:
    """Snapshot matrices from fine results (restricted) and coarse results.

    Column ``n`` of ``F`` holds the energy components of the restricted
    ``fine_states[n]``; column ``n`` of ``G`` those of ``coarse_states[n]``.
    Both use the coarse speed and the same gradient scheme.
    """
    if len(fine_states) == 0 or len(fine_states) != len(coarse_states):
        raise ValueError("need equally many (and at least one) fine and coarse states")
    fu = np.stack([restrict(s, transfer).u for s in fine_states])
    fv = np.stack([restrict(s, transfer).udot for s in fine_states])
    cu = np.stack([s.u for s in coarse_states])
    cv = np.stack([s.udot for s in coarse_states])
    F = stacked_components(fu, fv, coarse_speed, scheme).T
    G = stacked_components(cu, cv, coarse_speed, scheme).T
    return F, G


def apply_corrector(corrector: PhaseCorrector, comp: EnergyComponents) -> EnergyComponents:
    """Rotate energy components; ``mean_u`` passes through unchanged."""
    out = corrector.apply(comp.stacked())
    return EnergyComponents.from_stacked(comp.grid, out, comp.mean_u)
