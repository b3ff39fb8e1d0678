import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from paratime.energy import to_components
from paratime.grid import Grid, GridTransfer, SpeedField, WaveState
from paratime.procrustes import (
    PhaseCorrector,
    apply_corrector,
    assemble_snapshots,
    procrustes_solve,
    relative_residual,
    truncated_qr,
    update_svd,
)


def _pair(rng, rows, cols):
    return rng.standard_normal((rows, cols)), rng.standard_normal((rows, cols))


def test_square_case_matches_scipy(rng):
    F, G = _pair(rng, 5, 9)
    omega = procrustes_solve(F, G)
    # scipy minimizes ||G^T R - F^T||, so R = Omega^T
    R, _ = scipy.linalg.orthogonal_procrustes(G.T, F.T)
    assert np.allclose(omega.left @ omega.right.T, R.T, atol=1e-12)


def test_factors_orthonormal_and_sign_fixed(rng):
    F, G = _pair(rng, 12, 4)
    c = procrustes_solve(F, G)
    assert c.rank == 4
    assert np.allclose(c.left.T @ c.left, np.eye(4), atol=1e-12)
    assert np.allclose(c.right.T @ c.right, np.eye(4), atol=1e-12)
    idx = np.argmax(np.abs(c.left), axis=0)
    assert (c.left[idx, np.arange(4)] > 0).all()
    assert np.all(np.diff(c.singular_values) <= 0)
    assert np.allclose(c.correlation(), F @ G.T, atol=1e-12)


def test_tolerance_truncates(rng):
    U = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    s = np.array([1.0, 1e-5, 1e-10])
    F = U * s
    G = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    assert procrustes_solve(F, G, tol=1e-14).rank == 3
    assert procrustes_solve(F, G, tol=1e-7).rank == 2
    assert procrustes_solve(F, G, tol=1e-3).rank == 1
    with pytest.raises(ValueError):
        procrustes_solve(F, G, tol=0.0)
    with pytest.raises(ValueError):
        procrustes_solve(F, G[:, :2])


def test_truncated_qr_drops_dependent_columns(rng):
    a = rng.standard_normal((8, 3))
    a = np.hstack([a, a[:, :1] + a[:, 1:2]])
    q, r = truncated_qr(a)
    assert q.shape == (8, 3) and r.shape == (3, 4)
    assert np.allclose(q @ r, a, atol=1e-12)
    q0, r0 = truncated_qr(np.zeros((5, 2)))
    assert q0.shape == (5, 0) and r0.shape == (0, 2)


def test_empty_and_zero_inputs(rng):
    c = PhaseCorrector.empty(6)
    assert c.rank == 0
    assert np.array_equal(c.apply(np.ones(6)), np.zeros(6))
    assert procrustes_solve(np.zeros((6, 2)), rng.standard_normal((6, 2))).rank == 0
    with pytest.raises(ValueError):
        c.apply(np.ones(5))


def test_drop_leading(rng):
    c = procrustes_solve(*_pair(rng, 10, 4))
    d = c.drop_leading(1)
    assert d.rank == 3 and np.array_equal(d.singular_values, c.singular_values[1:])
    assert c.drop_leading(10).rank == 0


def test_update_into_empty_equals_solve(rng):
    F, G = _pair(rng, 9, 3)
    a = update_svd(PhaseCorrector.empty(9), F, G)
    b = procrustes_solve(F, G)
    assert np.allclose(a.correlation(), b.correlation(), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), rows=st.integers(4, 16),
       blocks=st.lists(st.integers(1, 4), min_size=1, max_size=4))
def test_update_chain_matches_dense(seed, rows, blocks):
    rng = np.random.default_rng(seed)
    c = PhaseCorrector.empty(rows, 1e-15)
    M = np.zeros((rows, rows))
    for cols in blocks:
        F, G = _pair(rng, rows, cols)
        c = update_svd(c, F, G)
        M += F @ G.T
    assert np.linalg.norm(c.correlation() - M) <= 1e-10 * np.linalg.norm(M)
    s = np.linalg.svd(M, compute_uv=False)
    assert np.allclose(c.singular_values, s[:c.rank], rtol=1e-9, atol=1e-12 * s[0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), rows=st.integers(2, 12), cols=st.integers(1, 6))
def test_residual_identity(seed, rows, cols):
    # ||F - Omega G||^2 = ||F||^2 + ||G||^2 - 2 trace(Sigma) when Omega is the full polar factor
    rng = np.random.default_rng(seed)
    F, G = _pair(rng, rows, cols)
    c = procrustes_solve(F, G, tol=1e-15)
    lhs = np.linalg.norm(F - c.apply(G)) ** 2
    rhs = np.linalg.norm(F) ** 2 + np.linalg.norm(G) ** 2 - 2 * c.singular_values.sum()
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-10)
    assert relative_residual(c, F, G) == pytest.approx(np.sqrt(lhs) / np.linalg.norm(F))


def test_apply_batch_equals_columns(rng):
    c = procrustes_solve(*_pair(rng, 8, 3))
    V = rng.standard_normal((8, 5))
    assert np.allclose(c.apply(V), np.column_stack([c.apply(v) for v in V.T]))


def test_assemble_snapshots(rng):
    coarse = Grid((8,), (1 / 8,))
    t = GridTransfer.from_ratio(coarse, 2)
    speed = SpeedField(coarse, 1 + rng.random(8))
    fine = [WaveState(t.fine, rng.standard_normal(16), rng.standard_normal(16)) for _ in range(3)]
    crs = [WaveState(coarse, rng.standard_normal(8), rng.standard_normal(8)) for _ in range(3)]
    F, G = assemble_snapshots(fine, crs, t, speed, "fd4")
    assert F.shape == G.shape == (16, 3)
    assert np.allclose(G[:, 1], to_components(crs[1], speed, "fd4").stacked())
    restricted = WaveState(coarse, fine[2].u[::2], fine[2].udot[::2])
    assert np.allclose(F[:, 2], to_components(restricted, speed, "fd4").stacked())
    with pytest.raises(ValueError):
        assemble_snapshots(fine, crs[:2], t, speed)


def test_apply_corrector_keeps_mean(rng):
    g = Grid((6,), (1 / 6,))
    speed = SpeedField.constant(g)
    comp = to_components(WaveState(g, rng.standard_normal(6), rng.standard_normal(6)), speed)
    c = procrustes_solve(*_pair(rng, 12, 2))
    out = apply_corrector(c, comp)
    assert out.mean_u == comp.mean_u
    assert np.allclose(out.stacked(), c.apply(comp.stacked()))
