import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from telemine.baselines import (LinearSgdDetector, PcaDetector, SgdConfig, minmax_normalize,
                                pca_fit, pca_score, penalty_step, sgd_fit, sgd_score)
from telemine.errors import DegenerateData, DegenerateLabels, MissingModel, WidthMismatch
from telemine.gbdt import sigmoid
from telemine.metrics import auprc


def _rank2(rng, n=200, D=10):
    B = np.linalg.qr(rng.normal(size=(D, 2)))[0].T  # 2 x D orthonormal
    return rng.normal(size=(n, 2)) * [3.0, 1.0] @ B, B


def test_line_in_3d_keeps_one_component(rng):
    t = rng.normal(size=100)
    X = np.outer(t, [1.0, 2.0, -0.5]) + [4.0, 0.0, 1.0]
    assert pca_fit(X, standardize=False).k == 1


def test_isotropic_2d_keeps_both(rng):
    X = rng.normal(size=(5000, 2))
    ev = np.linalg.eigvalsh(np.cov(X.T))
    assert ev.min() / ev.sum() > 0.05  # no single direction carries 95%
    assert pca_fit(X).k == 2


def test_rank2_in_span_points_score_zero(rng):
    X, B = _rank2(rng)
    det = pca_fit(X, standardize=False)
    assert det.k == 2
    inside = det.mean + rng.normal(size=(50, 2)) @ B
    assert np.all(pca_score(det, inside) <= 1e-9)


def test_orthogonal_offset_scores_its_length(rng):
    X, B = _rank2(rng)
    det = pca_fit(X, standardize=False)
    normal = np.linalg.qr(np.c_[B.T, rng.normal(size=10)])[0][:, 2]
    for e in (0.5, 3.0, 17.0):
        x = det.mean + 2.0 * B[0] - 1.0 * B[1] + e * normal
        assert pca_score(det, x[None])[0] == pytest.approx(e, abs=1e-9)


def test_basis_orthonormal_and_brute_force_projector(rng):
    X = rng.normal(size=(300, 6)) @ rng.normal(size=(6, 6))
    det = pca_fit(X, variance_target=0.8)
    assert np.allclose(det.basis @ det.basis.T, np.eye(det.k), atol=1e-8)
    Y = rng.normal(size=(40, 6))
    P = det.basis.T @ np.linalg.inv(det.basis @ det.basis.T) @ det.basis
    ref = []
    for row in Y:
        z = (row - det.mean) / det.scale
        ref.append(np.linalg.norm(z - P @ z))
    assert np.allclose(pca_score(det, Y), ref, rtol=0, atol=1e-9)


@settings(max_examples=50)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_in_span_shift_leaves_score_unchanged(coef):
    rng = np.random.default_rng(3)
    X, B = _rank2(rng)
    det = pca_fit(X, standardize=False)
    y = rng.normal(size=(5, 10))
    shifted = y + np.asarray(coef) @ B
    assert np.allclose(pca_score(det, y), pca_score(det, shifted), atol=1e-9)


def test_pca_errors_and_round_trip(tmp_path, rng):
    with pytest.raises(DegenerateData):
        pca_fit(np.ones((10, 3)))
    det = pca_fit(rng.normal(size=(50, 4)))
    with pytest.raises(WidthMismatch):
        pca_score(det, np.zeros((2, 3)))
    det.save(tmp_path / "p.json")
    back = PcaDetector.load(tmp_path / "p.json")
    X = rng.normal(size=(7, 4))
    assert np.array_equal(pca_score(back, X), pca_score(det, X))


def test_minmax():
    assert minmax_normalize([2.0, 4.0, 3.0]).tolist() == [0.0, 1.0, 0.5]
    assert minmax_normalize([1.0, 1.0]).tolist() == [0.0, 0.0]


def _separable(n=200):
    x = np.r_[np.linspace(-2, -0.1, n // 2), np.linspace(0.1, 2, n // 2)]
    return x[:, None], (x > 0).astype(int)


def test_sgd_separable_reaches_ap_one():
    X, y = _separable()
    m = sgd_fit(X, y, X, y)
    assert auprc(sgd_score(m, X), y) == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.isfinite(m.weights))


def test_zero_epochs_scores_sigmoid_bias(rng):
    X, y = _separable()
    m = sgd_fit(X, y, X, y, SgdConfig(epochs=0))
    assert m.best_epoch == 0
    assert np.all(sgd_score(m, rng.normal(size=(9, 1))) == sigmoid(m.bias))


def test_penalty_shrinks_norm_monotonically(rng):
    w = rng.normal(size=20)
    norms = [np.linalg.norm(w)]
    for _ in range(200):
        w = penalty_step(w, eta=0.05, alpha=0.5, l1_ratio=0.15)
        norms.append(np.linalg.norm(w))
    assert np.all(np.diff(norms) <= 0)
    assert norms[-1] < norms[0]


def test_sgd_deterministic_and_seeded(tmp_path, rng):
    X = rng.normal(size=(400, 5))
    y = (X[:, 0] + 0.5 * rng.normal(size=400) > 1).astype(int)
    a = sgd_fit(X[:300], y[:300], X[300:], y[300:], SgdConfig(seed=4))
    b = sgd_fit(X[:300], y[:300], X[300:], y[300:], SgdConfig(seed=4))
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias
    c = sgd_fit(X[:300], y[:300], X[300:], y[300:], SgdConfig(seed=5))
    assert not np.array_equal(a.weights, c.weights)
    a.save(tmp_path / "s.json")
    back = LinearSgdDetector.load(tmp_path / "s.json")
    assert np.array_equal(sgd_score(back, X), sgd_score(a, X))


def test_sgd_errors(tmp_path):
    X, y = _separable()
    with pytest.raises(DegenerateLabels):
        sgd_fit(X, np.zeros_like(y), X, y)
    with pytest.raises(DegenerateLabels):
        sgd_fit(X, y, X, np.ones_like(y))
    with pytest.raises(MissingModel):
        LinearSgdDetector.load(tmp_path / "none.json")
    m = sgd_fit(X, y, X, y, SgdConfig(epochs=2))
    with pytest.raises(WidthMismatch):
        sgd_score(m, np.zeros((3, 2)))
