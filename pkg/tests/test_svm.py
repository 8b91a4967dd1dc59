import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isvm_dmoea.core import DimensionError
from isvm_dmoea.svm import (ERROR, MARGIN, REMAINING, IncrementalSVC, KernelConfig, TrainingError, cv_accuracy,
                            decision_value, default_scale_grid, gaussian_kernel, grid_search_scale, increment,
                            kernel_eval, kkt_partition, kkt_violations, solve_dual_smo, train_batch)


def projected_gradient_dual(K, y, l, iters=40000):
    """Accelerated projected gradient on the dual; projection by bisection on the multiplier."""
    Q = np.outer(y, y) * K
    L = np.linalg.eigvalsh(Q).max()

    def project(v):
        lo, hi = -1e6, 1e6
        for _ in range(200):
            lam = 0.5 * (lo + hi)
            if y @ np.clip(v - lam * y, 0, l) > 0:
                lo = lam
            else:
                hi = lam
        return np.clip(v - 0.5 * (lo + hi) * y, 0, l)

    a = z = np.zeros(len(y))
    s = 1.0
    for _ in range(iters):
        a_new = project(z - (Q @ z - 1) / L)
        s_new = 0.5 * (1 + np.sqrt(1 + 4 * s * s))
        z = a_new + (s - 1) / s_new * (a_new - a)
        a, s = a_new, s_new
    free = (a > 1e-6 * l) & (a < l * (1 - 1e-6))
    grad = Q @ a - 1
    b = float(np.mean(-grad[free] * y[free]))
    return a, b


def _dataset(rng, n, d):
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y


def test_kernel_examples():
    cfg = KernelConfig(scale=0.7)
    a, b = np.array([0.1, 0.2]), np.array([-0.3, 0.5])
    assert kernel_eval(cfg, a, a) == 1.0
    assert kernel_eval(cfg, a, b) == kernel_eval(cfg, b, a)
    assert kernel_eval(cfg, a, b) == pytest.approx(np.exp(-0.25 / (2 * 0.49)), abs=1e-15)
    assert kernel_eval(KernelConfig(scale=1e6), a, b) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DimensionError):
        kernel_eval(cfg, a, np.zeros(3))


def test_kernel_config_validation():
    with pytest.raises(ValueError):
        KernelConfig(scale=0.0)
    with pytest.raises(ValueError):
        KernelConfig(penalty=-1.0)


def test_symmetric_pair():
    svc = train_batch([[-1.0], [1.0]], [1.0, -1.0], KernelConfig(1.0, 10.0))
    assert svc.alpha[0] == pytest.approx(svc.alpha[1], abs=1e-12)
    assert svc.b == pytest.approx(0.0, abs=1e-12)
    assert decision_value(svc, [0.0]) == pytest.approx(0.0, abs=1e-9)
    # hand expansion alpha (K(x1, x) - K(x2, x))
    x = 0.37
    hand = svc.alpha[0] * (np.exp(-(x + 1) ** 2 / 2) - np.exp(-(x - 1) ** 2 / 2))
    assert decision_value(svc, [x]) == pytest.approx(hand, abs=1e-12)


def test_single_class_rejected():
    with pytest.raises(TrainingError):
        train_batch([[0.0], [1.0]], [1.0, 1.0])
    with pytest.raises(TrainingError):
        IncrementalSVC().decision_function([[0.0]])


def test_bad_label_and_dimension():
    svc = train_batch([[0.0, 0.0], [1.0, 1.0]], [1.0, -1.0])
    with pytest.raises(ValueError):
        svc.increment([0.5, 0.5], 0.0)
    with pytest.raises(DimensionError):
        svc.increment([0.5], 1.0)


def test_matches_projected_gradient_oracle():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(-1.5, 0.5, size=(10, 2)), rng.normal(1.5, 0.5, size=(10, 2))])
    y = np.r_[np.ones(10), -np.ones(10)]
    cfg = KernelConfig(scale=1.0, penalty=100.0)
    svc = train_batch(X, y, cfg)
    K = gaussian_kernel(X, X, 1.0)
    a, b = projected_gradient_dual(K, y, 100.0)
    f_ref = K @ (a * y) + b
    np.testing.assert_allclose(svc.decision_function(X), f_ref, atol=1e-4)


def test_smo_matches_incremental():
    rng = np.random.default_rng(8)
    X, y = _dataset(rng, 30, 3)
    cfg = KernelConfig(scale=1.2, penalty=5.0)
    svc = train_batch(X, y, cfg)
    alpha = solve_dual_smo(gaussian_kernel(X, X, 1.2), y, 5.0)
    np.testing.assert_allclose(alpha, svc.alpha, atol=1e-6)


def test_insertion_beyond_margin_changes_nothing():
    rng = np.random.default_rng(2)
    X, y = _dataset(rng, 20, 2)
    svc = train_batch(X, y, KernelConfig(1.0, 10.0))
    probes = rng.normal(size=(500, 2))
    f = svc.decision_function(probes)
    k = int(np.argmax(np.abs(f)))
    assert abs(f[k]) > 1.0
    alpha, b = svc.alpha.copy(), svc.b
    svc.increment(probes[k], np.sign(f[k]))
    np.testing.assert_array_equal(svc.alpha[:-1], alpha)
    assert svc.b == b and svc.alpha[-1] == 0.0 and svc.tags[-1] == REMAINING


def test_margin_vectors_on_margin():
    rng = np.random.default_rng(6)
    X, y = _dataset(rng, 40, 4)
    svc = train_batch(X, y, KernelConfig(2.0, 10.0))
    for i in svc.margin:
        assert y[i] * decision_value(svc, X[i]) == pytest.approx(1.0, abs=1e-6)
    assert svc.predict([X[svc.margin[0]]])[0] == y[svc.margin[0]]


def test_tie_classifies_negative():
    svc = train_batch([[-1.0], [1.0]], [1.0, -1.0], KernelConfig(1.0, 10.0))
    svc.alpha[:] = 1.0
    svc.b = 0.0
    assert decision_value(svc, [0.0]) == 0.0
    assert svc.predict([[0.0]])[0] == -1


def test_kkt_partition_cases():
    rng = np.random.default_rng(12)
    X, y = _dataset(rng, 50, 2)
    svc = train_batch(X, y, KernelConfig(0.5, 1.0))
    rep = kkt_partition(svc)
    l = svc.config.penalty
    assert set(rep.tags) <= {MARGIN, ERROR, REMAINING}
    assert np.all(rep.g[rep.tags == REMAINING] >= -1e-6) and np.all(svc.alpha[rep.tags == REMAINING] == 0)
    assert np.all(np.abs(rep.g[rep.tags == MARGIN]) <= 1e-6)
    assert np.all(rep.g[rep.tags == ERROR] <= 1e-6) and np.all(svc.alpha[rep.tags == ERROR] == l)
    assert np.array_equal(rep.tags, svc.tags)
    assert abs(rep.h) <= 1e-8


def test_conflicting_duplicates_are_soft():
    X = np.array([[0.0], [0.0], [1.0], [2.0]])
    y = np.array([1.0, -1.0, 1.0, -1.0])
    svc = train_batch(X, y, KernelConfig(1.0, 3.0))
    assert kkt_violations(svc) == 0


def test_decision_invariant_to_sample_permutation():
    rng = np.random.default_rng(21)
    X, y = _dataset(rng, 25, 3)
    cfg = KernelConfig(1.5, 10.0)
    a = train_batch(X, y, cfg)
    perm = rng.permutation(25)
    b = train_batch(X[perm], y[perm], cfg)
    P = rng.normal(size=(30, 3))
    np.testing.assert_allclose(a.decision_function(P), b.decision_function(P), atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30), st.integers(1, 5), st.sampled_from([1.0, 10.0, 100.0]))
def test_invariants_after_every_increment(seed, n, d, l):
    rng = np.random.default_rng(seed)
    X, y = _dataset(rng, n, d)
    svc = IncrementalSVC(KernelConfig(float(np.sqrt(d)), l))
    for xi, yi in zip(X, y):
        increment(svc, xi, yi)
        assert np.all((svc.alpha >= 0) & (svc.alpha <= l))
        assert abs(float(svc.y @ svc.alpha)) <= 1e-8
        assert kkt_violations(svc) == 0


def test_grid_search_rules():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-3, 0.3, size=(15, 2)), rng.normal(3, 0.3, size=(15, 2))])
    y = np.r_[np.ones(15), -np.ones(15)]
    assert grid_search_scale(X, y, [0.7], folds=5) == 0.7
    grid = default_scale_grid(X)
    best = grid_search_scale(X, y, grid, folds=5)
    accs = {s: cv_accuracy(X, y, s, 5) for s in grid}
    assert all(accs[best] >= v for v in accs.values())
    # separable blobs: every scale is perfect, so the smallest one wins the tie
    assert best == min(s for s, v in accs.items() if v == max(accs.values()))
    with pytest.raises(ValueError):
        grid_search_scale(X, y, grid, folds=1)
    with pytest.raises(ValueError):
        grid_search_scale(X, y, [], folds=5)


def test_json_dump():
    svc = train_batch([[-1.0], [1.0]], [1.0, -1.0])
    state = json.loads(svc.to_json())
    assert state["y"] == [1.0, -1.0] and len(state["alpha"]) == 2


@pytest.mark.parametrize("l", [1.0, 10.0, 100.0])
def test_duplicates_and_near_duplicates(l):
    rng = np.random.default_rng(int(l))
    for _ in range(15):
        n, d = int(rng.integers(4, 30)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        src = rng.integers(0, n, n // 2 + 1)
        near = X[src] + (rng.random((len(src), 1)) < 0.3) * rng.normal(scale=1e-7, size=(len(src), d))
        flip = np.where(rng.random(len(src)) < 0.5, 1.0, -1.0)
        X, y = np.vstack([X, near]), np.r_[y, y[src] * flip]
        y[0], y[1] = 1.0, -1.0
        svc = IncrementalSVC(KernelConfig(1.0, l))
        for xi, yi in zip(X, y):
            svc.increment(xi, yi)
            assert kkt_violations(svc) == 0
            assert abs(float(svc.y @ svc.alpha)) <= 1e-8
