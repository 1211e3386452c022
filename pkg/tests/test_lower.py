from __future__ import annotations

import math

import numpy as np
import pytest

from twotier.errors import ShapeError, StateError
from twotier.lower import (
    FeatureMap,
    NormalEqAccumulator,
    apply_features,
    fit_lower,
    init_feature_map,
    one_hot,
    predict,
    solve_ridge,
)

from oracles import ridge_gradient_descent, ridge_objective


def test_feature_map_deterministic_for_seed():
    a = init_feature_map(5, 9, "tanh", seed=42)
    b = init_feature_map(5, 9, "tanh", seed=42)
    assert np.array_equal(a.projection, b.projection)
    assert np.array_equal(a.bias, b.bias)
    assert a.state_bytes() == b.state_bytes()


def test_feature_map_differs_across_seeds():
    a = init_feature_map(5, 9, seed=1)
    b = init_feature_map(5, 9, seed=2)
    assert not np.array_equal(a.projection, b.projection)


def test_feature_map_entries_within_fan_sum_bound():
    fmap = init_feature_map(100, 200, seed=7)
    s = math.sqrt(6.0 / (100 + 200))
    assert np.abs(fmap.projection).max() <= s
    assert np.abs(fmap.bias).max() <= s


def test_feature_map_mean_near_zero():
    # Mean of d_in*h uniforms on [-s, s]: three-sigma bound s*sqrt(3/(d_in*h)).
    fmap = init_feature_map(100, 200, seed=7)
    s = math.sqrt(6.0 / 300)
    bound = 3.0 * s / math.sqrt(3.0 * 100 * 200)
    assert abs(float(fmap.projection.mean())) <= bound


def test_feature_map_rejects_bad_nonlinearity():
    with pytest.raises(ValueError):
        init_feature_map(4, 4, "sigmoid")


def test_feature_map_rejects_zero_dims():
    with pytest.raises(ValueError):
        init_feature_map(0, 4)


def test_apply_features_identity_passthrough():
    fmap = FeatureMap(projection=np.eye(3), bias=np.zeros(3), nonlinearity="identity", seed=0)
    x = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(apply_features(fmap, x), x)


def test_apply_features_tanh_bounded():
    fmap = init_feature_map(4, 16, "tanh", seed=0)
    z = apply_features(fmap, np.random.default_rng(0).normal(size=(50, 4)) * 100)
    assert np.abs(z).max() <= 1.0


def test_apply_features_relu_nonnegative():
    fmap = init_feature_map(4, 16, "relu", seed=0)
    z = apply_features(fmap, np.random.default_rng(0).normal(size=(50, 4)))
    assert z.min() >= 0.0


def test_apply_features_rejects_column_mismatch():
    fmap = init_feature_map(4, 8)
    with pytest.raises(ShapeError):
        apply_features(fmap, np.ones((3, 5)))


def test_accumulate_hand_example():
    acc = NormalEqAccumulator(2, 1)
    acc.absorb(np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([[1.0], [2.0]]))
    assert acc.gram.tolist() == [[1.0, 0.0], [0.0, 4.0]]
    assert acc.cross.tolist() == [[1.0], [4.0]]
    assert acc.count == 2


def test_accumulate_empty_chunk_is_noop():
    acc = NormalEqAccumulator(3, 2)
    acc.absorb(np.zeros((0, 3)), np.zeros((0, 2)))
    assert acc.count == 0
    assert not acc.gram.any() and not acc.cross.any()


def test_accumulate_chunk_order_invariant():
    rng = np.random.default_rng(23)
    phi = rng.normal(size=(30, 6))
    y = rng.normal(size=(30, 2))
    one = NormalEqAccumulator(6, 2).absorb(phi, y)
    two = NormalEqAccumulator(6, 2)
    for start in (20, 10, 0):  # reversed chunk order
        two.absorb(phi[start : start + 10], y[start : start + 10])
    assert np.abs(one.gram - two.gram).max() <= 1e-12
    assert np.abs(one.cross - two.cross).max() <= 1e-12


def test_accumulate_gram_symmetric():
    rng = np.random.default_rng(29)
    acc = NormalEqAccumulator(8, 1)
    for _ in range(5):
        acc.absorb(rng.normal(size=(13, 8)), rng.normal(size=(13, 1)))
    assert np.abs(acc.gram - acc.gram.T).max() <= 1e-12


def test_merge_matches_single_accumulator_and_is_associative():
    rng = np.random.default_rng(31)
    chunks = [(rng.normal(size=(7, 4)), rng.normal(size=(7, 2))) for _ in range(3)]
    whole = NormalEqAccumulator(4, 2)
    for phi, y in chunks:
        whole.absorb(phi, y)
    parts = [NormalEqAccumulator(4, 2).absorb(phi, y) for phi, y in chunks]
    left = NormalEqAccumulator(4, 2).merge(parts[0]).merge(parts[1]).merge(parts[2])
    mid = NormalEqAccumulator(4, 2).merge(parts[1]).merge(parts[2])
    right = NormalEqAccumulator(4, 2).merge(parts[0]).merge(mid)
    for acc in (left, right):
        assert np.abs(acc.gram - whole.gram).max() <= 1e-12
        assert acc.count == whole.count


def test_merge_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        NormalEqAccumulator(4, 2).merge(NormalEqAccumulator(5, 2))


def test_solve_ridge_hand_example():
    acc = NormalEqAccumulator(2, 1)
    acc.gram = np.diag([1.0, 4.0])
    acc.cross = np.array([[1.0], [4.0]])
    acc.count = 2
    sol = solve_ridge(acc, 1.0)
    assert np.allclose(sol.weights, [[0.5], [0.8]], atol=1e-14)
    assert sol.train_residual is None


def test_solve_ridge_zero_targets_give_zero_weights():
    rng = np.random.default_rng(37)
    phi = rng.normal(size=(20, 5))
    acc = NormalEqAccumulator(5, 3).absorb(phi, np.zeros((20, 3)))
    sol = solve_ridge(acc, 1e-3)
    assert np.array_equal(sol.weights, np.zeros((5, 3)))


def test_solve_ridge_rejects_nonpositive_lambda():
    acc = NormalEqAccumulator(2, 1)
    acc.absorb(np.eye(2), np.ones((2, 1)))
    with pytest.raises(ValueError):
        solve_ridge(acc, 0.0)


def test_solve_ridge_rejects_empty_accumulator():
    with pytest.raises(StateError):
        solve_ridge(NormalEqAccumulator(2, 1), 1.0)


def test_solve_ridge_residual_second_pass():
    rng = np.random.default_rng(41)
    phi = rng.normal(size=(50, 4))
    w_true = rng.normal(size=(4, 2))
    y = phi @ w_true
    acc = NormalEqAccumulator(4, 2).absorb(phi, y)
    sol = solve_ridge(acc, 1e-9, residual_data=[(phi, y)])
    assert sol.train_residual is not None
    assert 0.0 <= sol.train_residual <= 1e-12


def test_solve_ridge_reaches_gradient_descent_objective():
    rng = np.random.default_rng(43)
    for _ in range(5):
        n, h, k = int(rng.integers(20, 120)), int(rng.integers(2, 16)), int(rng.integers(1, 4))
        phi = rng.normal(size=(n, h))
        y = rng.normal(size=(n, k))
        lam = float(rng.uniform(1e-3, 1.0))
        acc = NormalEqAccumulator(h, k).absorb(phi, y)
        ours = solve_ridge(acc, lam).weights
        reference = ridge_gradient_descent(phi, y, lam, steps=1000)
        assert ridge_objective(phi, y, ours, lam) <= ridge_objective(phi, y, reference, lam) + 1e-8


def test_fit_lower_streaming_equals_batch():
    rng = np.random.default_rng(47)
    fmap = init_feature_map(6, 12, seed=3)
    x = rng.normal(size=(55, 6))
    y = rng.normal(size=(55, 3))
    batch = fit_lower(fmap, x, y, 1e-2, chunk_rows=55).weights
    for chunk_rows in (1, 7, 55):
        streamed = fit_lower(fmap, x, y, 1e-2, chunk_rows=chunk_rows).weights
        rel = np.linalg.norm(streamed - batch) / max(np.linalg.norm(batch), 1e-300)
        assert rel <= 1e-10


def test_one_hot_encoding():
    out = one_hot(np.array([0, 2, 1]), 3)
    assert out.tolist() == [[1, 0, 0], [0, 0, 1], [0, 1, 0]]


def test_one_hot_rejects_out_of_range():
    with pytest.raises(ValueError):
        one_hot(np.array([0, 3]), 3)


def test_predict_argmax_breaks_ties_low():
    fmap = FeatureMap(projection=np.eye(2), bias=np.zeros(2), nonlinearity="identity", seed=0)
    from twotier.lower import RidgeSolution

    sol = RidgeSolution(weights=np.array([[1.0, 1.0], [0.0, 0.0]]), lambda_ridge=1.0)
    scores, labels = predict(fmap, sol, np.array([[2.0, 0.0]]))
    assert scores.tolist() == [[2.0, 2.0]]
    assert labels.tolist() == [0]
