import time
import logging

import numpy as np
import pytest

from ebtrack.operations.wnmf import FitOptions, FactorModel, init_factors, masked_objective, update_step, \
    apply_bound_rule, fit, normalize_clusters, select_k, error_curve, resolve_bounds

NO_BOUNDS = FitOptions(bounds={})


@pytest.fixture
def small_xw():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    return X, np.ones_like(X)


@pytest.fixture
def random_xw():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 2, size=(12, 6))
    W = (rng.random((12, 6)) > 0.2).astype(float)
    return X, W


def test_init_factors_is_seeded():
    U1, V1 = init_factors(3, 2, 2, seed=7)
    U2, V2 = init_factors(3, 2, 2, seed=7)
    np.testing.assert_array_equal(U1, U2)
    np.testing.assert_array_equal(V1, V2)
    assert U1.shape == (3, 2) and V1.shape == (2, 2)


def test_init_factors_strictly_positive():
    U, V = init_factors(40, 30, 6, seed=0)
    assert np.all(U > 0) and np.all(U <= 1)
    assert np.all(V > 0) and np.all(V <= 1)


def test_init_factors_overparameterized_warns(caplog):
    with caplog.at_level(logging.WARNING):
        U, V = init_factors(3, 2, 5, seed=1)
    assert U.shape == (3, 5)
    assert 'over-parameterized' in caplog.text


def test_init_factors_rejects_zero_dims():
    with pytest.raises(ValueError):
        init_factors(0, 2, 1, seed=1)


def test_masked_objective_exact_product_is_zero():
    U = np.array([[1.0], [2.0]])
    V = np.array([[3.0, 1.0]])
    assert masked_objective(U @ V, np.ones((2, 2)), U, V) == 0


def test_masked_objective_examples(small_xw):
    X, W = small_xw
    U, V = np.array([[1.0], [1.0]]), np.array([[1.0, 1.0]])
    assert masked_objective(X, W, U, V) == pytest.approx(np.sqrt(14), rel=1e-15)
    W[1, 0] = 0
    assert masked_objective(X, W, U, V) == pytest.approx(np.sqrt(10), rel=1e-15)


def test_masked_objective_shape_mismatch(small_xw):
    X, W = small_xw
    with pytest.raises(ValueError):
        masked_objective(X, W, np.ones((3, 1)), np.ones((1, 2)))


def test_masked_objective_ignores_masked_values(random_xw):
    X, W = random_xw
    U, V = init_factors(12, 6, 2, seed=5)
    perturbed = X.copy()
    perturbed[W == 0] += 10
    assert masked_objective(perturbed, W, U, V) == masked_objective(X, W, U, V)


def test_update_step_fixed_point():
    rng = np.random.default_rng(9)
    U, V = rng.uniform(0.5, 1.5, size=(5, 2)), rng.uniform(0.5, 1.5, size=(2, 4))
    U1, V1 = update_step(U @ V, np.ones((5, 4)), U, V)
    np.testing.assert_allclose(U1, U, rtol=0, atol=1e-9)
    np.testing.assert_allclose(V1, V, rtol=0, atol=1e-9)


def test_update_step_zero_data_row():
    X = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [2.0, 1.0, 1.0]])
    U, V = init_factors(3, 3, 2, seed=4)
    U1, V1 = update_step(X, np.ones_like(X), U, V)
    np.testing.assert_array_equal(U1[1], 0.0)
    assert np.all(U1 >= 0) and np.all(V1 >= 0)


def test_update_step_matches_straight_line_formulas():
    rng = np.random.default_rng(21)
    X, W = rng.uniform(0, 1, size=(2, 2)), np.array([[1.0, 0.0], [1.0, 1.0]])
    U, V = rng.uniform(0.1, 1, size=(2, 2)), rng.uniform(0.1, 1, size=(2, 2))
    delta = FitOptions().denom_guard

    expected_U = np.empty_like(U)
    for i in range(2):
        for a in range(2):
            numer = sum(W[i, j] * X[i, j] * V[a, j] for j in range(2))
            denom = sum(W[i, j] * (U[i] @ V[:, j]) * V[a, j] for j in range(2))
            expected_U[i, a] = U[i, a] * numer / (denom + delta)
    expected_V = np.empty_like(V)
    for a in range(2):
        for j in range(2):
            numer = sum(expected_U[i, a] * W[i, j] * X[i, j] for i in range(2))
            denom = sum(expected_U[i, a] * W[i, j] * (expected_U[i] @ V[:, j]) for i in range(2))
            expected_V[a, j] = V[a, j] * numer / (denom + delta)

    U1, V1 = update_step(X, W, U, V)
    np.testing.assert_allclose(U1, expected_U, rtol=1e-12)
    np.testing.assert_allclose(V1, expected_V, rtol=1e-12)


def test_update_step_lifts_stuck_zeros():
    X = np.array([[1.0]])
    U1, _ = update_step(X, np.ones_like(X), np.array([[0.0]]), np.array([[1.0]]))
    assert U1[0, 0] > 0.5


def test_update_step_all_masked_raises(small_xw):
    X, _ = small_xw
    with pytest.raises(ValueError):
        update_step(X, np.zeros_like(X), np.ones((2, 1)), np.ones((1, 2)))


def test_bound_rule_examples():
    X = np.array([[0.0, 0.7], [0.0, 0.4], [0.0, 0.2]])
    W = np.array([[0.0, 1.0], [1.0, 1.0], [0.0, 1.0]])
    missing = np.array([[True, False], [False, False], [True, False]])
    # The middle row is observed, so its values stay put even though UV exceeds the bound.
    UV = np.array([[1.3, 0.0], [5.0, 0.0], [0.5, 0.0]])
    Xb, Wb = apply_bound_rule(X, W, UV, {0: 1.0}, missing)
    assert (Xb[0, 0], Wb[0, 0]) == (1.0, 1.0)
    assert (Xb[1, 0], Wb[1, 0]) == (0.0, 1.0)
    assert Wb[2, 0] == 0.0
    np.testing.assert_array_equal(Xb[:, 1], X[:, 1])

    UV_after = np.array([[0.9, 0.0], [5.0, 0.0], [0.5, 0.0]])
    _, Wb = apply_bound_rule(Xb, Wb, UV_after, {0: 1.0}, missing)
    assert Wb[0, 0] == 0.0


def test_bound_rule_leaves_inputs_untouched():
    X, W = np.zeros((2, 1)), np.zeros((2, 1))
    apply_bound_rule(X, W, np.full((2, 1), 2.0), {0: 1.0}, np.ones((2, 1), dtype=bool))
    assert not X.any() and not W.any()


def test_fit_rank_one():
    u = np.array([1.0, 2.0, 0.5, 3.0])
    v = np.array([0.2, 1.0, 4.0])
    X = np.outer(u, v)
    model = fit(X, np.ones_like(X), 1, opts=NO_BOUNDS, seed=1)
    assert model.relative_error(X) < 1e-3
    assert model.k == 1 and model.U.shape == (4, 1) and model.V.shape == (1, 3)


def test_fit_planted_rank_three(planted_rank3):
    U, V = planted_rank3
    X = U @ V
    opts = FitOptions(max_iters=10000, rel_tol=1e-12, restarts=5)
    model = fit(X, np.ones_like(X), 3, opts=opts, seed=42)
    assert model.relative_error(X) < 1e-3


@pytest.mark.parametrize("instance", range(100))
def test_fit_trace_is_non_increasing(instance):
    rng = np.random.default_rng(instance)
    n, m, k = (int(v) for v in rng.integers([2, 2, 1], [201, 21, 7]))
    X = rng.uniform(0, 5, size=(n, m))
    W = (rng.random((n, m)) < rng.uniform(0.6, 1.0)).astype(float)
    W[0, 0] = 1
    model = fit(X, W, k, opts=FitOptions(max_iters=500, restarts=1), seed=instance)
    trace = np.array(model.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * trace[:-1])
    assert len(trace) == model.iterations + 1


def test_fit_of_a_large_cohort_is_fast():
    rng = np.random.default_rng(5000)
    X = rng.uniform(0, 3, size=(5000, 10))
    W = (rng.random((5000, 10)) > 0.1).astype(float)
    start = time.perf_counter()
    model = fit(X, W, 5, opts=FitOptions(max_iters=500, rel_tol=1e-300, restarts=1), seed=1)
    elapsed = time.perf_counter() - start
    assert model.iterations <= 500
    assert elapsed < 10.0


def test_fit_ignores_masked_values(random_xw):
    X, W = random_xw
    perturbed = X.copy()
    perturbed[W == 0] += 10
    opts = FitOptions(max_iters=100, restarts=2)
    reference = fit(X, W, 2, opts=opts, seed=5)
    shifted = fit(perturbed, W, 2, opts=opts, seed=5)
    assert reference.objective_trace == shifted.objective_trace
    np.testing.assert_array_equal(reference.U, shifted.U)


def test_fit_is_deterministic(random_xw):
    X, W = random_xw
    opts = FitOptions(max_iters=80, restarts=3)
    first = fit(X, W, 2, opts=opts, seed=13)
    second = fit(X, W, 2, opts=opts, seed=13)
    threaded = fit(X, W, 2, opts=opts, seed=13, threads=2)
    assert first.objective_trace == second.objective_trace
    assert first.restart == threaded.restart
    np.testing.assert_allclose(threaded.objective_trace, first.objective_trace, rtol=1e-10)


def test_fit_with_all_ones_mask_is_plain_nmf(random_xw):
    X, _ = random_xw
    opts = FitOptions(max_iters=25, restarts=1, rel_tol=1e-15)
    model = fit(X, np.ones_like(X), 2, opts=opts, seed=17)

    rng = np.random.default_rng(np.random.SeedSequence(17).spawn(1)[0])
    U, V = 1.0 - rng.random((12, 2)), 1.0 - rng.random((2, 6))
    trace = [np.linalg.norm(X - U @ V)]
    for _ in range(model.iterations):
        U = U * (X @ V.T) / (U @ V @ V.T + opts.denom_guard)
        V = V * (U.T @ X) / (U.T @ (U @ V) + opts.denom_guard)
        trace.append(np.linalg.norm(X - U @ V))
    np.testing.assert_allclose(model.objective_trace, trace, rtol=1e-10)
    np.testing.assert_allclose(model.U, U, rtol=1e-10)


def test_fit_bound_rule_caps_missing_cell():
    rng = np.random.default_rng(30)
    u = np.concatenate([[2.5], rng.uniform(0.5, 1.0, 29)])
    X = np.outer(u, [1.0, 0.8, 0.6])
    W = np.ones_like(X)
    W[0, 2] = 0
    X[0, 2] = 0.0

    free = fit(X, W, 1, opts=NO_BOUNDS, seed=3)
    assert free.reconstruction()[0, 2] > 1.4
    Xb, Wb = apply_bound_rule(X, W, free.reconstruction(), {2: 1.0}, W == 0)
    assert (Xb[0, 2], Wb[0, 2]) == (1.0, 1.0)

    bounded = fit(X, W, 2, opts=FitOptions(max_iters=5000, rel_tol=1e-10, bounds={2: 1.0}), seed=3)
    assert bounded.reconstruction()[0, 2] - 1.0 < 0.05


def test_fit_rejects_bad_inputs(small_xw):
    X, W = small_xw
    with pytest.raises(ValueError):
        fit(-X, W, 1)
    with pytest.raises(ValueError):
        fit(X, np.zeros_like(W), 1)
    with pytest.raises(ValueError):
        fit(X, W, 0)
    with pytest.raises(ValueError):
        fit(X, W, 1, opts=FitOptions(bounds={5: 1.0}))
    with pytest.raises(ValueError):
        fit(X, W, 1, opts=FitOptions(bounds={0: 1.0}), col_labels=[1, 2])


def test_fit_options_validation():
    with pytest.raises(ValueError):
        FitOptions(restarts=0)
    with pytest.raises(ValueError):
        FitOptions(rel_tol=0)
    with pytest.raises(ValueError):
        FitOptions(bounds={0: -1.0})
    assert FitOptions.from_dict(FitOptions(bounds={9: 1.0}).to_dict()) == FitOptions(bounds={9: 1.0})


def test_normalize_clusters_example():
    model = FactorModel(U=[[1.0, 1.0]], V=[[2.0, 2.0], [1.0, 3.0]], k=2, objective_trace=[0.0],
                       seed=0, converged=True, iterations=0)
    normalized, rescaling = normalize_clusters(model)
    np.testing.assert_allclose(normalized.V, [[0.5, 0.5], [0.25, 0.75]])
    np.testing.assert_allclose(normalized.U, [[4.0, 4.0]])
    np.testing.assert_allclose(rescaling.scale, [0.25, 0.25])
    np.testing.assert_allclose(normalized.reconstruction(), model.reconstruction(), rtol=0, atol=1e-9)
    assert normalized.normalized and not model.normalized


def test_normalize_clusters_is_idempotent(planted_rank3):
    U, V = planted_rank3
    model = FactorModel(U=U, V=V, k=3, objective_trace=[0.0], seed=0, converged=True, iterations=0)
    _, rescaling = normalize_clusters(model)
    np.testing.assert_allclose(rescaling.scale, 1.0, rtol=1e-12)


def test_normalize_clusters_degenerate_row(caplog):
    model = FactorModel(U=[[1.0, 2.0]], V=[[0.0, 0.0], [1.0, 1.0]], k=2, objective_trace=[0.0],
                        seed=0, converged=True, iterations=0)
    with caplog.at_level(logging.WARNING):
        normalized, rescaling = normalize_clusters(model)
    np.testing.assert_array_equal(normalized.V[0], [0.0, 0.0])
    assert rescaling.degenerate == (True, False)
    assert normalized.degenerate == (True, False)
    assert 'all zero' in caplog.text


def test_select_k_rank_one():
    X = np.outer([1.0, 3.0, 2.0, 0.5, 1.5], [0.5, 1.0, 2.0, 0.1])
    k, models = select_k(X, np.ones_like(X), k_max=3, tau=0.01, opts=NO_BOUNDS)
    assert k == 1
    assert [model.k for model in models] == [1, 2, 3]


def test_select_k_planted_rank_three(planted_rank3):
    U, V = planted_rank3
    X = U @ V
    opts = FitOptions(max_iters=10000, rel_tol=1e-12, restarts=5)
    k, models = select_k(X, np.ones_like(X), k_max=5, tau=0.01, opts=opts, seed=42)
    assert k == 3
    curve = error_curve(models)
    assert list(curve['k']) == [1, 2, 3, 4, 5]
    assert curve['relative_decrease'].iloc[2] < 0.01
    assert np.isnan(curve['relative_decrease'].iloc[-1])


def test_select_k_falls_back_to_k_max(random_xw, caplog):
    X, W = random_xw
    with caplog.at_level(logging.WARNING):
        k, models = select_k(X, W, k_max=1, tau=0.5, opts=FitOptions(max_iters=50, restarts=1))
    assert k == 1 and len(models) == 1
    assert 'never fell below' in caplog.text


@pytest.mark.parametrize("k_max, tau", [(0, 0.01), (3, 0.0), (3, 1.0)])
def test_select_k_rejects_bad_arguments(small_xw, k_max, tau):
    X, W = small_xw
    with pytest.raises(ValueError):
        select_k(X, W, k_max=k_max, tau=tau)


def test_model_json_round_trip(tmp_path, random_xw):
    X, W = random_xw
    model = fit(X, W, 2, opts=FitOptions(max_iters=30, restarts=2, bounds={5: 1.0}), seed=4,
                row_labels=[(f"s{i}", i % 3) for i in range(12)], col_labels=[1, 2, 3, 4, 5, 10])
    model, _ = normalize_clusters(model)
    path = tmp_path / 'model.json'
    model.to_json(path)
    loaded = FactorModel.from_json(path)
    np.testing.assert_array_equal(loaded.U, model.U)
    np.testing.assert_array_equal(loaded.V, model.V)
    assert loaded.objective_trace == model.objective_trace
    assert loaded.row_labels == model.row_labels
    assert loaded.col_labels == model.col_labels
    assert loaded.options == model.options
    assert loaded.normalized and loaded.seed == 4
    assert loaded.feature_names[-1] == 'f10_mean_quiz_score'


def test_model_json_rejects_garbage(tmp_path):
    path = tmp_path / 'model.json'
    path.write_text('{"k": 2}')
    with pytest.raises(ValueError):
        FactorModel.from_json(path)
    path.write_text('not json')
    with pytest.raises(ValueError):
        FactorModel.from_json(path)


def test_factor_model_rejects_negative_factors():
    with pytest.raises(ValueError):
        FactorModel(U=[[-1.0]], V=[[1.0]], k=1, objective_trace=[0.0], seed=0, converged=True, iterations=0)


def test_factor_csv_export(tmp_path):
    model = FactorModel(U=[[1.0], [2.0]], V=[[0.25, 0.75]], k=1, objective_trace=[0.0], seed=0,
                        converged=True, iterations=0, row_labels=[('a', 0), ('b', 1)], col_labels=[6, 7])
    u_path, v_path = model.write_factor_csvs(tmp_path / 'model')
    assert open(u_path).readline().strip() == 'student_id,period,cluster1'
    assert open(v_path).readline().strip().startswith('cluster,')


def test_resolve_bounds():
    assert resolve_bounds({10: 1.0}, range(1, 11)) == {9: 1.0}
    assert resolve_bounds({10: 1.0}, (6, 7, 8)) == {}
    with pytest.raises(ValueError):
        resolve_bounds({3: 1.0}, range(1, 11))
