import numpy as np
import pytest

from localab.loca import (
    COEFFICIENTS_ONLY,
    TOY_SCHEDULE,
    AltSchedule,
    DivergenceError,
    LocaParam,
    LocaRegressor,
    alternating_train,
    build_toy_task,
    coeff_gradient,
    load_checkpoint,
    location_gradient,
    materialize,
    recovered_locations,
    round_locations,
    save_checkpoint,
    sgd_step,
    train_loca,
    upstream_to_Z,
)
from localab.transforms import get_basis, idct2_dense, scatter


def test_round_locations_examples():
    assert round_locations([[2.4, 3.6]], (8, 8)).tolist() == [[2, 4]]
    assert round_locations([[-0.3, 7.8]], (8, 8)).tolist() == [[0, 7]]
    assert round_locations([[2.5, 1.5]], (8, 8)).tolist() == [[3, 2]]
    assert round_locations([[-0.5, 9.0]], (8, 8)).tolist() == [[0, 7]]


def test_param_init_and_validation():
    p = LocaParam.init(4, (5, 7), 2.0, rng=0)
    assert not p.a.any() and p.l.shape == (4, 2)
    assert np.all(p.l[:, 0] <= 4) and np.all(p.l[:, 1] <= 6) and np.all(p.l >= 0)
    with pytest.raises(ValueError):
        LocaParam([1.0, 2.0], [[0, 0]], 1.0, (2, 2))


def test_materialize_examples(rng):
    p = LocaParam(np.zeros(3), rng.uniform(0, 5, (3, 2)), 1.0, (6, 6))
    assert not materialize(p).any()
    p.a = rng.standard_normal(3)
    dense = idct2_dense(scatter(p.a, p.rounded(), (6, 6)))
    assert np.max(np.abs(materialize(p) - dense)) < 1e-10
    q = p.copy()
    q.alpha = 2.0
    np.testing.assert_array_equal(materialize(q), 2 * materialize(p))


def test_z_orientation_against_brute_jacobian(rng):
    # dL/dS[i, j] for L = <G, idct2(S)> by perturbing each spectrum cell
    G = rng.standard_normal((4, 4))
    basis = get_basis(4)
    J = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            E = np.zeros((4, 4))
            E[i, j] = 1.0
            J[i, j] = np.sum(G * idct2_dense(E, basis))
    np.testing.assert_allclose(upstream_to_Z(G, basis), J, atol=1e-12)
    assert not upstream_to_Z(np.zeros((4, 4)), basis).any()
    with pytest.raises(ValueError):
        upstream_to_Z(np.zeros((3, 4)), basis)


def test_zero_z_gives_zero_gradients(rng):
    p = LocaParam(rng.standard_normal(3), rng.uniform(0, 7, (3, 2)), 1.0, (8, 8))
    Z = np.zeros((8, 8))
    assert not coeff_gradient(p, Z).any() and not location_gradient(p, Z).any()


def test_coeff_gradient_linear_in_alpha_and_collisions(rng):
    Z = rng.standard_normal((8, 8))
    p = LocaParam(rng.standard_normal(2), [[3, 3], [3.2, 2.9]], 1.0, (8, 8))
    g = coeff_gradient(p, Z)
    assert g[0] == g[1]
    p.alpha = 3.0
    np.testing.assert_allclose(coeff_gradient(p, Z), 3 * g)


def test_dead_coefficient_location_is_frozen(rng):
    p = LocaParam([0.0, 1.0], [[2, 2], [4, 4]], 1.0, (8, 8))
    g = location_gradient(p, rng.standard_normal((8, 8)))
    assert not g[0].any() and g[1].any()


def test_location_gradient_edges_are_one_sided():
    Z = np.arange(16.0).reshape(4, 4) ** 2
    p = LocaParam([1.0, 1.0], [[0, 3], [2, 1]], 1.0, (4, 4))
    g = location_gradient(p, Z)
    assert g[0, 0] == Z[1, 3] - Z[0, 3]
    assert g[0, 1] == Z[0, 3] - Z[0, 2]
    assert g[1, 0] == (Z[3, 1] - Z[1, 1]) / 2
    assert g[1, 1] == (Z[2, 2] - Z[2, 0]) / 2


def test_location_gradient_single_row_grid():
    p = LocaParam([1.0], [[0, 2]], 1.0, (1, 5))
    g = location_gradient(p, np.ones((1, 5)))
    assert g[0, 0] == 0.0


def test_location_gradient_sign_points_to_target():
    i0, j0 = 3, 4
    E = np.zeros((8, 8))
    E[i0 + 1, j0] = 1.0
    target = idct2_dense(E)
    p = LocaParam([1.0], [[i0, j0]], 1.0, (8, 8))
    G = 2 * (materialize(p) - target)
    g = location_gradient(p, upstream_to_Z(G, p.basis))
    assert g[0, 0] < 0


def test_sgd_step_examples():
    np.testing.assert_array_equal(sgd_step([1.0, 2.0], [5.0, 5.0], 0.0), [1.0, 2.0])
    x = sgd_step([0.0], [0.0 - 3.0], 1.0)
    assert x[0] == 3.0
    np.testing.assert_array_equal(sgd_step([1.0, 1.0], [1.0, -1.0], 0.5), [0.5, 1.5])


def test_schedule_phases():
    s = AltSchedule(B_a=2, B_l=3, B_s=10, T=12)
    moves = [s.updates_locations(t) for t in range(1, 13)]
    assert moves == [False, True, True, True, False, False, True, True, True, False, False, False]
    assert s.phase(11) == COEFFICIENTS_ONLY
    with pytest.raises(ValueError):
        AltSchedule(B_s=10, T=5)
    with pytest.raises(ValueError):
        AltSchedule(B_a=0)
    assert (TOY_SCHEDULE.B_a, TOY_SCHEDULE.B_l) == (10, 10)


def test_toy_task_construction():
    task = build_toy_task(3)
    assert task.X.shape == (5000, 6)
    assert np.all((task.X.var(axis=0) > 18) & (task.X.var(axis=0) < 22))
    assert len({tuple(x) for x in task.true_locations.tolist()}) == 3
    assert np.linalg.matrix_rank(task.W1) == 6 and np.linalg.matrix_rank(task.W3) == 6
    W2 = idct2_dense(scatter(task.true_coefficients, task.true_locations, (6, 6)))
    np.testing.assert_allclose(task.Y, task.X @ (task.W3 @ W2 @ task.W1).T, atol=1e-10)


def test_coefficient_only_training_from_true_locations():
    task = build_toy_task(0)
    p = LocaParam(np.zeros(3), task.true_locations.astype(float), 1.0, task.dims)
    sched = AltSchedule(10, 10, 0, 3000, 0.02, 0.05)
    state = alternating_train(task, sched, param=p)
    assert state.final_loss < 1e-8
    assert recovered_locations(state, task)
    curve = state.loss_curve
    assert np.all(np.diff(curve) <= 1e-12 * curve[:-1])


def test_training_is_deterministic():
    task = build_toy_task(1)
    sched = AltSchedule(10, 10, 60, 80, 0.02, 0.05)
    a = alternating_train(task, sched, rng=4)
    b = alternating_train(task, sched, rng=4)
    np.testing.assert_array_equal(a.loss_curve, b.loss_curve)
    assert a.phase == COEFFICIENTS_ONLY and len(a.losses) == 80
    assert [s[0] for s in a.snapshots][:3] == [0, 20, 40]


def test_divergence_guard():
    task = build_toy_task(2)
    p = LocaParam(np.zeros(3), task.true_locations.astype(float), 1.0, task.dims)
    with pytest.raises(DivergenceError):
        alternating_train(task, AltSchedule(10, 10, 0, 200, 50.0, 0.05), param=p)


def test_checkpoint_round_trip(tmp_path, rng):
    p = LocaParam(rng.standard_normal(3), rng.uniform(0, 4, (3, 2)), 0.7, (5, 6))
    path = tmp_path / "ck.txt"
    save_checkpoint(path, p, step=12, phase=COEFFICIENTS_ONLY)
    q, step, phase = load_checkpoint(path)
    np.testing.assert_array_equal(q.a, p.a)
    np.testing.assert_array_equal(q.l, p.l)
    assert (q.alpha, q.dims, step, phase) == (0.7, (5, 6), 12, COEFFICIENTS_ONLY)
    path.write_text("format=other\n")
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_regressor_fits_known_locations(rng):
    X = rng.standard_normal((200, 5))
    truth = idct2_dense(scatter([1.5, -0.7], [[0, 1], [2, 3]], (4, 5)))
    y = X @ truth.T
    est = LocaRegressor(n_components=2, init_locations=[[0, 1], [2, 3]], alt_steps=0,
                        max_steps=600, lr_coef=0.2)
    est.fit(X, y)
    assert est.score(X, y) > 0.999
    assert est.predict(X).shape == (200, 4)
    assert est.get_params()["n_components"] == 2


def test_regressor_single_target_and_errors(rng):
    X = rng.standard_normal((50, 3))
    y = X @ np.array([0.5, 0.0, 0.0])
    est = LocaRegressor(n_components=1, max_steps=50, alt_steps=20, random_state=0).fit(X, y)
    assert est.predict(X).shape == (50,)
    with pytest.raises(ValueError):
        est.predict(np.ones((2, 4)))
    with pytest.raises(ValueError):
        LocaRegressor(left=np.eye(3)).fit(X, y)
