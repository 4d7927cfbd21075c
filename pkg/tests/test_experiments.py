import numpy as np
import pytest

from localab.experiments import (
    SweepConfig,
    crossing_point,
    run_mp_diagnostic,
    run_noniid_sweep,
    run_theorem1_cell,
    run_theorem2_check,
    sample_correlated_matrix,
    separated,
    substream,
)


def test_substreams_are_reproducible_and_distinct():
    a = substream(3, 1, 2).standard_normal(4)
    assert np.array_equal(a, substream(3, 1, 2).standard_normal(4))
    assert not np.array_equal(a, substream(3, 2, 1).standard_normal(4))
    assert not np.array_equal(a, substream(4, 1, 2).standard_normal(4))


def test_separated():
    assert separated(10.0, 1.0, 5.0, 1.0)
    assert not separated(10.0, 2.0, 5.0, 2.0)


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(rho_grid=(-0.1, 0.0))
    with pytest.raises(ValueError):
        SweepConfig(trials=0)


def test_theorem1_rejects_large_rank():
    with pytest.raises(ValueError, match="r < K/3"):
        run_theorem1_cell(30, 10, 5)


def test_theorem1_single_trial_is_indeterminate():
    res = run_theorem1_cell(30, 2, 1)
    assert res.indeterminate and set(res.pair_verdicts.values()) == {None}


def test_theorem1_small_cell_orders_and_random_curve():
    res = run_theorem1_cell(100, 8, 60, seed=5)
    assert res.verdict is True
    assert abs(res.ratio("fourier_random") - (1 - 2 * 8 / 100)) < 0.02
    for m in res.reports:
        assert 0 < res.ratio(m) < 1


def test_theorem1_is_deterministic_and_worker_independent():
    a = run_theorem1_cell(40, 3, 6, seed=9, workers=1)
    b = run_theorem1_cell(40, 3, 6, seed=9, workers=2)
    for m in a.reports:
        assert np.array_equal(a.reports[m].errors, b.reports[m].errors)


def test_theorem2_edges():
    full = run_theorem2_check(8, 64, 5)
    assert full.fourier.mean < 1e-20 and full.dct.mean < 1e-20 and full.gap == 0.0
    none = run_theorem2_check(16, 0, 40)
    assert np.isclose(none.fourier.mean, none.dct.mean)
    assert none.gap <= max(none.gap_stderr, 1e-12)
    with pytest.raises(ValueError):
        run_theorem2_check(8, 65, 2)


def test_correlated_matrix_statistics():
    rng = np.random.default_rng(0)
    W = sample_correlated_matrix(64, 0.0, rng)
    C = np.corrcoef(W[:, :10].T)
    assert np.max(np.abs(C - np.eye(10))) < 0.5
    draws = np.array([sample_correlated_matrix(4, 0.5, rng)[1, 2] for _ in range(4000)])
    assert abs(draws.var(ddof=1) - 1.5) < 3 * 1.5 * np.sqrt(2 / 4000)
    with pytest.raises(ValueError):
        sample_correlated_matrix(4, -0.1, rng)


def test_crossing_point():
    assert crossing_point([0, 1, 2], [1.0, -1.0, -2.0]) == 0.5
    assert crossing_point([0, 1], [-1.0, -2.0]) == 0.0
    assert crossing_point([0, 1], [1.0, 2.0]) is None


def test_noniid_sweep_validation():
    with pytest.raises(ValueError):
        run_noniid_sweep(30, (2,), [0.2, 0.1], 2)
    with pytest.raises(ValueError):
        run_noniid_sweep(30, (2,), [0.0], 2, mode="other")


def test_noniid_sweep_small_grid():
    res = run_noniid_sweep(100, (2, 6), [0.0, 0.1, 0.3], 10, seed=1)
    # frequency side wins without correlation
    assert all(res.lowrank[r][0][0] > res.dct[r][0][0] for r in (2, 6))
    assert res.rho_c[2] is not None
    paired = run_noniid_sweep(60, (2,), [0.0, 0.3], 5, seed=1, mode="paired")
    assert len(paired.dct[2]) == 2


def test_mp_diagnostic_shape():
    T = run_mp_diagnostic(50, 0.0, 3, seed=2)
    assert T.shape == (3,) and np.all((T >= 0) & (T <= 1))
    assert np.array_equal(T, run_mp_diagnostic(50, 0.0, 3, seed=2))
