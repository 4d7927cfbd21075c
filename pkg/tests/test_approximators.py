import numpy as np
import pytest

from localab.approximators import (
    ApproximationReport,
    BudgetSpec,
    closed_form_L_R,
    dct_top_approx,
    dct_top_error,
    expected_random_selection,
    fourier_random_approx,
    fourier_top_amplitude_approx,
    fourier_top_coeff_approx,
    fourier_top_coeff_error,
    lowrank_approx,
    lowrank_error,
    random_selection_error,
    reconstruction_error,
    retained_cell_count,
    slot_count,
    tail_errors,
)
from localab.transforms import dft2, half_matrices, idft2


def test_budget_counts():
    b = BudgetSpec(100, 100, 8)
    assert (b.N0, b.N1, b.N2, b.N3, b.ND) == (1600, 800, 1066, 800, 800)
    assert b.N2_cells == 533


@pytest.mark.parametrize("args", [(10, 10, 0), (10, 10, 11), (8, 8, 6)])
def test_budget_rejects(args):
    with pytest.raises(ValueError):
        BudgetSpec(*args)


def test_report_statistics():
    rep = ApproximationReport("x", [1.0, 2.0, 3.0])
    assert rep.mean == 2.0 and rep.trials == 3
    assert np.isclose(rep.stderr, 1.0 / np.sqrt(3))
    assert np.isnan(ApproximationReport("x", [1.0]).stderr)
    with pytest.raises(ValueError):
        ApproximationReport("x", [])


def test_reconstruction_error_examples(rng):
    assert reconstruction_error(np.eye(2), np.eye(2)) == 0.0
    assert reconstruction_error(np.eye(2), np.zeros((2, 2))) == 2.0
    with pytest.raises(ValueError):
        reconstruction_error(np.eye(2), np.eye(3))
    W = rng.standard_normal((7, 5))
    s = np.linalg.svd(W, compute_uv=False)
    assert np.isclose(reconstruction_error(W, np.zeros_like(W)), np.sum(s ** 2))


def test_lowrank_examples(rng):
    W = rng.standard_normal((6, 4))
    np.testing.assert_allclose(lowrank_approx(W, 4), W, atol=1e-8)
    D = np.diag([3.0, 2.0, 1.0])
    np.testing.assert_allclose(lowrank_approx(D, 1), np.diag([3.0, 0, 0]), atol=1e-12)
    assert np.isclose(reconstruction_error(D, lowrank_approx(D, 1)), 5.0)
    W = rng.standard_normal((20, 20))
    err = reconstruction_error(W, lowrank_approx(W, 4))
    assert np.isclose(err, lowrank_error(W, 4), rtol=1e-6)
    with pytest.raises(ValueError):
        lowrank_approx(W, 0)


def test_closed_form_l_r():
    assert closed_form_L_R([3, 2, 1], 1) == 5.0
    assert closed_form_L_R([3, 2, 1], 3) == 0.0
    with pytest.raises(ValueError):
        closed_form_L_R([3, 2, 1], 4)
    with pytest.raises(ValueError):
        closed_form_L_R([1, 2, 3], 1)


def test_retained_counts():
    assert retained_cell_count(8) == 8 * 8 // 2 + 2
    assert retained_cell_count(7) == (49 + 1) // 2
    assert slot_count(8) == 64
    assert slot_count(7) == 49


def test_fourier_random_extremes(rng):
    W = rng.standard_normal((8, 8))
    n = retained_cell_count(8)
    np.testing.assert_allclose(fourier_random_approx(W, n, rng), W, atol=1e-8)
    W0, err = fourier_random_approx(W, 0, rng, return_error=True)
    assert not W0.any() and np.isclose(err, np.sum(W ** 2))
    with pytest.raises(ValueError):
        fourier_random_approx(W, n + 1, rng)


@pytest.mark.parametrize("K", [6, 7, 16])
def test_frequency_tail_sums_match_residuals(K, rng):
    W = rng.standard_normal((K, K))
    for fn, N in [(fourier_top_amplitude_approx, K), (fourier_top_coeff_approx, 2 * K),
                  (dct_top_approx, 2 * K)]:
        W_hat, err = fn(W, N, return_error=True)
        assert np.isclose(reconstruction_error(W, W_hat), err, rtol=1e-8)
    W_hat, err = fourier_random_approx(W, K, np.random.default_rng(1), return_error=True)
    assert np.isclose(reconstruction_error(W, W_hat), err, rtol=1e-8)
    assert np.isclose(err, random_selection_error(W, K, np.random.default_rng(1)), rtol=1e-12)


def test_top_amplitude_picks_dominant_cell(rng):
    W = 1e-3 * rng.standard_normal((8, 8))
    F = dft2(W)
    F[2, 3] += 50.0
    F[-2 % 8, -3 % 8] += 50.0
    W = idft2(F).real
    W_hat = fourier_top_amplitude_approx(W, 1)
    F_hat = dft2(W_hat)
    big = np.argwhere(np.abs(F_hat) > 1e-9).tolist()
    assert sorted(big) == [[2, 3], [6, 5]]


def test_top_amplitude_all_cells_is_exact(rng):
    W = rng.standard_normal((6, 6))
    np.testing.assert_allclose(fourier_top_amplitude_approx(W, retained_cell_count(6)), W, atol=1e-10)


def test_top_coeff_ignores_imaginary_slots_of_real_spectrum():
    # even-symmetric matrix has a purely real spectrum
    K = 8
    i = np.arange(K)
    W = np.cos(2 * np.pi * np.outer(i, i) / K) + np.cos(2 * np.pi * i / K)[:, None]
    F = dft2(W)
    assert np.max(np.abs(F.imag)) < 1e-12
    n_real = np.count_nonzero(np.abs(F.real) > 1e-9)
    W_hat, err = fourier_top_coeff_approx(W, n_real, return_error=True)
    np.testing.assert_allclose(W_hat, W, atol=1e-10)


def test_dct_top_extremes(rng):
    W = rng.standard_normal((5, 7))
    np.testing.assert_allclose(dct_top_approx(W, 35), W, atol=1e-10)
    W0, err = dct_top_approx(W, 0, return_error=True)
    assert not W0.any() and np.isclose(err, np.sum(W ** 2))
    with pytest.raises(ValueError):
        dct_top_approx(W, 36)


def test_expected_random_selection():
    assert np.isclose(expected_random_selection(4, 1), 6.4)
    for K in (8, 9, 64, 65):
        for r in (1, 2, 5):
            assert expected_random_selection(K, r) < 2 * K * r
    assert np.isclose(expected_random_selection(5, 1), 125 / 13)


def test_reconstructions_are_real(rng):
    W = rng.standard_normal((10, 10))
    for W_hat in (fourier_random_approx(W, 17, rng), fourier_top_amplitude_approx(W, 9),
                  fourier_top_coeff_approx(W, 23)):
        assert W_hat.dtype == np.float64


def test_tail_errors_consistent(rng):
    W = rng.standard_normal((24, 24))
    b = BudgetSpec(24, 24, 2)
    errs = tail_errors(W, b)
    assert np.isclose(errs["lowrank"], lowrank_error(W, 2))
    assert np.isclose(errs["fourier_top_amplitude"],
                      fourier_top_amplitude_approx(W, b.N2_cells, return_error=True)[1])
    assert np.isclose(errs["fourier_top_coeff"], fourier_top_coeff_error(W, b.N3))
    assert np.isclose(errs["dct_top"], dct_top_error(W, b.ND))
    F_H, _, _ = half_matrices(dft2(W))
    assert np.isclose(F_H.sum(), np.sum(W ** 2))
