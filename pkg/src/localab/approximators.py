"""Budget-matched reconstruction schemes.

Five ways to approximate a matrix ``W`` under a parameter budget: truncated
SVD, randomly located Fourier cells, top-amplitude Fourier cells, individually
selected real/imaginary Fourier slots, and top-magnitude DCT coefficients.
Each frequency scheme also has a closed tail-sum error via Parseval, which the
tests compare against the residual computed in the spatial domain.
"""

from dataclasses import dataclass, field

import numpy as np

from localab._validation import check_matrix, check_same_shape, check_square
from localab.transforms import (
    REDUNDANT,
    RETAINED,
    SELF_CONJUGATE,
    dct2,
    dft2,
    half_matrices,
    idct2_dense,
    idft2,
    reference_matrix,
)


@dataclass(frozen=True)
class BudgetSpec:
    """Parameter counts matched to a rank-``r`` factorisation of a p x q matrix.

    ``N0 = (p + q) r``. A random cell costs its two coefficients (the
    locations come from a seed), an individually selected slot costs one
    coefficient plus one index, and a top-amplitude cell costs two
    coefficients plus one index. Hence ``N1 = N3 = ND = N0 // 2`` and
    ``N2 = 2 * N0 // 3`` coefficients, i.e. ``N2_cells = N2 // 2`` cells.
    """

    p: int
    q: int
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"rank must be >= 1, got {self.r}")
        if self.r > min(self.p, self.q):
            raise ValueError(f"rank {self.r} exceeds min(p, q) = {min(self.p, self.q)}")
        if self.p == self.q:
            cells = retained_cell_count(self.p)
            if self.N2_cells > cells or self.N1 > cells:
                raise ValueError(f"budget exceeds the {cells} retained spectrum cells")
            if self.N3 > self.p * self.q:
                raise ValueError("N3 exceeds the number of real/imaginary slots")

    @property
    def N0(self):
        return (self.p + self.q) * self.r

    @property
    def N1(self):
        return self.N0 // 2

    @property
    def N2(self):
        return 2 * self.N0 // 3

    @property
    def N2_cells(self):
        return self.N2 // 2

    @property
    def N3(self):
        return self.N0 // 2

    @property
    def ND(self):
        return self.N3


@dataclass
class ApproximationReport:
    """Monte Carlo summary of one scheme's reconstruction errors."""

    method: str
    errors: np.ndarray = field(repr=False)
    K: int = 0
    r: int = 0

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=float)
        if len(self.errors) < 1:
            raise ValueError("report needs at least one trial")

    @property
    def trials(self):
        return len(self.errors)

    @property
    def mean(self):
        return float(self.errors.mean())

    @property
    def stderr(self):
        if self.trials < 2:
            return float("nan")
        return float(self.errors.std(ddof=1) / np.sqrt(self.trials))


def reconstruction_error(W, W_hat):
    """Squared Frobenius norm of ``W - W_hat``."""
    W = check_matrix(W)
    W_hat = check_matrix(W_hat, "W_hat")
    check_same_shape(W, W_hat, ("W", "W_hat"))
    return float(np.sum((W - W_hat) ** 2))


# -- low rank ---------------------------------------------------------------

def lowrank_approx(W, r):
    """Best rank-``r`` approximation (truncated SVD)."""
    W = check_matrix(W)
    if not 1 <= r <= min(W.shape):
        raise ValueError(f"rank {r} outside [1, {min(W.shape)}]")
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def closed_form_L_R(singular_values, r):
    """Tail energy ``sum_{i > r} s_i^2`` of a descending singular-value list."""
    s = np.asarray(singular_values, dtype=float)
    if r > len(s) or r < 0:
        raise ValueError(f"rank {r} outside [0, {len(s)}]")
    if np.any(np.diff(s) > 0) or np.any(s < 0):
        raise ValueError("singular values must be nonnegative and sorted descending")
    return float(np.sum(s[r:] ** 2))


def lowrank_error(W, r):
    """Rank-``r`` truncation error from singular values only (no reconstruction)."""
    s = np.linalg.svd(check_matrix(W), compute_uv=False)
    return closed_form_L_R(s, r)


# -- Fourier schemes ----------------------------------------------------------

def retained_cell_count(K):
    """Cells with reference label 0 or +1: ``K^2/2 + 2`` (even K) or ``(K^2+1)/2``."""
    return int(np.count_nonzero(reference_matrix(K) != REDUNDANT))


def _retained_cells(K):
    """Row-major (row, col) arrays of non-redundant cells."""
    R = reference_matrix(K)
    rows, cols = np.nonzero(R != REDUNDANT)
    return rows, cols


def _mirror_fill(F_kept, K):
    """Copy each kept retained cell onto its conjugate partner."""
    R = reference_matrix(K)
    idx = (-np.arange(K)) % K
    mirrored = np.conj(F_kept[idx][:, idx])
    return np.where(R == REDUNDANT, mirrored, F_kept)


def _real_inverse(F_hat):
    W_hat = idft2(F_hat)
    residue = float(np.max(np.abs(W_hat.imag))) if W_hat.size else 0.0
    if residue > 1e-8 * max(1.0, float(np.max(np.abs(W_hat.real)))):
        raise ArithmeticError(f"inverse DFT left an imaginary residue of {residue:.3e}")
    return W_hat.real


def _keep_cells(F, K, rows, cols):
    kept = np.zeros_like(F)
    kept[rows, cols] = F[rows, cols]
    return _mirror_fill(kept, K)


def fourier_random_approx(W, N1, rng, return_error=False):
    """Keep the full complex value at ``N1`` random non-redundant cells.

    Conjugate partners are mirrored so the reconstruction is real.
    """
    W = check_matrix(W)
    K = check_square(W)
    rows, cols = _retained_cells(K)
    if not 0 <= N1 <= len(rows):
        raise ValueError(f"N1={N1} exceeds the {len(rows)} retained cells")
    rng = np.random.default_rng(rng)
    pick = rng.choice(len(rows), size=N1, replace=False)
    F = dft2(W)
    W_hat = _real_inverse(_keep_cells(F, K, rows[pick], cols[pick]))
    if return_error:
        F_H, _, _ = half_matrices(F)
        err = float(F_H.sum() - F_H[rows[pick], cols[pick]].sum())
        return W_hat, err
    return W_hat


def _top_indices(values, n):
    """Indices of the ``n`` largest values, ties broken by position (stable)."""
    order = np.argsort(-values, kind="stable")
    return order[:n]


def fourier_top_amplitude_approx(W, N2, return_error=False):
    """Keep the ``N2`` non-redundant cells with the largest half-energy ``F_H``."""
    W = check_matrix(W)
    K = check_square(W)
    rows, cols = _retained_cells(K)
    if not 0 <= N2 <= len(rows):
        raise ValueError(f"N2={N2} exceeds the {len(rows)} retained cells")
    F = dft2(W)
    F_H, _, _ = half_matrices(F)
    energy = F_H[rows, cols]
    pick = _top_indices(energy, N2)
    W_hat = _real_inverse(_keep_cells(F, K, rows[pick], cols[pick]))
    if return_error:
        return W_hat, float(np.sort(energy)[::-1][N2:].sum())
    return W_hat


def _slot_table(K):
    """Real/imaginary slots of the retained half, ordered (row, col, real-first).

    Self-conjugate cells only carry a real slot.
    """
    R = reference_matrix(K)
    rows, cols = _retained_cells(K)
    slot_rows = np.repeat(rows, 2)
    slot_cols = np.repeat(cols, 2)
    is_imag = np.tile([False, True], len(rows))
    keep = ~(is_imag & (R[slot_rows, slot_cols] == SELF_CONJUGATE))
    return slot_rows[keep], slot_cols[keep], is_imag[keep]


def slot_count(K):
    return len(_slot_table(K)[0])


def fourier_top_coeff_approx(W, N3, return_error=False):
    """Keep the ``N3`` largest individual real/imaginary slots of ``F^S``."""
    W = check_matrix(W)
    K = check_square(W)
    srows, scols, simag = _slot_table(K)
    if not 0 <= N3 <= len(srows):
        raise ValueError(f"N3={N3} exceeds the {len(srows)} real/imaginary slots")
    F = dft2(W)
    _, F_R, F_I = half_matrices(F)
    energy = np.where(simag, F_I[srows, scols], F_R[srows, scols])
    pick = _top_indices(energy, N3)
    kept = np.zeros_like(F)
    re = pick[~simag[pick]]
    im = pick[simag[pick]]
    kept[srows[re], scols[re]] += F[srows[re], scols[re]].real
    kept[srows[im], scols[im]] += 1j * F[srows[im], scols[im]].imag
    W_hat = _real_inverse(_mirror_fill(kept, K))
    if return_error:
        return W_hat, float(np.sort(energy)[::-1][N3:].sum())
    return W_hat


# -- DCT -----------------------------------------------------------------------

def dct_top_approx(W, ND, return_error=False):
    """Keep the ``ND`` largest-magnitude DCT coefficients."""
    W = check_matrix(W)
    n_cells = W.size
    if not 0 <= ND <= n_cells:
        raise ValueError(f"ND={ND} outside [0, {n_cells}]")
    Dw = dct2(W)
    flat = Dw.ravel()
    pick = _top_indices(np.abs(flat), ND)
    kept = np.zeros_like(flat)
    kept[pick] = flat[pick]
    W_hat = idct2_dense(kept.reshape(W.shape))
    if return_error:
        return W_hat, float(np.sort(flat ** 2)[::-1][ND:].sum())
    return W_hat


def expected_random_selection(K, r):
    """Closed-form ``E[K^2 - L_F1]`` for standard Gaussian ``K x K`` matrices."""
    K = int(K)
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    cells = K * K / 2 + 2 if K % 2 == 0 else (K * K + 1) / 2
    return K ** 3 * r / cells


def tail_errors(W, budget):
    """Budget-matched errors of one square matrix, via tail sums.

    Returns a dict keyed ``lowrank``, ``fourier_top_amplitude``,
    ``fourier_top_coeff``, ``dct_top``. The random-location scheme needs a
    random source and is handled by :func:`random_selection_error`.
    """
    W = check_matrix(W)
    K = check_square(W)
    s = np.linalg.svd(W, compute_uv=False)
    F = dft2(W)
    F_H, F_R, F_I = half_matrices(F)
    rows, cols = _retained_cells(K)
    amp = np.sort(F_H[rows, cols])[::-1]
    return {
        "lowrank": float(np.sum(s[budget.r:] ** 2)),
        "fourier_top_amplitude": float(amp[budget.N2_cells:].sum()),
        "fourier_top_coeff": _slot_tail(F_R, F_I, K, budget.N3),
        "dct_top": dct_top_error(W, budget.ND),
    }


def _slot_tail(F_R, F_I, K, N3):
    srows, scols, simag = _slot_table(K)
    slots = np.sort(np.where(simag, F_I[srows, scols], F_R[srows, scols]))[::-1]
    return float(slots[N3:].sum())


def fourier_top_coeff_error(W, N3):
    """Tail-sum error of the individually selected Fourier slots."""
    W = check_matrix(W)
    K = check_square(W)
    _, F_R, F_I = half_matrices(dft2(W))
    return _slot_tail(F_R, F_I, K, N3)


def dct_top_error(W, ND):
    """Parseval tail sum of the squared DCT coefficients beyond the top ``ND``."""
    d = np.sort(dct2(check_matrix(W)).ravel() ** 2)[::-1]
    return float(d[ND:].sum())


def random_selection_error(W, N1, rng):
    """Tail-sum error of the random-location scheme (no reconstruction)."""
    K = check_square(W)
    rows, cols = _retained_cells(K)
    F_H, _, _ = half_matrices(dft2(W))
    pick = np.random.default_rng(rng).choice(len(rows), size=N1, replace=False)
    return float(F_H.sum() - F_H[rows[pick], cols[pick]].sum())
