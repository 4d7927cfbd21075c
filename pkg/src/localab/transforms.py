"""Orthonormal DCT / DFT machinery.

Dense and sparse inverse 2-D DCTs share one cached basis per grid size. The
DFT helpers implement the conjugate-symmetry bookkeeping (reference matrix
and half matrices) used when comparing Fourier budgets.

Index convention is 0-based throughout; cell (0, 0) is the DC component.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from localab._validation import check_matrix, check_square

# Reference-matrix labels.
REDUNDANT = -1
SELF_CONJUGATE = 0
RETAINED = 1


def build_dct_matrix(n):
    """Orthonormal DCT-II matrix of size ``n``.

    Entry ``(i, j)`` is ``sqrt(2/n) * k_i * cos(pi * (2j + 1) * i / (2n))`` with
    ``k_0 = 1/sqrt(2)`` and ``k_i = 1`` otherwise, so ``C @ C.T == I``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"DCT size must be >= 1, got {n}")
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    C = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * j + 1) * i / (2 * n))
    C[0, :] /= np.sqrt(2.0)
    return C


@dataclass(frozen=True)
class DctBasis:
    """Row transform ``C`` (p x p) and column transform ``D`` (q x q)."""

    C: np.ndarray
    D: np.ndarray

    @property
    def shape(self):
        return (self.C.shape[0], self.D.shape[0])


@lru_cache(maxsize=None)
def _basis(p, q):
    C = build_dct_matrix(p)
    D = C if q == p else build_dct_matrix(q)
    C.setflags(write=False)
    D.setflags(write=False)
    return DctBasis(C, D)


def get_basis(p, q=None):
    """Shared immutable basis for a ``p x q`` grid (built on first use)."""
    q = p if q is None else q
    return _basis(int(p), int(q))


def _resolve_basis(W, basis):
    if basis is None:
        return get_basis(*W.shape)
    if basis.shape != W.shape:
        raise ValueError(f"basis shape {basis.shape} does not match matrix shape {W.shape}")
    return basis


def dct2(W, basis=None):
    """Forward 2-D DCT ``C @ W @ D.T``."""
    W = check_matrix(W)
    b = _resolve_basis(W, basis)
    return b.C @ W @ b.D.T


def idct2_dense(F, basis=None):
    """Inverse 2-D DCT ``C.T @ F @ D``."""
    F = check_matrix(F, "F")
    b = _resolve_basis(F, basis)
    return b.C.T @ F @ b.D


@dataclass(frozen=True)
class SparseSpectrum:
    """Budget-``B`` list of DCT coefficients at integer grid cells.

    ``locations`` is an integer array of shape (B, 2); ``shape`` is the grid.
    """

    coefficients: np.ndarray
    locations: np.ndarray
    shape: tuple = field(default=(1, 1))

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=float).reshape(-1)
        loc = np.asarray(self.locations, dtype=np.int64).reshape(-1, 2)
        if len(a) != len(loc):
            raise ValueError(f"{len(a)} coefficients but {len(loc)} locations")
        object.__setattr__(self, "coefficients", a)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))
        _check_locations(loc, self.shape)

    def __len__(self):
        return len(self.coefficients)


def _check_locations(locations, dims):
    p, q = dims
    if len(locations) == 0:
        return
    rows, cols = locations[:, 0], locations[:, 1]
    bad = (rows < 0) | (rows >= p) | (cols < 0) | (cols >= q)
    if np.any(bad):
        first = locations[np.argmax(bad)]
        raise ValueError(f"location {tuple(first)} outside the {p}x{q} grid")


def scatter(coefficients, locations, dims):
    """Place coefficients on a zero ``dims`` matrix; colliding cells sum."""
    a = np.asarray(coefficients, dtype=float).reshape(-1)
    loc = np.asarray(locations, dtype=np.int64).reshape(-1, 2)
    if len(a) != len(loc):
        raise ValueError(f"{len(a)} coefficients but {len(loc)} locations")
    _check_locations(loc, dims)
    S = np.zeros(dims)
    np.add.at(S, (loc[:, 0], loc[:, 1]), a)
    return S


def idct2_sparse(spectrum, basis=None):
    """Inverse DCT of a sparse spectrum as a sum of rank-1 terms.

    Computes ``sum_i a_i * outer(C[l1_i], D[l2_i])`` in O(B p q).
    """
    b = get_basis(*spectrum.shape) if basis is None else basis
    if b.shape != spectrum.shape:
        raise ValueError(f"basis shape {b.shape} does not match spectrum grid {spectrum.shape}")
    if len(spectrum) == 0:
        return np.zeros(spectrum.shape)
    rows = b.C[spectrum.locations[:, 0]] * spectrum.coefficients[:, None]
    cols = b.D[spectrum.locations[:, 1]]
    return rows.T @ cols


def fast_dct2(W):
    """FFT-backed orthonormal 2-D DCT-II, O(pq log pq)."""
    W = check_matrix(W)
    return scipy.fft.dctn(W, type=2, norm="ortho")


def fast_idct2(F):
    """FFT-backed inverse of :func:`fast_dct2`."""
    F = check_matrix(F, "F")
    return scipy.fft.idctn(F, type=2, norm="ortho")


def dft2(W):
    """Unitary 2-D DFT (scaled by ``1/sqrt(pq)``) so that energy is preserved."""
    W = check_matrix(W)
    return np.fft.fft2(W, norm="ortho")


def idft2(F):
    """Inverse of :func:`dft2`; returns a complex array."""
    F = check_matrix(F, "F", allow_complex=True)
    return np.fft.ifft2(F, norm="ortho")


def conjugate_partner(i, j, K):
    return (-i) % K, (-j) % K


def is_conjugate_symmetric(F, atol=1e-10):
    F = np.asarray(F)
    p, q = F.shape
    mirrored = np.conj(F[(-np.arange(p)) % p][:, (-np.arange(q)) % q])
    return bool(np.allclose(F, mirrored, rtol=0.0, atol=atol))


def condition_u(i, j, K):
    """Closed-form redundancy predicate for cell ``(i, j)`` of a ``K x K`` spectrum.

    Kept as a cross-check of :func:`reference_matrix`, which enumerates
    conjugate pairs directly.
    """
    return ((i == 0) and (j > K - j)) or ((j == 0) and (i > K - i)) \
        or ((j > 0) and (j > K - j)) or ((j == K - j) and (i > K - i))


@lru_cache(maxsize=None)
def _reference(K):
    R = np.empty((K, K), dtype=np.int8)
    for i in range(K):
        for j in range(K):
            pi, pj = conjugate_partner(i, j, K)
            if (pi, pj) == (i, j):
                R[i, j] = SELF_CONJUGATE
            # smaller column wins; within a column, smaller row wins
            elif (j, i) < (pj, pi):
                R[i, j] = RETAINED
            else:
                R[i, j] = REDUNDANT
    R.setflags(write=False)
    return R


def reference_matrix(K):
    """Label every cell of a ``K x K`` spectrum.

    +1 marks the retained member of a conjugate pair, -1 the redundant member
    and 0 a self-conjugate cell. For even ``K`` the four self-conjugate cells
    are (0,0), (0,K/2), (K/2,0) and (K/2,K/2); for odd ``K`` only (0,0).
    """
    K = int(K)
    if K < 2:
        raise ValueError(f"reference matrix needs K >= 2, got {K}")
    return _reference(K)


def retained_mask(K):
    return reference_matrix(K) != REDUNDANT


def half_weights(R):
    """Energy multiplicity per cell: 2 for retained pairs, 1 self-conjugate, 0 redundant."""
    return np.where(R == RETAINED, 2.0, np.where(R == SELF_CONJUGATE, 1.0, 0.0))


def half_matrices(F, R=None):
    """Return ``(F_H, F_R, F_I)``, the half-spectrum energy matrices of ``F``.

    Redundant cells are zeroed and retained cells doubled, so that
    ``F_H.sum() == ||F||^2`` and ``F_H == F_R + F_I``.
    """
    F = check_matrix(F, "F", allow_complex=True)
    K = check_square(F, "F")
    if R is None:
        R = reference_matrix(K)
    if R.shape != F.shape:
        raise ValueError(f"reference shape {R.shape} does not match spectrum {F.shape}")
    w = half_weights(R)
    F_R = w * F.real ** 2
    F_I = w * F.imag ** 2
    return F_R + F_I, F_R, F_I
