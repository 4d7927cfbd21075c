"""Sparse DCT adaptation lab: learnable-location cosine adapters, competing
low-rank / Fourier approximation schemes, and random-matrix diagnostics."""

from localab.transforms import (
    DctBasis,
    SparseSpectrum,
    build_dct_matrix,
    dct2,
    dft2,
    fast_dct2,
    fast_idct2,
    get_basis,
    half_matrices,
    idct2_dense,
    idct2_sparse,
    reference_matrix,
    scatter,
)
from localab.loca import AltSchedule, LocaParam, LocaRegressor

__version__ = "0.1.0"

__all__ = [
    "AltSchedule",
    "DctBasis",
    "LocaParam",
    "LocaRegressor",
    "SparseSpectrum",
    "build_dct_matrix",
    "dct2",
    "dft2",
    "fast_dct2",
    "fast_idct2",
    "get_basis",
    "half_matrices",
    "idct2_dense",
    "idct2_sparse",
    "reference_matrix",
    "scatter",
]
