"""Independent gradient oracles for the learnable-location DCT update.

These recompute the coefficient and location gradients without the
DCT-of-upstream shortcut: each derivative is the trace inner product of the
upstream gradient with an explicitly materialized ``dDeltaW/dtheta``. The
gradient-check suite compares the fast path against them.
"""

from dataclasses import dataclass

import numpy as np

from localab.loca import (
    LocaParam,
    coeff_gradient,
    location_gradient,
    materialize,
    upstream_to_Z,
)
from localab.transforms import build_dct_matrix, scatter


def _unit_update(C, D, i, j):
    # C.T @ E_ij @ D, built from a dense scatter rather than row slicing
    E = scatter([1.0], [[i, j]], (C.shape[0], D.shape[0]))
    return C.T @ E @ D


def trace_coeff_gradient(param, G):
    """``alpha * tr(G^T dDeltaW/da_n)`` per coefficient."""
    p, q = param.dims
    C, D = build_dct_matrix(p), build_dct_matrix(q)
    loc = param.rounded()
    return np.array([param.alpha * np.sum(G * _unit_update(C, D, i, j)) for i, j in loc])


def _axis_difference(C, D, i, j, axis, dims):
    """Shifted-scatter difference matrix ``(E[+1] - E[-1]) / span`` along ``axis``."""
    n = dims[axis]
    idx = (i, j)[axis]
    hi, lo = min(idx + 1, n - 1), max(idx - 1, 0)
    if hi == lo:
        return np.zeros(dims)
    shift = lambda k: (k, j) if axis == 0 else (i, k)  # noqa: E731
    return (_unit_update(C, D, *shift(hi)) - _unit_update(C, D, *shift(lo))) / (hi - lo)


def trace_location_gradient(param, G):
    """``alpha * a_n * tr(G^T dDeltaW/dl_n)`` with shifted-scatter differences, shape (B, 2)."""
    p, q = param.dims
    C, D = build_dct_matrix(p), build_dct_matrix(q)
    out = np.zeros((len(param), 2))
    for n, (i, j) in enumerate(param.rounded()):
        for axis in (0, 1):
            dW = _axis_difference(C, D, i, j, axis, (p, q))
            out[n, axis] = param.alpha * param.a[n] * np.sum(G * dW)
    return out


def quadratic_loss(param, target):
    """``0.5 * ||DeltaW - target||^2`` and its upstream gradient."""
    resid = materialize(param) - target
    return 0.5 * float(np.sum(resid ** 2)), resid


def finite_difference_coeff_gradient(param, target, h=1e-4):
    """Central finite differences of :func:`quadratic_loss` in each coefficient."""
    grads = np.empty(len(param))
    for n in range(len(param)):
        plus, minus = param.copy(), param.copy()
        plus.a[n] += h
        minus.a[n] -= h
        grads[n] = (quadratic_loss(plus, target)[0] - quadratic_loss(minus, target)[0]) / (2 * h)
    return grads


@dataclass
class GradCheckCase:
    index: int
    B: int
    p: int
    coeff_trace_err: float
    loc_trace_err: float
    coeff_fd_rel_err: float

    def passed(self, trace_tol=1e-10, fd_tol=1e-5):
        return (self.coeff_trace_err <= trace_tol and self.loc_trace_err <= trace_tol
                and self.coeff_fd_rel_err <= fd_tol)


def random_case(rng, max_B=8, max_p=16):
    """Random param (nonzero coefficients) on a square grid plus a random target."""
    p = int(rng.integers(2, max_p + 1))
    B = int(rng.integers(1, max_B + 1))
    param = LocaParam(rng.standard_normal(B), rng.uniform(0, p - 1, (B, 2)),
                      float(rng.uniform(0.5, 2.0)), (p, p))
    return param, rng.standard_normal((p, p))


def run_gradcheck(n_cases=20, seed=0, h=1e-4):
    """Compare the fast gradients against the trace and finite-difference oracles."""
    rng = np.random.default_rng(seed)
    cases = []
    for k in range(n_cases):
        param, target = random_case(rng)
        _, G = quadratic_loss(param, target)
        Z = upstream_to_Z(G, param.basis)
        ga = coeff_gradient(param, Z)
        gl = location_gradient(param, Z)
        fd = finite_difference_coeff_gradient(param, target, h)
        scale = np.maximum(np.abs(fd), 1e-12)
        cases.append(GradCheckCase(
            k, len(param), param.dims[0],
            float(np.max(np.abs(ga - trace_coeff_gradient(param, G)))),
            float(np.max(np.abs(gl - trace_location_gradient(param, G)))),
            float(np.max(np.abs(ga - fd) / scale)),
        ))
    return cases
