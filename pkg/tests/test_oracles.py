import numpy as np

from localab.loca import LocaParam, coeff_gradient, location_gradient, upstream_to_Z
from localab.oracles import (
    finite_difference_coeff_gradient,
    quadratic_loss,
    run_gradcheck,
    trace_coeff_gradient,
    trace_location_gradient,
)


def test_gradcheck_cases_pass():
    cases = run_gradcheck(10, seed=3)
    assert all(c.passed() for c in cases)
    assert all(c.B <= 8 and c.p <= 16 for c in cases)


def test_fd_matches_on_b5_grid8(rng):
    p = LocaParam(rng.standard_normal(5), rng.uniform(0, 7, (5, 2)), 1.3, (8, 8))
    target = rng.standard_normal((8, 8))
    _, G = quadratic_loss(p, target)
    g = coeff_gradient(p, upstream_to_Z(G, p.basis))
    fd = finite_difference_coeff_gradient(p, target)
    np.testing.assert_allclose(g, fd, rtol=1e-5)


def test_z_reuse_matches_independent_paths(rng):
    # one Z for every gradient vs. one trace per parameter
    p = LocaParam(rng.standard_normal(6), rng.uniform(0, 9, (6, 2)), 0.8, (10, 10))
    G = rng.standard_normal((10, 10))
    Z = upstream_to_Z(G, p.basis)
    np.testing.assert_allclose(coeff_gradient(p, Z), trace_coeff_gradient(p, G), atol=1e-12)
    np.testing.assert_allclose(location_gradient(p, Z), trace_location_gradient(p, G), atol=1e-12)


def test_trace_oracle_at_edges(rng):
    p = LocaParam([1.0, -2.0], [[0, 0], [5, 5]], 1.0, (6, 6))
    G = rng.standard_normal((6, 6))
    Z = upstream_to_Z(G, p.basis)
    np.testing.assert_allclose(location_gradient(p, Z), trace_location_gradient(p, G), atol=1e-12)
