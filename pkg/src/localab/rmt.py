"""Random-matrix diagnostics.

Empirical spectral density against the Marchenko-Pastur support, a binned
total-variation normality test with a perturbed-reference null, and the
chi-square / Wishart order-statistic estimates behind the budget comparison.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from localab._validation import check_matrix

logger = logging.getLogger(__name__)


@dataclass
class EsdReport:
    eigenvalues: np.ndarray = field(repr=False)
    Q: float
    sigma_mp: float
    mp_lower: float
    mp_upper: float
    outside_mass: float


def mp_bounds(Q, sigma):
    """Marchenko-Pastur support ``sigma^2 (1 -/+ 1/sqrt(Q))^2`` for aspect ratio ``Q >= 1``."""
    if Q < 1:
        raise ValueError(f"aspect ratio Q must be >= 1, got {Q}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    s2 = sigma ** 2
    return s2 * (1 - 1 / np.sqrt(Q)) ** 2, s2 * (1 + 1 / np.sqrt(Q)) ** 2


def mp_outside_mass(eigs, bounds):
    """Fraction of eigenvalue mass outside ``[lower, upper]``."""
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size == 0:
        raise ValueError("need at least one eigenvalue")
    total = eigs.sum()
    if total <= 0:
        raise ValueError("eigenvalues sum to zero")
    lo, hi = bounds
    outside = (eigs < lo) | (eigs > hi)
    return float(eigs[outside].sum() / total)


def esd(W):
    """Spectrum of ``(1/p) W^T W`` for a ``p x q`` matrix with ``p >= q >= 2``.

    The MP scale is the entrywise sample standard deviation of ``W``.
    """
    W = check_matrix(W)
    p, q = W.shape
    if q < 2 or p < q:
        raise ValueError(f"esd needs p >= q >= 2, got {W.shape}")
    sigma = float(W.std())
    if sigma == 0:
        raise ValueError("matrix has zero entrywise variance")
    # squared singular values avoid forming W^T W explicitly
    eigs = np.linalg.svd(W, compute_uv=False) ** 2 / p
    return esd_from_eigenvalues(eigs, p / q, sigma)


def esd_from_eigenvalues(eigs, Q, sigma):
    eigs = np.sort(np.asarray(eigs, dtype=float))[::-1]
    lo, hi = mp_bounds(Q, sigma)
    return EsdReport(eigs, Q, sigma, lo, hi, mp_outside_mass(eigs, (lo, hi)))


# -- total-variation normality test ----------------------------------------------

def tv_edges(mu, sigma, bins=200):
    """Bin edges: ``bins`` equal-width bins over ``mu +/- 6 sigma`` plus two overflow bins."""
    if sigma <= 0 or not np.isfinite(sigma):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    inner = np.linspace(mu - 6 * sigma, mu + 6 * sigma, bins + 1)
    return inner


def _bin_index(x, edges):
    # 0 = lower overflow, len(edges) = upper overflow
    return np.searchsorted(edges, x, side="right")


def _gaussian_mass(edges, mu, sigma):
    cdf = norm.cdf(edges, loc=mu, scale=sigma)
    return np.concatenate([[cdf[0]], np.diff(cdf), [1 - cdf[-1]]])


def _hist(x, edges):
    return np.bincount(_bin_index(x, edges), minlength=len(edges) + 1) / len(x)


def tv_distance(samples, mu, sigma, bins=200):
    """Binned total-variation distance between samples and ``N(mu, sigma^2)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    edges = tv_edges(mu, sigma, bins)
    return float(0.5 * np.abs(_hist(x, edges) - _gaussian_mass(edges, mu, sigma)).sum())


def tv_between_samples(x, y, edges):
    return float(0.5 * np.abs(_hist(x, edges) - _hist(y, edges)).sum())


@dataclass
class NormalityConfig:
    reference_size: int = 100_000
    sigma_e: float = 1e-5
    n_distributions: int = 100
    sets_per_distribution: int = 10
    epsilon: float = 1e-3
    significance: float = 0.05
    bins: int = 200
    max_attempts: int = 10_000


@dataclass
class NormalityTestReport:
    statistic: float
    p_value: float
    epsilon: float
    null_samples: np.ndarray = field(repr=False)
    mu: float = 0.0
    sigma: float = 1.0
    attempts: int = 0

    @property
    def rejected(self):
        return self.p_value < 0.05


class PerturbationBudgetExceeded(RuntimeError):
    """Too few perturbed reference distributions passed the TV threshold."""


def normality_test(W, epsilon=None, config=None, rng=None):
    """Test whether the entries of ``W`` are close to a fitted Gaussian.

    1. fit ``mu, sigma`` to the entries;
    2. draw a reference pool of ``reference_size`` Gaussian samples;
    3. keep perturbed copies of the pool (noise ``sigma_e``) whose binned TV
       to the pool is below ``epsilon``, until ``n_distributions`` are kept;
    4. from each kept copy draw ``sets_per_distribution`` sets of ``W.size``
       points (with replacement) and record their TV to the fitted Gaussian;
    5. the p-value is the fraction of those null statistics that are at least
       the observed TV of ``W``.
    """
    cfg = config or NormalityConfig()
    eps = cfg.epsilon if epsilon is None else epsilon
    W = check_matrix(W)
    rng = np.random.default_rng(rng)
    x = W.ravel()
    mu = float(x.mean())
    sigma = float(x.std(ddof=1))
    if not sigma > 0:
        raise ValueError("degenerate matrix: zero sample standard deviation")
    edges = tv_edges(mu, sigma, cfg.bins)
    pool = rng.normal(mu, sigma, cfg.reference_size)
    pool_hist = _hist(pool, edges)

    kept = []
    attempts = 0
    while len(kept) < cfg.n_distributions:
        if attempts >= cfg.max_attempts:
            raise PerturbationBudgetExceeded(
                f"only {len(kept)} of {cfg.n_distributions} perturbed distributions "
                f"within TV {eps} after {attempts} attempts (sigma_e={cfg.sigma_e})")
        attempts += 1
        perturbed = pool + rng.normal(0.0, cfg.sigma_e, pool.size)
        bins_idx = _bin_index(perturbed, edges)
        hist = np.bincount(bins_idx, minlength=len(edges) + 1) / pool.size
        if 0.5 * np.abs(hist - pool_hist).sum() < eps:
            kept.append(bins_idx)

    gauss = _gaussian_mass(edges, mu, sigma)
    n = x.size
    nulls = np.empty(cfg.n_distributions * cfg.sets_per_distribution)
    k = 0
    for bins_idx in kept:
        for _ in range(cfg.sets_per_distribution):
            draw = bins_idx[rng.integers(0, bins_idx.size, n)]
            hist = np.bincount(draw, minlength=len(edges) + 1) / n
            nulls[k] = 0.5 * np.abs(hist - gauss).sum()
            k += 1
    stat = float(0.5 * np.abs(_hist(x, edges) - gauss).sum())
    p_value = float(np.mean(nulls >= stat))
    return NormalityTestReport(stat, p_value, eps, nulls, mu, sigma, attempts)


# -- order statistics --------------------------------------------------------------

def chi_square_order_sum(dof_pattern, topN, trials, rng=None):
    """Monte Carlo mean and stderr of the sum of the ``topN`` largest draws.

    ``dof_pattern`` lists ``(count, dof)`` groups of independent chi-square
    variables pooled into one ensemble per trial.
    """
    counts = [int(c) for c, _ in dof_pattern]
    total = sum(counts)
    if not 0 <= topN <= total:
        raise ValueError(f"topN={topN} outside [0, {total}]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    sums = np.empty(trials)
    for t in range(trials):
        draws = np.concatenate([rng.chisquare(dof, size=c) for c, dof in dof_pattern])
        if topN == 0:
            sums[t] = 0.0
        elif topN == total:
            sums[t] = draws.sum()
        else:
            sums[t] = np.partition(draws, total - topN)[total - topN:].sum()
    se = float(sums.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return float(sums.mean()), se


def order_stat_upper_bound(mu, sigma, n, l):
    """Bound ``mu + sigma sqrt((n - l) / l)`` on the mean of the ``l``-th largest of ``n``."""
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    return mu + sigma * np.sqrt((n - l) / l)


def wishart_lmax_ratio(K, trials, rng=None):
    """Mean and stderr of ``lambda_max(W^T W) / K`` for Gaussian ``K x K`` matrices."""
    if K < 16:
        raise ValueError(f"K must be >= 16, got {K}")
    rng = np.random.default_rng(rng)
    ratios = np.empty(trials)
    for t in range(trials):
        W = rng.standard_normal((K, K))
        ratios[t] = np.linalg.norm(W, 2) ** 2 / K
    se = float(ratios.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return float(ratios.mean()), se
