"""Mixture reduction by greedy moment-matched pairwise merging.

Candidate merges are ranked by an upper bound on the Kullback-Leibler
divergence between the mixture before and after the merge; the cheapest
pair is merged until the component count reaches the target. Merging only
(no pruning) keeps the global mean and covariance exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, NumericalError
from .mixture_core import GaussianComponent, GaussianMixture, _symmetrize


def merge_pair(a: GaussianComponent, b: GaussianComponent) -> GaussianComponent:
    """Single Gaussian with the weight, mean, and covariance of the pair."""
    if a.dim != b.dim:
        raise InvalidInputError("components live in different dimensions")
    weight = a.weight + b.weight
    if weight <= 0.0:
        raise InvalidInputError("cannot merge two zero-weight components")
    mean = (a.weight * a.mean + b.weight * b.mean) / weight
    da = a.mean - mean
    db = b.mean - mean
    cov = (
        a.weight * (a.cov + np.outer(da, da))
        + b.weight * (b.cov + np.outer(db, db))
    ) / weight
    return GaussianComponent(weight, mean, _symmetrize(cov))


def _logdets(covs: np.ndarray) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(covs)
    if np.any(sign <= 0):
        raise NumericalError("component covariance is singular")
    return logdet


def _row_costs(
    w0: float, m0: np.ndarray, c0: np.ndarray, ld0: float,
    ws: np.ndarray, ms: np.ndarray, cs: np.ndarray, lds: np.ndarray,
) -> np.ndarray:
    """Merge cost of one component against a stack of others."""
    n = m0.shape[0]
    w_sum = w0 + ws
    massless = w_sum <= 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        merged_mean = (w0 * m0[None, :] + ws[:, None] * ms) / w_sum[:, None]
        da = m0[None, :] - merged_mean
        db = ms - merged_mean
        merged_cov = (
            w0 * (c0[None, :, :] + da[:, :, None] * da[:, None, :])
            + ws[:, None, None] * (cs + db[:, :, None] * db[:, None, :])
        ) / w_sum[:, None, None]
    merged_cov = np.where(massless[:, None, None], np.eye(n)[None], merged_cov)
    sign, logdet_merged = np.linalg.slogdet(merged_cov)
    if np.any(sign[~massless] <= 0):
        raise NumericalError("merged covariance is singular")
    cost = 0.5 * (w_sum * logdet_merged - w0 * ld0 - ws * lds)
    cost = np.maximum(cost, 0.0)
    cost[massless] = np.inf
    return cost


def merge_cost(a: GaussianComponent, b: GaussianComponent) -> float:
    """Divergence upper bound for merging the pair; ranks merge candidates."""
    if a.dim != b.dim:
        raise InvalidInputError("components live in different dimensions")
    if a.weight + b.weight <= 0.0:
        raise InvalidInputError("cannot merge two zero-weight components")
    ld = _logdets(np.stack([a.cov, b.cov]))
    row = _row_costs(
        a.weight, a.mean, a.cov, ld[0],
        np.array([b.weight]), b.mean[None, :], b.cov[None, :, :], ld[1:],
    )
    return float(row[0])


def _pairwise_costs(
    weights: np.ndarray, means: np.ndarray, covs: np.ndarray, logdets: np.ndarray
) -> np.ndarray:
    """Merge cost of every pair; +inf on and below the diagonal."""
    count = weights.shape[0]
    cost = np.full((count, count), np.inf)
    for i in range(count - 1):
        cost[i, i + 1 :] = _row_costs(
            weights[i], means[i], covs[i], logdets[i],
            weights[i + 1 :], means[i + 1 :], covs[i + 1 :], logdets[i + 1 :],
        )
    return cost


def reduce(mixture: GaussianMixture, target: int) -> GaussianMixture:
    """Merge the cheapest pair until at most ``target`` components remain.

    Returns the input unchanged when it is already small enough. Ties pick
    the first pair in row-major order.
    """
    if target < 1:
        raise InvalidInputError(f"target must be >= 1, got {target}")
    count = len(mixture)
    if count <= target:
        return mixture

    components: list = list(mixture.components)
    weights = mixture.weights()
    means = mixture.means()
    covs = mixture.covs()
    logdets = _logdets(covs)
    cost = _pairwise_costs(weights, means, covs, logdets)
    size = count

    while count > target:
        i, j = np.unravel_index(int(np.argmin(cost)), cost.shape)
        merged = merge_pair(components[i], components[j])
        components[i] = merged
        components[j] = None
        weights[i] = merged.weight
        means[i] = merged.mean
        covs[i] = merged.cov
        logdets[i] = _logdets(merged.cov[None])[0]
        cost[j, :] = np.inf
        cost[:, j] = np.inf
        count -= 1
        if count == target:
            break
        # Refresh only the pairs that involve the merged component.
        alive = np.array(
            [k for k in range(size) if components[k] is not None and k != i]
        )
        fresh = _row_costs(
            weights[i], means[i], covs[i], logdets[i],
            weights[alive], means[alive], covs[alive], logdets[alive],
        )
        for value, k in zip(fresh, alive):
            a, b = (i, k) if i < k else (k, i)
            cost[a, b] = value

    survivors = tuple(c for c in components if c is not None)
    return GaussianMixture(survivors, normalized=mixture.normalized)
