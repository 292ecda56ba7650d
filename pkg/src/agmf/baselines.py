"""Comparison filters: UKF, bootstrap particle filter, non-adaptive splitting.

The UKF is literally the mixture filter capped at one component, so the
two can never drift apart. The particle filter is a bootstrap filter
with residual resampling. The weight-eigenvalue splitting variant reuses
the whole mixture pipeline and differs only in how splits are chosen.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .agmf import (
    _LOG_DEGENERATE,
    POSTERIOR,
    SPLITTING_WEIGHT_EIGEN,
    FilterConfig,
    FilterState,
    StateSpaceModel,
    adapt,
    predict,
    update,
)
from .errors import (
    DegenerateUpdateError,
    EvaluationError,
    InvalidInputError,
    NumericalError,
)
from .mixture_core import (
    _LOG_2PI,
    GaussianComponent,
    GaussianMixture,
    _frozen,
    eigendecompose,
    mixture_moments,
)
from .statlin import SchemeConfig, SchemeKind

__all__ = [
    "ParticleSet",
    "initial_particles",
    "mwe_adapt",
    "pf_step",
    "residual_resample",
    "ukf_step",
]


def _single_gaussian(mixture: GaussianMixture) -> GaussianMixture:
    mean, cov = mixture_moments(mixture)
    return GaussianMixture((GaussianComponent(1.0, mean, cov),))


def ukf_step(
    state: GaussianComponent,
    u,
    z,
    model: StateSpaceModel,
    kappa: float = 0.5,
) -> GaussianComponent:
    """One unscented predict+update on a single Gaussian.

    Multimodal noise densities are moment-matched to single Gaussians
    first. Internally this runs the mixture filter with a one-component
    cap, so the algebra is identical by construction.
    """
    if not isinstance(state, GaussianComponent):
        raise InvalidInputError("ukf_step expects a single GaussianComponent")
    matched = replace(
        model,
        process_noise=_single_gaussian(model.process_noise),
        measurement_noise=_single_gaussian(model.measurement_noise),
    )
    config = FilterConfig(
        l_max=1,
        reduce_pred=1,
        reduce_filt=1,
        scheme=SchemeConfig(kind=SchemeKind.UNSCENTED_TRANSFORM, kappa=kappa),
    )
    density = GaussianMixture((GaussianComponent(1.0, state.mean, state.cov),))
    filter_state = FilterState(0, density, POSTERIOR)
    filter_state = predict(filter_state, u, matched, config)
    filter_state = update(filter_state, z, matched, config)
    return filter_state.density.components[0]


def mwe_adapt(joint: GaussianMixture, g, config: FilterConfig):
    """Split by largest weight along the largest-eigenvalue direction.

    Same loop and return contract as ``adapt``; only the selection, the
    direction choice and the stopping rule differ (the error rule is
    ignored, so splitting runs until the component cap or the deviation
    budget is hit).
    """
    return adapt(joint, g, replace(config, splitting=SPLITTING_WEIGHT_EIGEN))


@dataclass(frozen=True)
class ParticleSet:
    """Weighted samples plus the estimate taken before resampling.

    ``mean_estimate`` is the importance-weighted posterior mean computed
    from the pre-resample weights; the stored weights are the post-
    resample ones (uniform after every ``pf_step``).
    """

    states: np.ndarray
    weights: np.ndarray
    mean_estimate: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        mean = np.asarray(self.mean_estimate, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1:
            raise InvalidInputError("states must be a (count, dim) array")
        if weights.shape != (states.shape[0],):
            raise InvalidInputError("weights must have one entry per particle")
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InvalidInputError("weights must be nonnegative and sum to one")
        if mean.shape != (states.shape[1],):
            raise InvalidInputError("mean_estimate must match the state dimension")
        object.__setattr__(self, "states", _frozen(states))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "mean_estimate", _frozen(mean))

    @property
    def count(self) -> int:
        return self.states.shape[0]


def _psd_root(cov: np.ndarray) -> np.ndarray:
    # Eigen-based root so zero-variance directions sample as exact zeros.
    eig = eigendecompose(cov)
    return eig.eigenvectors * np.sqrt(eig.eigenvalues)[None, :]


def _sample_mixture(mixture: GaussianMixture, count: int, rng) -> np.ndarray:
    weights = mixture.weights()
    means = mixture.means()
    covs = mixture.covs()
    n = mixture.dim
    out = np.empty((count, n))
    if len(mixture) == 1:
        labels = np.zeros(count, dtype=int)
    else:
        labels = rng.choice(len(mixture), size=count, p=weights / weights.sum())
    for j in range(len(mixture)):
        mask = labels == j
        hits = int(mask.sum())
        if hits == 0:
            continue
        root = _psd_root(covs[j])
        out[mask] = means[j] + rng.standard_normal((hits, n)) @ root.T
    return out


def initial_particles(mixture: GaussianMixture, count: int, rng) -> ParticleSet:
    """Equally weighted draws from a mixture density."""
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    states = _sample_mixture(mixture, count, rng)
    weights = np.full(count, 1.0 / count)
    return ParticleSet(states, weights, weights @ states)


def residual_resample(weights: np.ndarray, count: int, rng) -> np.ndarray:
    """Parent indices for residual resampling of ``count`` offspring.

    Each parent is copied floor(count * weight) times; the remainder is
    drawn multinomially from the fractional leftovers, so integer
    expected counts reproduce deterministically.
    """
    weights = np.asarray(weights, dtype=float)
    scaled = count * weights
    copies = np.floor(scaled).astype(int)
    deterministic = np.repeat(np.arange(weights.size), copies)
    remainder = count - int(copies.sum())
    if remainder == 0:
        return deterministic
    residual = scaled - copies
    total = residual.sum()
    p = residual / total if total > 0.0 else weights
    extra = rng.choice(weights.size, size=remainder, p=p)
    return np.concatenate([deterministic, extra])


def pf_step(
    particles: ParticleSet, u, z, model: StateSpaceModel, rng
) -> ParticleSet:
    """Bootstrap step: propagate, reweight, residual-resample.

    The likelihood is the measurement-noise mixture with each component
    evaluated at its own mean noise value, which is exact whenever the
    noise enters additively (z = h(x) + v). Raises DegenerateUpdateError
    when every particle's likelihood underflows.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (model.input_dim,):
        raise InvalidInputError(f"input must have length {model.input_dim}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (model.measurement_dim,) or not np.all(np.isfinite(z)):
        raise InvalidInputError(
            f"measurement must be a finite vector of length {model.measurement_dim}"
        )
    if particles.states.shape[1] != model.state_dim:
        raise InvalidInputError("particle dimension does not match the model")

    count = particles.count
    noise = _sample_mixture(model.process_noise, count, rng)
    propagated = np.asarray(
        model.system_fn(particles.states, u, noise), dtype=float
    )
    if propagated.shape != (count, model.state_dim):
        raise EvaluationError("system_fn returned an unexpected shape")
    if not np.all(np.isfinite(propagated)):
        raise EvaluationError("system_fn produced non-finite states")

    n_z = model.measurement_dim
    log_parts = np.empty((len(model.measurement_noise), count))
    for j, comp in enumerate(model.measurement_noise.components):
        predicted = np.asarray(
            model.measurement_fn(propagated, np.tile(comp.mean, (count, 1))),
            dtype=float,
        )
        if predicted.shape != (count, n_z):
            raise EvaluationError("measurement_fn returned an unexpected shape")
        residual = z[None, :] - predicted
        try:
            chol = np.linalg.cholesky(comp.cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"measurement-noise covariance not positive definite: {exc}"
            ) from exc
        white = np.linalg.solve(chol, residual.T)
        quad = np.sum(white**2, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        with np.errstate(divide="ignore"):
            log_parts[j] = np.log(comp.weight) - 0.5 * (
                quad + logdet + n_z * _LOG_2PI
            )
    # log-sum-exp with a guard for particles whose every part underflowed
    top = log_parts.max(axis=0)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        loglik = safe + np.log(np.exp(log_parts - safe[None, :]).sum(axis=0))

    if float(np.max(loglik)) < _LOG_DEGENERATE:
        raise DegenerateUpdateError("all particle likelihoods collapsed to zero")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_weights = np.log(particles.weights) + loglik
    peak = np.max(log_weights)
    if not np.isfinite(peak):
        raise DegenerateUpdateError("all particle weights collapsed to zero")
    new_weights = np.exp(log_weights - peak)
    new_weights /= new_weights.sum()

    mean_estimate = new_weights @ propagated
    parents = residual_resample(new_weights, count, rng)
    uniform = np.full(count, 1.0 / count)
    return ParticleSet(propagated[parents], uniform, mean_estimate)
