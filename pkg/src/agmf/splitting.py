"""Error-driven component selection and moment-preserving Gaussian splitting.

Selection interpolates geometrically between a component's weight and its
normalized linearization error. The chosen component is then split along the
covariance eigenvector that accumulates the largest squared residual of the
affine surrogate, using a library of univariate standard-Gaussian splits
mapped onto that eigendirection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .mixture_core import (
    EigenDecomposition,
    GaussianComponent,
    GaussianMixture,
    eigendecompose,
)
from .statlin import (
    Linearization,
    SchemeConfig,
    _evaluate_batch,
    _geometry,
    _pointwise_batch,
    error_trace,
)


@dataclass(frozen=True)
class SplitLibrary:
    """Univariate split of the standard Gaussian into a small mixture.

    Each entry j contributes a child with weight share offsets ω'_j placed
    at ẑ'_j with variance σ²_j; the three stored tuples must preserve the
    standard Gaussian's first two moments exactly.
    """

    offsets: tuple
    weights: tuple
    variances: tuple

    def __post_init__(self):
        offsets = tuple(float(v) for v in self.offsets)
        weights = tuple(float(v) for v in self.weights)
        variances = tuple(float(v) for v in self.variances)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "variances", variances)
        if not (len(offsets) == len(weights) == len(variances)) or not offsets:
            raise InvalidInputError("split library entries must align and be nonempty")
        if any(w < 0.0 for w in weights) or any(v < 0.0 for v in variances):
            raise InvalidInputError("split library weights and variances must be >= 0")
        w = np.array(weights)
        z = np.array(offsets)
        s = np.array(variances)
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError("split library weights must sum to 1")
        if abs(w @ z) > 1e-12:
            raise InvalidInputError("split library must keep the mean at 0")
        if abs(w @ (s + z**2) - 1.0) > 1e-12:
            raise InvalidInputError("split library must keep unit variance")


# Symmetric two-component split: means half a standard deviation apart,
# variances chosen so the pair recombines to the standard Gaussian.
DEFAULT_SPLIT_LIBRARY = SplitLibrary(
    offsets=(-0.5, 0.5), weights=(0.5, 0.5), variances=(0.75, 0.75)
)


@dataclass(frozen=True)
class SplitScore:
    """Selection score of one mixture component."""

    component_index: int
    score: float
    epsilon: float


def _scores_array(weights: np.ndarray, epsilons: np.ndarray, gamma: float) -> np.ndarray:
    """s = ω^γ (1 − e^{−ε})^{1−γ}, with a vanishing error term forcing s = 0.

    Error terms below 1e-12 on the normalized [0, 1] scale are cancellation
    residue of effectively affine maps; without the cutoff, the zero exponent
    at γ = 1 would erase the error factor and the weight alone could demand
    pointless splits.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError(f"gamma must lie in [0, 1], got {gamma}")
    error_term = -np.expm1(-np.maximum(epsilons, 0.0))
    scores = np.power(weights, gamma) * np.power(error_term, 1.0 - gamma)
    return np.where(error_term > 1e-12, scores, 0.0)


def selection_scores(
    mixture: GaussianMixture, linearizations, gamma: float
) -> list[SplitScore]:
    """Split-selection score of every component, largest score splits first."""
    linearizations = list(linearizations)
    if len(linearizations) != len(mixture):
        raise InvalidInputError("need exactly one linearization per component")
    epsilons = np.array([error_trace(lin) for lin in linearizations])
    scores = _scores_array(mixture.weights(), epsilons, gamma)
    return [
        SplitScore(component_index=i, score=float(s), epsilon=float(e))
        for i, (s, e) in enumerate(zip(scores, epsilons))
    ]


def _direction_scores_impl(
    g_batch,
    mean: np.ndarray,
    eig: EigenDecomposition,
    gain: np.ndarray,
    offset: np.ndarray,
    geometry,
) -> np.ndarray:
    """Accumulated squared residuals along each eigenvector.

    Each direction is probed at the center plus the scheme's offset factors
    scaled by that direction's standard deviation; probe weights reuse the
    scheme's point weights. Zero-variance directions score -inf so they can
    never win the argmax.
    """
    lam = eig.eigenvalues
    vecs = eig.eigenvectors
    n = mean.size
    factors = geometry.factors
    weights = geometry.weights
    n_factors = factors.size

    sigma = np.sqrt(np.maximum(lam, 0.0))
    # probes[l, j] = mean + ν_j σ_l v_l
    probes = (
        mean[None, None, :]
        + factors[None, :, None] * (sigma[:, None, None] * vecs.T[:, None, :])
    )
    flat = np.vstack([mean[None, :], probes.reshape(n * n_factors, n)])
    values = _evaluate_batch(g_batch, flat)
    residuals = values - (flat @ gain.T + offset[None, :])
    squared = np.sum(residuals**2, axis=1)

    # Point weight of factor j in direction l sits at layout slot 1 + j·n + l.
    probe_weights = weights[1:].reshape(n_factors, n).T
    scores = weights[0] * squared[0] + np.sum(
        probe_weights * squared[1:].reshape(n, n_factors), axis=1
    )
    return np.where(lam <= 0.0, -np.inf, scores)


def direction_scores(
    component: GaussianComponent,
    g,
    lin: Linearization,
    scheme: SchemeConfig = SchemeConfig(),
) -> np.ndarray:
    """Residual accumulation per covariance eigenvector, for split direction."""
    eig = eigendecompose(component.cov)
    geometry = _geometry(scheme, component.dim)
    return _direction_scores_impl(
        _pointwise_batch(g), component.mean, eig, lin.G, lin.b, geometry
    )


def split_component(
    component: GaussianComponent,
    direction: int,
    eig: EigenDecomposition,
    lib: SplitLibrary = DEFAULT_SPLIT_LIBRARY,
) -> list[GaussianComponent]:
    """Replace one Gaussian by the library mixture along one eigenvector.

    The children jointly preserve the parent's weight, mean, and covariance.
    """
    if not 0 <= direction < component.dim:
        raise InvalidInputError(f"direction {direction} out of range")
    lam = float(eig.eigenvalues[direction])
    if lam <= 0.0:
        raise InvalidInputError("cannot split a direction with zero variance")
    vec = eig.eigenvectors[:, direction]
    rank_one = np.outer(vec, vec)
    sigma = math.sqrt(lam)
    children = []
    for offset, weight, variance in zip(lib.offsets, lib.weights, lib.variances):
        children.append(
            GaussianComponent(
                weight=component.weight * weight,
                mean=component.mean + sigma * offset * vec,
                cov=component.cov + lam * (variance - 1.0) * rank_one,
            )
        )
    return children


def select_and_split(
    mixture: GaussianMixture,
    linearizations,
    g,
    gamma: float,
    scheme: SchemeConfig = SchemeConfig(),
    lib: SplitLibrary = DEFAULT_SPLIT_LIBRARY,
):
    """Split the highest-scoring component along its worst direction.

    Returns the new mixture (children replace the parent in place), the
    index of the split component, and the chosen direction. Ties pick the
    lowest component index and, among equal direction scores, the larger
    eigenvalue first.
    """
    scores = selection_scores(mixture, linearizations, gamma)
    index = int(np.argmax([s.score for s in scores]))
    component = mixture.components[index]
    eig = eigendecompose(component.cov)
    geometry = _geometry(scheme, component.dim)
    d = _direction_scores_impl(
        _pointwise_batch(g),
        component.mean,
        eig,
        linearizations[index].G,
        linearizations[index].b,
        geometry,
    )
    direction = int(np.argmax(d))
    children = split_component(component, direction, eig, lib)
    components = (
        mixture.components[:index]
        + tuple(children)
        + mixture.components[index + 1 :]
    )
    return GaussianMixture(components, normalized=mixture.normalized), index, direction
