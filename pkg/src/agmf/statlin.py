"""Statistical linear regression of nonlinear maps through Gaussian densities.

A deterministic, weighted point set captures the first two moments of the
input Gaussian exactly. Propagating the points through the nonlinear map and
solving a weighted least-squares problem yields an affine surrogate
``y = G x + b`` together with the covariance of what the surrogate misses.
That error covariance is the quantity the adaptive splitting logic feeds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidInputError, NumericalError
from .mixture_core import _frozen, _validated_cov


class SchemeKind(Enum):
    """Built-in regression point selection schemes."""

    UNSCENTED_TRANSFORM = "unscented_transform"
    GAUSSIAN_ESTIMATOR_N2 = "gaussian_estimator_n2"
    GAUSSIAN_ESTIMATOR_N4 = "gaussian_estimator_n4"


@dataclass(frozen=True)
class SchemeConfig:
    """Point selection scheme plus its free parameters.

    kappa applies to the unscented transform only and controls the spread
    of the off-center points; n + kappa must stay positive.
    """

    kind: SchemeKind = SchemeKind.UNSCENTED_TRANSFORM
    kappa: float = 0.5


@dataclass(frozen=True)
class RegressionPointSet:
    """Weighted deterministic sample whose first two moments match a Gaussian."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))
        object.__setattr__(self, "weights", _frozen(self.weights))


@dataclass(frozen=True)
class Linearization:
    """Affine surrogate of a nonlinear map over one Gaussian component.

    G and b solve the weighted least-squares regression through the point
    set; err_cov is the covariance of the residuals, i.e. the part of the
    map the surrogate cannot represent. y_mean, y_cov, and xy_cross are the
    propagated output moments of the same point set.
    """

    G: np.ndarray
    b: np.ndarray
    y_mean: np.ndarray
    y_cov: np.ndarray
    xy_cross: np.ndarray
    err_cov: np.ndarray

    def __post_init__(self):
        for name in ("G", "b", "y_mean", "y_cov", "xy_cross", "err_cov"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


@dataclass(frozen=True)
class _Geometry:
    """Offset factors and weights of a scheme at a fixed input dimension.

    factors holds the scalar offsets applied along each column of the
    matrix root; weights holds all point weights with the center first.
    """

    factors: np.ndarray
    weights: np.ndarray
    root_kind: str  # "cholesky" or "eigen"


def _ut_builder(n: int, config: SchemeConfig) -> _Geometry:
    kappa = float(config.kappa)
    if n + kappa <= 0.0:
        raise InvalidInputError(
            f"unscented transform needs n + kappa > 0, got {n} + {kappa}"
        )
    spread = math.sqrt(n + kappa)
    weights = np.full(2 * n + 1, 1.0 / (2.0 * (n + kappa)))
    weights[0] = kappa / (n + kappa)
    return _Geometry(np.array([spread, -spread]), weights, "cholesky")


def _ge_builder(raw_factors) -> Callable[[int, SchemeConfig], _Geometry]:
    raw = np.asarray(raw_factors, dtype=float)

    def build(n: int, config: SchemeConfig) -> _Geometry:
        count = n * raw.size + 1
        # The tabulated offsets reproduce the moments only in one dimension;
        # rescale so the equal-weight scatter matches the covariance for any n.
        factors = raw * np.sqrt(count / np.sum(raw**2))
        return _Geometry(factors, np.full(count, 1.0 / count), "eigen")

    return build


_BUILDERS: dict = {
    SchemeKind.UNSCENTED_TRANSFORM: _ut_builder,
    SchemeKind.GAUSSIAN_ESTIMATOR_N2: _ge_builder([-1.2245, 1.2245]),
    SchemeKind.GAUSSIAN_ESTIMATOR_N4: _ge_builder(
        [-1.4795, -0.5578, 0.5578, 1.4795]
    ),
}


def register_scheme(kind, builder: Callable[[int, SchemeConfig], _Geometry]):
    """Register a point selection scheme under a new kind key.

    The builder receives the input dimension and the scheme config and must
    return a _Geometry whose weighted points capture mean and covariance.
    """
    _BUILDERS[kind] = builder


def _geometry(scheme: SchemeConfig, n: int) -> _Geometry:
    try:
        builder = _BUILDERS[scheme.kind]
    except KeyError:
        raise InvalidInputError(f"unknown scheme kind: {scheme.kind!r}") from None
    return builder(n, scheme)


def _cholesky_roots(covs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance is not positive definite: {exc}") from exc


def _eigen_roots(covs: np.ndarray):
    # The regression solve divides by the spectrum, so a direction with no
    # spread at all is unusable, not repairable.
    lam, vec = np.linalg.eigh(covs)
    top = np.max(lam, axis=-1)
    if np.any(top <= 0.0) or np.any(lam <= 1e-12 * top[..., None]):
        raise NumericalError("covariance is singular or indefinite")
    return lam, vec


def _batched_root_and_solve(covs: np.ndarray, root_kind: str):
    """Matrix roots of a (K, n, n) stack plus a solver for (C^x)^-1 M.

    The solver reuses the factorization that generated the points rather
    than forming an explicit inverse.
    """
    if root_kind == "cholesky":
        roots = _cholesky_roots(covs)
        lower = np.swapaxes(roots, -1, -2)

        def solve(m: np.ndarray) -> np.ndarray:
            return np.linalg.solve(lower, np.linalg.solve(roots, m))

        return roots, solve

    if root_kind == "eigen":
        lam, vec = _eigen_roots(covs)
        roots = vec * np.sqrt(lam)[..., None, :]
        vec_t = np.swapaxes(vec, -1, -2)

        def solve(m: np.ndarray) -> np.ndarray:
            return vec @ (vec_t @ m / lam[..., :, None])

        return roots, solve

    raise InvalidInputError(f"unknown root kind: {root_kind!r}")


def _layout_points(means: np.ndarray, roots: np.ndarray, factors: np.ndarray):
    """Center first, then every root column at the first factor, and so on."""
    k, n = means.shape
    columns = np.swapaxes(roots, -1, -2)  # row l is the l-th root column
    offsets = factors[None, :, None, None] * columns[:, None, :, :]
    shifted = means[:, None, :] + offsets.reshape(k, -1, n)
    return np.concatenate([means[:, None, :], shifted], axis=1)


def _evaluate_batch(g_batch, flat_points: np.ndarray) -> np.ndarray:
    values = np.asarray(g_batch(flat_points), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2 or values.shape[0] != flat_points.shape[0]:
        raise InvalidInputError(
            "batched map must return one output row per input row, got "
            f"shape {values.shape} for {flat_points.shape[0]} points"
        )
    bad = ~np.all(np.isfinite(values), axis=1)
    if np.any(bad):
        point = flat_points[int(np.argmax(bad))]
        raise EvaluationError(
            f"map returned a non-finite value at point {point}", point=point
        )
    return values


@dataclass(frozen=True)
class _BatchLinearization:
    """Stacked linearizations of one map over many components at once."""

    G: np.ndarray  # (K, m, n)
    b: np.ndarray  # (K, m)
    y_mean: np.ndarray  # (K, m)
    y_cov: np.ndarray  # (K, m, m)
    xy_cross: np.ndarray  # (K, n, m)
    err_cov: np.ndarray  # (K, m, m)

    def component(self, k: int) -> Linearization:
        return Linearization(
            G=self.G[k],
            b=self.b[k],
            y_mean=self.y_mean[k],
            y_cov=self.y_cov[k],
            xy_cross=self.xy_cross[k],
            err_cov=self.err_cov[k],
        )


def _linearize_batch(
    g_batch, means: np.ndarray, covs: np.ndarray, scheme: SchemeConfig
) -> _BatchLinearization:
    """Regress g through every (mean, cov) pair in one vectorized pass.

    g_batch maps a (P, n) array of points to a (P, m) array of outputs;
    covariances are trusted to be valid here, callers validate.
    """
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    k, n = means.shape
    geometry = _geometry(scheme, n)
    weights = geometry.weights
    count = weights.size

    roots, solve = _batched_root_and_solve(covs, geometry.root_kind)
    points = _layout_points(means, roots, geometry.factors)
    values = _evaluate_batch(g_batch, points.reshape(k * count, n))
    outputs = values.reshape(k, count, -1)

    x_mean = np.einsum("i,kin->kn", weights, points)
    y_mean = np.einsum("i,kim->km", weights, outputs)
    dx = points - x_mean[:, None, :]
    dy = outputs - y_mean[:, None, :]
    x_cov = np.einsum("i,kin,kil->knl", weights, dx, dx)
    y_cov = np.einsum("i,kim,kil->kml", weights, dy, dy)
    xy_cross = np.einsum("i,kin,kim->knm", weights, dx, dy)

    gain_t = solve(xy_cross)  # (K, n, m) holding G^T
    gain = np.swapaxes(gain_t, -1, -2)
    b = y_mean - np.einsum("kmn,kn->km", gain, x_mean)
    err_cov = y_cov - gain @ x_cov @ gain_t
    err_cov = 0.5 * (err_cov + np.swapaxes(err_cov, -1, -2))
    return _BatchLinearization(gain, b, y_mean, y_cov, xy_cross, err_cov)


def _pointwise_batch(g) -> Callable[[np.ndarray], np.ndarray]:
    def g_batch(batch: np.ndarray) -> np.ndarray:
        rows = []
        for x in batch:
            value = np.asarray(g(x), dtype=float)
            rows.append(np.atleast_1d(value))
        return np.stack(rows)

    return g_batch


def regression_points(
    mean, cov, scheme: SchemeConfig = SchemeConfig()
) -> RegressionPointSet:
    """Deterministic weighted points matching the Gaussian's two moments."""
    mean = np.asarray(mean, dtype=float)
    if mean.ndim != 1 or mean.size == 0 or not np.all(np.isfinite(mean)):
        raise InvalidInputError("mean must be a finite 1-D vector")
    cov = _validated_cov(np.asarray(cov, dtype=float))
    if cov.shape[0] != mean.size:
        raise InvalidInputError("mean and covariance dimensions differ")
    geometry = _geometry(scheme, mean.size)
    roots, _ = _batched_root_and_solve(cov[None, :, :], geometry.root_kind)
    points = _layout_points(mean[None, :], roots, geometry.factors)[0]
    return RegressionPointSet(points=points, weights=geometry.weights)


def linearize(g, mean, cov, scheme: SchemeConfig = SchemeConfig()) -> Linearization:
    """Affine least-squares fit of g through the scheme's point set.

    g maps an (n,) vector to an (m,) vector (scalars are treated as m=1).
    """
    mean = np.asarray(mean, dtype=float)
    if mean.ndim != 1 or mean.size == 0 or not np.all(np.isfinite(mean)):
        raise InvalidInputError("mean must be a finite 1-D vector")
    cov = _validated_cov(np.asarray(cov, dtype=float))
    if cov.shape[0] != mean.size:
        raise InvalidInputError("mean and covariance dimensions differ")
    batch = _linearize_batch(_pointwise_batch(g), mean[None, :], cov[None, :, :], scheme)
    return batch.component(0)


def residual_at(lin: Linearization, g, x) -> np.ndarray:
    """Deviation of the nonlinear map from the affine surrogate at x."""
    x = np.asarray(x, dtype=float)
    value = np.atleast_1d(np.asarray(g(x), dtype=float))
    if not np.all(np.isfinite(value)):
        raise EvaluationError(
            f"map returned a non-finite value at point {x}", point=x
        )
    return value - (lin.G @ x + lin.b)


def error_trace(lin: Linearization) -> float:
    """Total linearization error, the trace of err_cov clamped at zero."""
    return max(float(np.trace(lin.err_cov)), 0.0)
