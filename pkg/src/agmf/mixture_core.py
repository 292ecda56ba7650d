"""Gaussian mixture value types and density algebra.

Components and mixtures are immutable after construction. Covariances are
symmetrized on construction and must be positive semi-definite within a
small relative tolerance; slightly negative eigenvalues (roundoff) are
clamped to zero, anything worse is an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalError

# Relative tolerance for PSD validation: eigenvalues in
# [-PSD_REPAIR_RTOL * lambda_max, 0) are clamped to 0.
PSD_REPAIR_RTOL = 1e-8

# Condition number beyond which a covariance is treated as singular
# for density evaluation.
SINGULAR_COND = 1e12

# |sum of weights - 1| tolerance for mixtures flagged as normalized.
NORMALIZATION_ATOL = 1e-9

_LOG_2PI = float(np.log(2.0 * np.pi))


def _symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def _validated_cov(cov: np.ndarray) -> np.ndarray:
    """Symmetrize, then clamp tiny negative eigenvalues to zero.

    Returns the repaired matrix. Raises NumericalError if the matrix is
    indefinite beyond the repair tolerance.
    """
    sym = _symmetrize(np.asarray(cov, dtype=float))
    eigvals = np.linalg.eigvalsh(sym)
    lo, hi = eigvals[0], eigvals[-1]
    if hi < 0.0 or lo < -PSD_REPAIR_RTOL * max(hi, 0.0):
        raise NumericalError(
            f"covariance is not PSD: eigenvalue range [{lo:.3e}, {hi:.3e}]"
        )
    if lo < 0.0:
        lam, vec = np.linalg.eigh(sym)
        sym = _symmetrize((vec * np.maximum(lam, 0.0)) @ vec.T)
    return sym


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian: ``weight * N(mean, cov)``."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        w = float(self.weight)
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if not np.isfinite(w) or w < 0.0:
            raise InvalidInputError(f"weight must be finite and >= 0, got {w}")
        if mean.ndim != 1 or not np.all(np.isfinite(mean)):
            raise InvalidInputError("mean must be a finite vector")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise InvalidInputError(
                f"cov shape {cov.shape} does not match state dimension {n}"
            )
        if not np.all(np.isfinite(cov)):
            raise InvalidInputError("cov must have finite entries")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(_validated_cov(cov)))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class GaussianMixture:
    """An ordered collection of Gaussian components over a common space.

    ``normalized`` records whether the weights sum to one; intermediate
    products of filter steps may legitimately carry unnormalized weights.
    """

    components: tuple[GaussianComponent, ...]
    normalized: bool = True

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidInputError("mixture needs at least one component")
        dim = comps[0].dim
        if any(c.dim != dim for c in comps):
            raise InvalidInputError("all components must share one dimension")
        if self.normalized:
            total = sum(c.weight for c in comps)
            if abs(total - 1.0) > NORMALIZATION_ATOL:
                raise InvalidInputError(
                    f"mixture flagged normalized but weights sum to {total!r}"
                )
        object.__setattr__(self, "components", comps)

    def __len__(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    def covs(self) -> np.ndarray:
        return np.array([c.cov for c in self.components])

    def normalize(self) -> "GaussianMixture":
        """Return a copy whose weights sum to one."""
        total = sum(c.weight for c in self.components)
        if total <= 0.0:
            raise NumericalError("cannot normalize a mixture with zero mass")
        comps = tuple(
            GaussianComponent(c.weight / total, c.mean, c.cov)
            for c in self.components
        )
        return GaussianMixture(comps, normalized=True)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (nonincreasing, nonnegative) and orthonormal
    eigenvector columns of a covariance matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))
        object.__setattr__(self, "eigenvectors", _frozen(self.eigenvectors))


def eigendecompose(cov: np.ndarray) -> EigenDecomposition:
    """Deterministic symmetric eigendecomposition with PSD repair.

    Eigenvalues are sorted nonincreasing (ties keep LAPACK order).
    Eigenvalues in ``[-PSD_REPAIR_RTOL * lambda_max, 0)`` are clamped to 0,
    more negative ones raise NumericalError. Each eigenvector is flipped,
    if needed, so its first nonzero entry is positive.
    """
    sym = _symmetrize(np.asarray(cov, dtype=float))
    if not np.all(np.isfinite(sym)):
        raise InvalidInputError("cov must have finite entries")
    lam, vec = np.linalg.eigh(sym)
    hi = lam[-1]
    if hi < 0.0 or lam[0] < -PSD_REPAIR_RTOL * max(hi, 0.0):
        raise NumericalError(
            f"covariance is not PSD: eigenvalue range [{lam[0]:.3e}, {hi:.3e}]"
        )
    lam = np.maximum(lam, 0.0)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    vec = vec[:, order].copy()
    for k in range(vec.shape[1]):
        col = vec[:, k]
        scale = np.abs(col).max()
        nz = np.flatnonzero(np.abs(col) > 1e-12 * scale)
        if nz.size and col[nz[0]] < 0.0:
            vec[:, k] = -col
    return EigenDecomposition(lam, vec)


def mixture_moments(mixture: GaussianMixture) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the (normalized) mixture density.

    Weights are normalized internally, so the result for a sub-mixture
    (for example two split children carrying their parent's mass) is the
    moment pair of that sub-density.
    """
    w = mixture.weights()
    total = w.sum()
    if total <= 0.0:
        raise NumericalError("mixture has zero total mass")
    w = w / total
    means = mixture.means()
    covs = mixture.covs()
    mean = w @ means
    diff = means - mean
    cov = np.einsum("i,ijk->jk", w, covs) + (w[:, None] * diff).T @ diff
    return mean, _symmetrize(cov)


def _chol_with_cond_check(cov: np.ndarray) -> np.ndarray:
    eigvals = np.linalg.eigvalsh(cov)
    lo, hi = eigvals[0], eigvals[-1]
    if hi <= 0.0 or lo <= 0.0 or hi / lo > SINGULAR_COND:
        raise NumericalError(
            f"covariance is singular for density evaluation (cond > {SINGULAR_COND:.0e})"
        )
    return np.linalg.cholesky(cov)


def _logpdf_batch(x: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Log N(x; mean, L L^T) for a batch of row vectors x."""
    diff = np.atleast_2d(x) - mean
    # Solve L z = diff^T by forward substitution; np.linalg.solve on the
    # triangular factor is exact and keeps numpy the only dependency.
    z = np.linalg.solve(chol, diff.T)
    quad = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    n = mean.shape[0]
    return -0.5 * (quad + logdet + n * _LOG_2PI)


def evaluate_density(mixture: GaussianMixture, x: np.ndarray) -> float:
    """Mixture density at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (mixture.dim,):
        raise InvalidInputError(
            f"point has shape {x.shape}, expected ({mixture.dim},)"
        )
    total = 0.0
    for c in mixture.components:
        chol = _chol_with_cond_check(c.cov)
        total += c.weight * float(np.exp(_logpdf_batch(x, c.mean, chol))[0])
    return total


def evaluate_density_batch(mixture: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """Mixture density at each row of ``x``; one Cholesky per component."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != mixture.dim:
        raise InvalidInputError(
            f"points have dimension {x.shape[1]}, expected {mixture.dim}"
        )
    total = np.zeros(x.shape[0])
    for c in mixture.components:
        chol = _chol_with_cond_check(c.cov)
        total += c.weight * np.exp(_logpdf_batch(x, c.mean, chol))
    return total


def gaussian_product_integral(
    a: GaussianComponent, b: GaussianComponent
) -> float:
    """Integral of the product of two weighted Gaussians.

    Closed form: ``w_a w_b N(mean_a; mean_b, cov_a + cov_b)``. Underflows
    to 0.0 for components that are far apart, which is the correct limit.
    """
    if a.dim != b.dim:
        raise InvalidInputError("components live in different dimensions")
    s = a.cov + b.cov
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("sum of covariances is singular") from exc
    log_val = _logpdf_batch(a.mean, b.mean, chol)[0]
    return a.weight * b.weight * float(np.exp(log_val))


def _pairwise_integrals(
    wa: np.ndarray, ma: np.ndarray, ca: np.ndarray,
    wb: np.ndarray, mb: np.ndarray, cb: np.ndarray,
) -> np.ndarray:
    """Matrix of product integrals between two component stacks."""
    la, lb = wa.shape[0], wb.shape[0]
    n = ma.shape[1]
    s = ca[:, None, :, :] + cb[None, :, :, :]
    diff = ma[:, None, :] - mb[None, :, :]
    flat_s = s.reshape(la * lb, n, n)
    try:
        chol = np.linalg.cholesky(flat_s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("sum of covariances is singular") from exc
    z = np.linalg.solve(chol, diff.reshape(la * lb, n, 1))
    quad = np.sum(z[..., 0] ** 2, axis=1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    log_norm = -0.5 * (quad + logdet + n * _LOG_2PI)
    vals = np.exp(log_norm).reshape(la, lb)
    return wa[:, None] * wb[None, :] * vals


def normalized_isd(f: GaussianMixture, g: GaussianMixture) -> float:
    """Integral squared difference of two mixtures, normalized to [0, 1].

    ``D = int (f-g)^2 / (int f^2 + int g^2)``; 0 for identical densities,
    1 in the limit of disjoint support. Computed in closed form from
    pairwise Gaussian product integrals and clamped to [0, 1].
    """
    if f.dim != g.dim:
        raise InvalidInputError("mixtures live in different dimensions")
    wf, mf, cf = f.weights(), f.means(), f.covs()
    wg, mg, cg = g.weights(), g.means(), g.covs()
    e_ff = _pairwise_integrals(wf, mf, cf, wf, mf, cf).sum()
    e_gg = _pairwise_integrals(wg, mg, cg, wg, mg, cg).sum()
    e_fg = _pairwise_integrals(wf, mf, cf, wg, mg, cg).sum()
    den = e_ff + e_gg
    if den <= 0.0:
        raise NumericalError("both mixtures have zero energy")
    return float(np.clip((e_ff - 2.0 * e_fg + e_gg) / den, 0.0, 1.0))
