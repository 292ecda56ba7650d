"""Split-adaptive Gaussian mixture filtering on stacked state-noise spaces.

Each step stacks the state mixture with the relevant noise mixture,
statistically linearizes every joint component, splits components whose
linearization error is too large along the direction that accumulates
the most residual, pushes the refined mixture through per-component
Kalman algebra, and reduces the result back to a configured size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import reduction
from .errors import InvalidInputError, NumericalError
from .mixture_core import (
    _LOG_2PI,
    GaussianComponent,
    GaussianMixture,
    _frozen,
    _pairwise_integrals,
    eigendecompose,
)
from .splitting import (
    DEFAULT_SPLIT_LIBRARY,
    SplitLibrary,
    _direction_scores_impl,
    _scores_array,
)
from .statlin import (
    Linearization,
    SchemeConfig,
    _geometry,
    _linearize_batch,
    _pointwise_batch,
)

__all__ = [
    "POSTERIOR",
    "PREDICTED",
    "SPLITTING_ERROR_DRIVEN",
    "SPLITTING_WEIGHT_EIGEN",
    "FilterConfig",
    "FilterDiagnostics",
    "FilterState",
    "StateSpaceModel",
    "adapt",
    "joint_components",
    "predict",
    "update",
]

POSTERIOR = "posterior"
PREDICTED = "predicted"

# Likelihood floor below which an update is treated as degenerate.
_LOG_DEGENERATE = math.log(1e-300)


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete-time model x' = a(x, u, w), z = h(x, v).

    Both maps take stacked rows: ``system_fn`` receives a (P, state_dim)
    array of states, one input vector and a (P, noise_dim) array of noise
    values; ``measurement_fn`` receives states and measurement-noise rows.
    Noise enters as a normalized Gaussian mixture each, which is what makes
    non-Gaussian noise such as glint representable.
    """

    system_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    measurement_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    state_dim: int
    input_dim: int
    measurement_dim: int
    process_noise: GaussianMixture
    measurement_noise: GaussianMixture

    def __post_init__(self):
        if not callable(self.system_fn) or not callable(self.measurement_fn):
            raise InvalidInputError("system_fn and measurement_fn must be callable")
        for name in ("state_dim", "measurement_dim"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidInputError(f"{name} must be a positive integer")
        if not isinstance(self.input_dim, (int, np.integer)) or self.input_dim < 0:
            raise InvalidInputError("input_dim must be a nonnegative integer")
        for name in ("process_noise", "measurement_noise"):
            noise = getattr(self, name)
            if not isinstance(noise, GaussianMixture) or not noise.normalized:
                raise InvalidInputError(f"{name} must be a normalized GaussianMixture")

    @property
    def process_noise_dim(self) -> int:
        return self.process_noise.dim

    @property
    def measurement_noise_dim(self) -> int:
        return self.measurement_noise.dim


SPLITTING_ERROR_DRIVEN = "error"
SPLITTING_WEIGHT_EIGEN = "weight-eigen"


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds and scheme selection for one filter instance.

    ``reduce_pred`` and ``reduce_filt`` are the component budgets applied
    after prediction and after the measurement update; both default to
    ``l_max`` (no extra reduction beyond the split cap). ``splitting``
    chooses between error-driven adaptation and the non-adaptive
    largest-weight, largest-eigenvalue variant.
    """

    gamma: float = 0.5
    eps_max: float = 0.05
    l_max: int = 128
    d_max: float = 1.0
    reduce_pred: int | None = None
    reduce_filt: int | None = None
    scheme: SchemeConfig = SchemeConfig()
    split_library: SplitLibrary = DEFAULT_SPLIT_LIBRARY
    splitting: str = SPLITTING_ERROR_DRIVEN

    def __post_init__(self):
        if self.splitting not in (SPLITTING_ERROR_DRIVEN, SPLITTING_WEIGHT_EIGEN):
            raise InvalidInputError(
                f"splitting must be {SPLITTING_ERROR_DRIVEN!r} or "
                f"{SPLITTING_WEIGHT_EIGEN!r}, got {self.splitting!r}"
            )
        for name in ("gamma", "eps_max", "d_max"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and 0.0 <= value <= 1.0):
                raise InvalidInputError(f"{name} must lie in [0, 1], got {value}")
        if not isinstance(self.l_max, (int, np.integer)) or self.l_max < 1:
            raise InvalidInputError(f"l_max must be a positive integer, got {self.l_max}")
        for name in ("reduce_pred", "reduce_filt"):
            value = getattr(self, name)
            if value is None:
                object.__setattr__(self, name, int(self.l_max))
                continue
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidInputError(f"{name} must be a positive integer, got {value}")
            if value > self.l_max:
                raise InvalidInputError(f"{name} must not exceed l_max")


@dataclass(frozen=True)
class FilterDiagnostics:
    """Bookkeeping from the most recent predict or update call."""

    splits: int = 0
    epsilons: np.ndarray = field(default_factory=lambda: np.zeros(0))
    degenerate_update: bool = False

    def __post_init__(self):
        object.__setattr__(self, "epsilons", _frozen(np.asarray(self.epsilons, dtype=float)))


@dataclass(frozen=True)
class FilterState:
    """Immutable snapshot of the filter: a tagged, normalized density."""

    time_index: int
    density: GaussianMixture
    kind: str = POSTERIOR
    diagnostics: FilterDiagnostics = field(default_factory=FilterDiagnostics)

    def __post_init__(self):
        if self.kind not in (POSTERIOR, PREDICTED):
            raise InvalidInputError(f"kind must be {POSTERIOR!r} or {PREDICTED!r}")
        if not isinstance(self.time_index, (int, np.integer)) or self.time_index < 0:
            raise InvalidInputError("time_index must be a nonnegative integer")
        if not isinstance(self.density, GaussianMixture) or not self.density.normalized:
            raise InvalidInputError("density must be a normalized GaussianMixture")


def _joint_arrays(state_mixture: GaussianMixture, noise_mixture: GaussianMixture):
    """Weights, stacked means and block-diagonal covariances of the product.

    Component order is state-major: joint index s = i * L_noise + j.
    """
    wa, ma, ca = state_mixture.weights(), state_mixture.means(), state_mixture.covs()
    wb, mb, cb = noise_mixture.weights(), noise_mixture.means(), noise_mixture.covs()
    la, lb = wa.size, wb.size
    n, m = ma.shape[1], mb.shape[1]
    weights = np.multiply.outer(wa, wb).reshape(-1)
    means = np.concatenate(
        [np.repeat(ma, lb, axis=0), np.tile(mb, (la, 1))], axis=1
    )
    covs = np.zeros((la * lb, n + m, n + m))
    covs[:, :n, :n] = np.repeat(ca, lb, axis=0)
    covs[:, n:, n:] = np.tile(cb, (la, 1, 1))
    return weights, means, covs


def _materialize(weights, means, covs, normalized: bool = True) -> GaussianMixture:
    components = tuple(
        GaussianComponent(w, m, c) for w, m, c in zip(weights, means, covs)
    )
    return GaussianMixture(components, normalized=normalized)


def joint_components(
    state_mixture: GaussianMixture, noise_mixture: GaussianMixture
) -> GaussianMixture:
    """Cross product of two mixtures as one mixture over the stacked space.

    Weights multiply, means stack, covariances become block-diagonal;
    the state index varies slowest.
    """
    weights, means, covs = _joint_arrays(state_mixture, noise_mixture)
    return _materialize(
        weights,
        means,
        covs,
        normalized=state_mixture.normalized and noise_mixture.normalized,
    )


@dataclass
class _AdaptResult:
    """Arrays describing the post-split mixture and its linearizations."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    gains: np.ndarray
    offsets: np.ndarray
    y_means: np.ndarray
    y_covs: np.ndarray
    xy_crosses: np.ndarray
    err_covs: np.ndarray
    epsilons: np.ndarray
    splits: int


def _splice_symmetric(s: np.ndarray, idx: int, rows: np.ndarray, block: np.ndarray):
    """Replace row/column ``idx`` of a symmetric matrix with a new block."""
    k = s.shape[0]
    j = block.shape[0]
    keep = np.concatenate([np.arange(idx), np.arange(idx + 1, k)]).astype(int)
    new_keep = np.concatenate([np.arange(idx), np.arange(idx + j, k + j - 1)]).astype(int)
    out = np.empty((k + j - 1, k + j - 1))
    if keep.size:
        out[np.ix_(new_keep, new_keep)] = s[np.ix_(keep, keep)]
        out[np.ix_(np.arange(idx, idx + j), new_keep)] = rows
        out[np.ix_(new_keep, np.arange(idx, idx + j))] = rows.T
    out[idx : idx + j, idx : idx + j] = block
    return out


def _adapt_core(
    weights: np.ndarray,
    means: np.ndarray,
    covs: np.ndarray,
    g_batch,
    config: FilterConfig,
    trace: list | None = None,
) -> _AdaptResult:
    """Split-linearize loop over raw component arrays.

    Stopping rules, checked per iteration: (a) every component's
    selection score w^gamma (1 - exp(-eps))^(1-gamma) is already below
    eps_max, (b) one more component would exceed l_max, (c) committing the
    candidate split would push the deviation from the entry mixture above
    d_max. Only freshly split children are relinearized. The weight-eigen
    splitting mode swaps in weight-only selection and the largest-eigenvalue
    direction, and ignores rule (a) entirely. ``trace``, when given,
    collects the unit direction vector of every committed split.
    """
    weight_eigen = config.splitting == SPLITTING_WEIGHT_EIGEN
    select_by_weight = weight_eigen
    split_top_eigenvalue = weight_eigen
    use_error_rule = not weight_eigen
    weights = np.asarray(weights, dtype=float)
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    n = means.shape[1]

    lib = config.split_library
    lib_offsets = np.asarray(lib.offsets, dtype=float)
    lib_weights = np.asarray(lib.weights, dtype=float)
    lib_vars = np.asarray(lib.variances, dtype=float)

    batch = _linearize_batch(g_batch, means, covs, config.scheme)
    w_list = [float(w) for w in weights]
    m_list = list(means)
    c_list = list(covs)
    gain_list = list(batch.G)
    off_list = list(batch.b)
    ymean_list = list(batch.y_mean)
    ycov_list = list(batch.y_cov)
    cross_list = list(batch.xy_cross)
    err_list = list(batch.err_cov)
    eps_list = [max(float(np.trace(e)), 0.0) for e in err_list]

    geometry = _geometry(config.scheme, n)

    # Deviation tracking is only needed when d_max can actually bind; the
    # normalized ISD never exceeds 1, so d_max = 1 disables rule (c).
    track_isd = config.d_max < 1.0
    if track_isd:
        w0, m0, c0 = weights.copy(), means.copy(), covs.copy()
        base = _pairwise_integrals(w0, m0, c0, w0, m0, c0)
        e_00 = float(base.sum())
        s_mat = base.copy()
        pair_with_start = [float(v) for v in base.sum(axis=0)]
        e_0c = e_00
        e_cc = e_00

    splits = 0
    while True:
        w_arr = np.asarray(w_list)
        if use_error_rule:
            scores = _scores_array(w_arr, np.asarray(eps_list), config.gamma)
            if np.all(scores < config.eps_max):
                break
        if len(w_list) + 1 > config.l_max:
            break

        if select_by_weight:
            idx = int(np.argmax(w_arr))
        else:
            idx = int(np.argmax(scores))

        eig = eigendecompose(c_list[idx])
        if split_top_eigenvalue:
            direction = 0
        else:
            d = _direction_scores_impl(
                g_batch, m_list[idx], eig, gain_list[idx], off_list[idx], geometry
            )
            direction = int(np.argmax(d))
        lam = float(eig.eigenvalues[direction])
        if lam <= 0.0:
            # No direction with spread left; a point mass cannot be split.
            break
        vec = eig.eigenvectors[:, direction]

        child_w = w_list[idx] * lib_weights
        child_m = m_list[idx][None, :] + math.sqrt(lam) * lib_offsets[:, None] * vec[None, :]
        rank1 = np.outer(vec, vec)
        child_c = (
            c_list[idx][None, :, :]
            + lam * (lib_vars - 1.0)[:, None, None] * rank1[None, :, :]
        )

        if track_isd:
            keep = [k for k in range(len(w_list)) if k != idx]
            cr_child = _pairwise_integrals(
                w0, m0, c0, child_w, child_m, child_c
            ).sum(axis=0)
            if keep:
                w_oth = w_arr[keep]
                m_oth = np.asarray([m_list[k] for k in keep])
                c_oth = np.asarray([c_list[k] for k in keep])
                rows = _pairwise_integrals(child_w, child_m, child_c, w_oth, m_oth, c_oth)
            else:
                rows = np.zeros((child_w.size, 0))
            block = _pairwise_integrals(child_w, child_m, child_c, child_w, child_m, child_c)
            e_0c_new = e_0c - pair_with_start[idx] + float(cr_child.sum())
            e_cc_new = (
                e_cc
                - 2.0 * float(s_mat[idx, keep].sum())
                - float(s_mat[idx, idx])
                + 2.0 * float(rows.sum())
                + float(block.sum())
            )
            deviation = (e_00 - 2.0 * e_0c_new + e_cc_new) / (e_00 + e_cc_new)
            deviation = min(max(deviation, 0.0), 1.0)
            if deviation > config.d_max:
                break
            s_mat = _splice_symmetric(s_mat, idx, rows, block)
            pair_with_start[idx : idx + 1] = [float(v) for v in cr_child]
            e_0c, e_cc = e_0c_new, e_cc_new

        if trace is not None:
            trace.append(vec.copy())
        child_batch = _linearize_batch(g_batch, child_m, child_c, config.scheme)
        w_list[idx : idx + 1] = [float(w) for w in child_w]
        m_list[idx : idx + 1] = list(child_m)
        c_list[idx : idx + 1] = list(child_c)
        gain_list[idx : idx + 1] = list(child_batch.G)
        off_list[idx : idx + 1] = list(child_batch.b)
        ymean_list[idx : idx + 1] = list(child_batch.y_mean)
        ycov_list[idx : idx + 1] = list(child_batch.y_cov)
        cross_list[idx : idx + 1] = list(child_batch.xy_cross)
        err_list[idx : idx + 1] = list(child_batch.err_cov)
        eps_list[idx : idx + 1] = [
            max(float(np.trace(e)), 0.0) for e in child_batch.err_cov
        ]
        splits += 1

    return _AdaptResult(
        weights=np.asarray(w_list),
        means=np.asarray(m_list),
        covs=np.asarray(c_list),
        gains=np.asarray(gain_list),
        offsets=np.asarray(off_list),
        y_means=np.asarray(ymean_list),
        y_covs=np.asarray(ycov_list),
        xy_crosses=np.asarray(cross_list),
        err_covs=np.asarray(err_list),
        epsilons=np.asarray(eps_list),
        splits=splits,
    )


def adapt(
    joint: GaussianMixture, g, config: FilterConfig
) -> tuple[GaussianMixture, list[Linearization]]:
    """Refine a joint mixture by error-driven splitting.

    ``g`` maps one stacked point to the output vector. Returns the refined
    mixture together with one linearization per final component; when no
    split is warranted the mixture comes back with its original moments.
    """
    if not isinstance(joint, GaussianMixture) or not joint.normalized:
        raise InvalidInputError("adapt expects a normalized GaussianMixture")
    res = _adapt_core(
        joint.weights(), joint.means(), joint.covs(), _pointwise_batch(g), config
    )
    mixture = _materialize(res.weights, res.means, res.covs)
    linearizations = [
        Linearization(
            G=res.gains[k],
            b=res.offsets[k],
            y_mean=res.y_means[k],
            y_cov=res.y_covs[k],
            xy_cross=res.xy_crosses[k],
            err_cov=res.err_covs[k],
        )
        for k in range(res.weights.size)
    ]
    return mixture, linearizations


def predict(
    state: FilterState, u, model: StateSpaceModel, config: FilterConfig
) -> FilterState:
    """One prediction step: stack, adapt, propagate each component, reduce."""
    if state.kind != POSTERIOR:
        raise InvalidInputError("predict needs a posterior state")
    if state.density.dim != model.state_dim:
        raise InvalidInputError("state density dimension does not match the model")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (model.input_dim,) or not np.all(np.isfinite(u)):
        raise InvalidInputError(f"input must be a finite vector of length {model.input_dim}")

    n_x = model.state_dim
    jw, jm, jc = _joint_arrays(state.density, model.process_noise)

    def g_batch(points: np.ndarray) -> np.ndarray:
        return model.system_fn(points[:, :n_x], u, points[:, n_x:])

    res = _adapt_core(jw, jm, jc, g_batch, config)

    a_blk = res.gains[:, :, :n_x]
    b_blk = res.gains[:, :, n_x:]
    mean_p = (
        np.einsum("kij,kj->ki", a_blk, res.means[:, :n_x])
        + np.einsum("kij,kj->ki", b_blk, res.means[:, n_x:])
        + res.offsets
    )
    cxx = res.covs[:, :n_x, :n_x]
    cww = res.covs[:, n_x:, n_x:]
    cov_p = (
        np.einsum("kij,kjl,kml->kim", a_blk, cxx, a_blk)
        + np.einsum("kij,kjl,kml->kim", b_blk, cww, b_blk)
        + res.err_covs
    )
    cov_p = 0.5 * (cov_p + cov_p.transpose(0, 2, 1))

    mixture = _materialize(res.weights, mean_p, cov_p)
    reduced = reduction.reduce(mixture, config.reduce_pred)
    diagnostics = FilterDiagnostics(splits=res.splits, epsilons=res.epsilons)
    return FilterState(state.time_index + 1, reduced, PREDICTED, diagnostics)


def update(
    state: FilterState, z, model: StateSpaceModel, config: FilterConfig
) -> FilterState:
    """One measurement update: stack, adapt, correct each component, reduce.

    A degenerate update (every component likelihood under 1e-300) does not
    raise: the measurement is discarded, pre-update weights and means are
    kept with covariances doubled, and the diagnostics flag the step.
    """
    if state.kind != PREDICTED:
        raise InvalidInputError("update needs a predicted state")
    if state.density.dim != model.state_dim:
        raise InvalidInputError("state density dimension does not match the model")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (model.measurement_dim,) or not np.all(np.isfinite(z)):
        raise InvalidInputError(
            f"measurement must be a finite vector of length {model.measurement_dim}"
        )

    n_x = model.state_dim
    n_z = model.measurement_dim
    jw, jm, jc = _joint_arrays(state.density, model.measurement_noise)

    def g_batch(points: np.ndarray) -> np.ndarray:
        return model.measurement_fn(points[:, :n_x], points[:, n_x:])

    res = _adapt_core(jw, jm, jc, g_batch, config)

    h_blk = res.gains[:, :, :n_x]
    d_blk = res.gains[:, :, n_x:]
    mean_x = res.means[:, :n_x]
    cxx = res.covs[:, :n_x, :n_x]
    cvv = res.covs[:, n_x:, n_x:]
    z_hat = (
        np.einsum("kij,kj->ki", h_blk, mean_x)
        + np.einsum("kij,kj->ki", d_blk, res.means[:, n_x:])
        + res.offsets
    )
    s_cov = (
        np.einsum("kij,kjl,kml->kim", h_blk, cxx, h_blk)
        + np.einsum("kij,kjl,kml->kim", d_blk, cvv, d_blk)
        + res.err_covs
    )
    s_cov = 0.5 * (s_cov + s_cov.transpose(0, 2, 1))
    try:
        chol = np.linalg.cholesky(s_cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"innovation covariance not positive definite: {exc}") from exc

    hc = np.einsum("kij,kjl->kil", h_blk, cxx)
    gain = np.linalg.solve(
        chol.transpose(0, 2, 1), np.linalg.solve(chol, hc)
    ).transpose(0, 2, 1)

    innovation = z[None, :] - z_hat
    mean_e = mean_x + np.einsum("kij,kj->ki", gain, innovation)
    cov_e = cxx - np.einsum("kij,kjl->kil", gain, hc)
    cov_e = 0.5 * (cov_e + cov_e.transpose(0, 2, 1))

    white = np.linalg.solve(chol, innovation[:, :, None])[:, :, 0]
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    loglik = -0.5 * (np.sum(white**2, axis=1) + logdet + n_z * _LOG_2PI)

    with np.errstate(divide="ignore"):
        log_post = np.log(res.weights) + loglik
    peak = float(np.max(log_post))
    if float(np.max(loglik)) < _LOG_DEGENERATE or not np.isfinite(peak):
        mixture = _materialize(res.weights, mean_x, 2.0 * cxx)
        reduced = reduction.reduce(mixture, config.reduce_filt)
        diagnostics = FilterDiagnostics(
            splits=res.splits, epsilons=res.epsilons, degenerate_update=True
        )
        return FilterState(state.time_index, reduced, POSTERIOR, diagnostics)

    w = np.exp(log_post - peak)
    w /= w.sum()
    mixture = _materialize(w, mean_e, cov_e)
    reduced = reduction.reduce(mixture, config.reduce_filt)
    diagnostics = FilterDiagnostics(splits=res.splits, epsilons=res.epsilons)
    return FilterState(state.time_index, reduced, POSTERIOR, diagnostics)
