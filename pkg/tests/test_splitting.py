"""Component selection, direction scoring, and moment-preserving splits."""

import numpy as np
import pytest

from agmf import (
    GaussianComponent,
    GaussianMixture,
    InvalidInputError,
    Linearization,
    SchemeConfig,
    SchemeKind,
    eigendecompose,
    linearize,
    mixture_moments,
)
from agmf.splitting import (
    DEFAULT_SPLIT_LIBRARY,
    SplitLibrary,
    direction_scores,
    select_and_split,
    selection_scores,
    split_component,
)

UT = SchemeConfig(SchemeKind.UNSCENTED_TRANSFORM, kappa=0.5)
GE2 = SchemeConfig(SchemeKind.GAUSSIAN_ESTIMATOR_N2)
GE4 = SchemeConfig(SchemeKind.GAUSSIAN_ESTIMATOR_N4)
ALL_SCHEMES = (UT, GE2, GE4)


def _lin_with_err(err, n_in=1):
    """Hand-built linearization carrying a prescribed error covariance."""
    err = np.atleast_2d(np.asarray(err, dtype=float))
    m = err.shape[0]
    return Linearization(
        G=np.zeros((m, n_in)),
        b=np.zeros(m),
        y_mean=np.zeros(m),
        y_cov=err,
        xy_cross=np.zeros((n_in, m)),
        err_cov=err,
    )


def _true_direction_scores(g, lin, mean, cov):
    """Dense quadrature of the per-eigenvector residual accumulation."""
    eig = eigendecompose(cov)
    z = np.linspace(-8.0, 8.0, 20_001)
    pdf = np.exp(-0.5 * z**2) / np.sqrt(2.0 * np.pi)
    out = []
    for l in range(mean.size):
        pts = mean[None, :] + (np.sqrt(eig.eigenvalues[l]) * z)[:, None] * eig.eigenvectors[:, l]
        resid = np.stack([g(p) for p in pts]) - (pts @ lin.G.T + lin.b)
        out.append(np.trapezoid(pdf * np.sum(resid**2, axis=1), z))
    return np.array(out)


class TestSplitLibrary:
    def test_default_preserves_standard_moments(self):
        lib = DEFAULT_SPLIT_LIBRARY
        w = np.array(lib.weights)
        z = np.array(lib.offsets)
        s = np.array(lib.variances)
        assert abs(w.sum() - 1.0) < 1e-12
        assert abs(w @ z) < 1e-12
        assert abs(w @ (s + z**2) - 1.0) < 1e-12

    def test_bad_weight_sum_rejected(self):
        with pytest.raises(InvalidInputError):
            SplitLibrary(offsets=(-0.5, 0.5), weights=(0.6, 0.6), variances=(0.75, 0.75))

    def test_mean_shift_rejected(self):
        with pytest.raises(InvalidInputError):
            SplitLibrary(offsets=(0.5, 0.5), weights=(0.5, 0.5), variances=(0.75, 0.75))

    def test_variance_change_rejected(self):
        with pytest.raises(InvalidInputError):
            SplitLibrary(offsets=(-0.5, 0.5), weights=(0.5, 0.5), variances=(0.9, 0.9))


class TestSelectionScores:
    def _mixture(self, weights, dim=1):
        comps = tuple(
            GaussianComponent(w, np.zeros(dim), np.eye(dim)) for w in weights
        )
        return GaussianMixture(comps)

    def test_gamma_one_returns_weights(self):
        mix = self._mixture([0.7, 0.3])
        lins = [_lin_with_err([[0.2]]), _lin_with_err([[5.0]])]
        scores = selection_scores(mix, lins, gamma=1.0)
        assert scores[0].score == pytest.approx(0.7, abs=1e-12)
        assert scores[1].score == pytest.approx(0.3, abs=1e-12)

    def test_gamma_zero_returns_error_terms(self):
        mix = self._mixture([0.7, 0.3])
        lins = [_lin_with_err([[0.0]]), _lin_with_err([[2.0]])]
        scores = selection_scores(mix, lins, gamma=0.0)
        assert scores[0].score == pytest.approx(0.0, abs=1e-12)
        assert scores[1].score == pytest.approx(1.0 - np.exp(-2.0), rel=1e-12)

    def test_halfway_hand_value(self):
        mix = self._mixture([0.5, 0.5])
        lins = [_lin_with_err([[0.5]]), _lin_with_err([[0.5]])]
        scores = selection_scores(mix, lins, gamma=0.5)
        expected = np.sqrt(0.5 * (1.0 - np.exp(-0.5)))
        assert scores[0].score == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.4435, abs=5e-5)

    def test_epsilon_stored(self):
        mix = self._mixture([1.0])
        scores = selection_scores(mix, [_lin_with_err([[1.5]])], gamma=0.5)
        assert scores[0].epsilon == pytest.approx(1.5, rel=1e-12)
        assert scores[0].component_index == 0

    def test_score_range_and_monotonicity(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            gamma = rng.uniform(0.05, 0.95)
            w = rng.uniform(0.0, 1.0)
            eps = np.sort(rng.uniform(0.0, 5.0, size=2))
            mix = self._mixture([w, 1.0 - w])
            lo = selection_scores(mix, [_lin_with_err([[eps[0]]]), _lin_with_err([[0.0]])], gamma)
            hi = selection_scores(mix, [_lin_with_err([[eps[1]]]), _lin_with_err([[0.0]])], gamma)
            assert 0.0 <= lo[0].score <= 1.0
            if eps[1] > eps[0]:
                assert hi[0].score > lo[0].score
        # Fixed positive error, growing weight.
        mix_lo = self._mixture([0.2, 0.8])
        mix_hi = self._mixture([0.6, 0.4])
        lins = [_lin_with_err([[1.0]]), _lin_with_err([[1.0]])]
        assert (
            selection_scores(mix_hi, lins, 0.5)[0].score
            > selection_scores(mix_lo, lins, 0.5)[0].score
        )

    def test_count_mismatch_rejected(self):
        mix = self._mixture([1.0])
        with pytest.raises(InvalidInputError):
            selection_scores(mix, [], gamma=0.5)

    def test_gamma_out_of_range_rejected(self):
        mix = self._mixture([1.0])
        with pytest.raises(InvalidInputError):
            selection_scores(mix, [_lin_with_err([[1.0]])], gamma=1.5)


class TestDirectionScores:
    def test_affine_scores_zero(self):
        a = np.array([[1.0, -2.0], [0.5, 1.0]])

        def g(x):
            return a @ x + 1.0

        comp = GaussianComponent(1.0, np.zeros(2), np.diag([2.0, 1.0]))
        for scheme in ALL_SCHEMES:
            lin = linearize(g, comp.mean, comp.cov, scheme)
            d = direction_scores(comp, g, lin, scheme)
            assert np.all(np.abs(d) < 1e-18)

    def test_square_beats_constant_direction(self):
        # Residual of x1^2 varies along v1 but is constant along v2, so the
        # first direction must dominate; the dense quadrature oracle agrees.
        def g(x):
            return np.array([x[0] ** 2])

        comp = GaussianComponent(1.0, np.zeros(2), np.eye(2))
        for scheme in ALL_SCHEMES:
            lin = linearize(g, comp.mean, comp.cov, scheme)
            d = direction_scores(comp, g, lin, scheme)
            truth = _true_direction_scores(g, lin, comp.mean, comp.cov)
            assert d[0] > d[1]
            assert truth[0] > truth[1]

    def test_error_direction_beats_large_eigenvalue(self):
        # Cubic in the small-variance coordinate: the split direction must
        # follow the residual, not the eigenvalue ranking.
        def g(x):
            return np.array([x[1] ** 3])

        comp = GaussianComponent(1.0, np.zeros(2), np.diag([9.0, 1.0]))
        lin = linearize(g, comp.mean, comp.cov, GE4)
        d = direction_scores(comp, g, lin, GE4)
        truth = _true_direction_scores(g, lin, comp.mean, comp.cov)
        assert int(np.argmax(d)) == 1
        assert int(np.argmax(truth)) == 1

    def test_two_point_schemes_interpolate_centered_odd_residuals(self):
        # With two offsets per axis the probes of an axis-aligned component
        # coincide with the regression points, where the affine fit of an
        # odd map interpolates exactly: a centered pure cubic is invisible.
        # Any mean shift breaks the symmetry and restores the ranking.
        def g(x):
            return np.array([x[1] ** 3])

        centered = GaussianComponent(1.0, np.zeros(2), np.diag([9.0, 1.0]))
        shifted = GaussianComponent(1.0, np.array([0.0, 0.4]), np.diag([9.0, 1.0]))
        for scheme in (UT, GE2):
            lin = linearize(g, centered.mean, centered.cov, scheme)
            d = direction_scores(centered, g, lin, scheme)
            assert np.all(np.abs(d) < 1e-12)
        for scheme in ALL_SCHEMES:
            lin = linearize(g, shifted.mean, shifted.cov, scheme)
            d = direction_scores(shifted, g, lin, scheme)
            truth = _true_direction_scores(g, lin, shifted.mean, shifted.cov)
            assert int(np.argmax(d)) == int(np.argmax(truth)) == 1

    def test_inactive_coordinate_scores_constant_residual_only(self):
        # The x2 coordinate is exactly linear, so along the larger
        # eigenvalue direction (the x2 axis) only the constant residual
        # offset remains and the cosine direction must win.
        def g(x):
            return np.array([np.cos(x[0]) + x[1]])

        comp = GaussianComponent(1.0, np.zeros(2), np.diag([1.0, 4.0]))
        for scheme in ALL_SCHEMES:
            lin = linearize(g, comp.mean, comp.cov, scheme)
            d = direction_scores(comp, g, lin, scheme)
            truth = _true_direction_scores(g, lin, comp.mean, comp.cov)
            assert int(np.argmax(d)) == int(np.argmax(truth)) == 1

    def test_zero_variance_direction_excluded(self):
        def g(x):
            return np.array([x[0] ** 2 + x[1] ** 2])

        comp = GaussianComponent(1.0, np.zeros(2), np.diag([1.0, 0.0]))
        lin = Linearization(
            G=np.zeros((1, 2)),
            b=np.ones(1),
            y_mean=np.ones(1),
            y_cov=np.array([[2.0]]),
            xy_cross=np.zeros((2, 1)),
            err_cov=np.array([[2.0]]),
        )
        d = direction_scores(comp, g, lin, UT)
        assert d[1] == -np.inf
        assert np.isfinite(d[0])

    def test_quadrature_match_for_low_degree_residuals(self):
        # With kappa = 2 the three transform points integrate polynomials
        # up to degree five exactly, so squared residuals of degree <= 2
        # maps match the dense quadrature well within the 25% documented
        # approximation band.
        scheme = SchemeConfig(SchemeKind.UNSCENTED_TRANSFORM, kappa=2.0)
        rng = np.random.default_rng(29)
        for _ in range(20):
            coeff = rng.normal(size=3)

            def g(x, c=coeff):
                return np.array([c[0] + c[1] * x[0] + c[2] * x[0] ** 2])

            mean = rng.normal(size=1)
            var = rng.uniform(0.4, 3.0)
            comp = GaussianComponent(1.0, mean, [[var]])
            lin = linearize(g, comp.mean, comp.cov, scheme)
            d = direction_scores(comp, g, lin, scheme)
            truth = _true_direction_scores(g, lin, comp.mean, comp.cov)
            if truth[0] > 1e-12:
                assert abs(d[0] - truth[0]) / truth[0] < 0.25


class TestSplitComponent:
    def test_axis_aligned_hand_values(self):
        comp = GaussianComponent(1.0, np.zeros(2), np.diag([4.0, 1.0]))
        eig = eigendecompose(comp.cov)
        children = split_component(comp, 0, eig)
        assert len(children) == 2
        assert children[0].weight == pytest.approx(0.5)
        assert children[1].weight == pytest.approx(0.5)
        assert np.allclose(children[0].mean, [-1.0, 0.0])
        assert np.allclose(children[1].mean, [1.0, 0.0])
        for child in children:
            assert np.allclose(child.cov, np.diag([3.0, 1.0]))

    def test_standard_univariate_split(self):
        comp = GaussianComponent(1.0, np.zeros(1), np.eye(1))
        children = split_component(comp, 0, eigendecompose(comp.cov))
        assert np.allclose([c.mean[0] for c in children], [-0.5, 0.5])
        assert np.allclose([c.cov[0, 0] for c in children], [0.75, 0.75])
        assert np.allclose([c.weight for c in children], [0.5, 0.5])

    def test_identity_library_returns_input(self):
        identity = SplitLibrary(offsets=(0.0,), weights=(1.0,), variances=(1.0,))
        comp = GaussianComponent(0.4, np.array([1.0, 2.0]), np.diag([2.0, 1.0]))
        children = split_component(comp, 0, eigendecompose(comp.cov), identity)
        assert len(children) == 1
        assert children[0].weight == pytest.approx(0.4)
        assert np.allclose(children[0].mean, comp.mean)
        assert np.allclose(children[0].cov, comp.cov)

    def test_moment_preservation_random(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            n = rng.integers(1, 5)
            a = rng.normal(size=(n, n))
            comp = GaussianComponent(
                rng.uniform(0.1, 1.0), rng.normal(size=n), a @ a.T + 0.2 * np.eye(n)
            )
            eig = eigendecompose(comp.cov)
            direction = int(rng.integers(0, n))
            children = split_component(comp, direction, eig)
            assert sum(c.weight for c in children) == pytest.approx(
                comp.weight, abs=1e-12
            )
            sub = GaussianMixture(tuple(children), normalized=False)
            mean, cov = mixture_moments(sub)
            assert np.all(np.abs(mean - comp.mean) < 1e-10)
            assert np.all(np.abs(cov - comp.cov) < 1e-10)

    def test_children_shrink_along_direction(self):
        comp = GaussianComponent(1.0, np.zeros(3), np.diag([5.0, 2.0, 1.0]))
        eig = eigendecompose(comp.cov)
        children = split_component(comp, 0, eig)
        v = eig.eigenvectors[:, 0]
        for child in children:
            assert v @ child.cov @ v < eig.eigenvalues[0]

    def test_zero_variance_direction_rejected(self):
        comp = GaussianComponent(1.0, np.zeros(2), np.diag([1.0, 0.0]))
        with pytest.raises(InvalidInputError):
            split_component(comp, 1, eigendecompose(comp.cov))


class TestSelectAndSplit:
    def test_weighted_error_tradeoff_hand_example(self):
        comps = (
            GaussianComponent(0.9, np.zeros(1), np.eye(1)),
            GaussianComponent(0.1, np.array([3.0]), np.eye(1)),
        )
        mix = GaussianMixture(comps)
        lins = [_lin_with_err([[0.01]]), _lin_with_err([[3.0]])]
        new_mix, index, direction = select_and_split(
            mix, lins, lambda x: x**2, gamma=0.5, scheme=UT
        )
        assert index == 1
        assert direction == 0
        assert len(new_mix) == 3
        # Children replace the parent in place.
        assert new_mix.components[0] is comps[0]
        assert new_mix.components[1].weight == pytest.approx(0.05)

    def test_tie_breaks_to_lowest_index(self):
        comps = (
            GaussianComponent(0.5, np.zeros(1), np.eye(1)),
            GaussianComponent(0.5, np.array([5.0]), np.eye(1)),
        )
        mix = GaussianMixture(comps)
        lins = [_lin_with_err([[1.0]]), _lin_with_err([[1.0]])]
        _, index, _ = select_and_split(mix, lins, lambda x: x**2, gamma=1.0)
        assert index == 0

    def test_direction_tie_prefers_larger_eigenvalue_order(self):
        # Isotropic residual: both directions tie, the first (largest
        # eigenvalue, lowest index) must win.
        def g(x):
            return np.array([x[0] ** 2 + x[1] ** 2])

        comp = GaussianComponent(1.0, np.zeros(2), np.eye(2))
        lin = linearize(g, comp.mean, comp.cov, UT)
        mix = GaussianMixture((comp,))
        _, _, direction = select_and_split(mix, [lin], g, gamma=0.5, scheme=UT)
        assert direction == 0

    def test_moments_preserved_through_split(self):
        def g(x):
            return np.array([x[0] ** 2])

        comps = (
            GaussianComponent(0.6, np.array([0.5, 1.0]), np.diag([2.0, 1.0])),
            GaussianComponent(0.4, np.array([-1.0, 0.0]), np.eye(2)),
        )
        mix = GaussianMixture(comps)
        lins = [linearize(g, c.mean, c.cov, UT) for c in comps]
        before = mixture_moments(mix)
        new_mix, _, _ = select_and_split(mix, lins, g, gamma=0.5, scheme=UT)
        after = mixture_moments(new_mix)
        assert np.all(np.abs(before[0] - after[0]) < 1e-10)
        assert np.all(np.abs(before[1] - after[1]) < 1e-10)
