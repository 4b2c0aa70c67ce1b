import numpy as np
import pytest
from scipy.optimize import approx_fprime
from scipy.stats import gamma as gamma_dist

from confsel.core import Dataset
from confsel.models import (Basis, ForestParams, GammaRegressionModel, LinearQuantileModel,
                            RankDeficientError, fit_boosted_stumps, fit_forest, fit_gamma_glm,
                            fit_gaussian_lm, fit_logistic, fit_mixture_lm, fit_quantile_forest,
                            gamma_loglik, gamma_score, load_model, logistic_loglik,
                            logistic_score, marginal_correlations, model_from_dict,
                            pinball_loss, save_model, sis_screen)
from confsel.models.mixture import EMMonotonicityError, _em_run


def _lin(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    return Dataset(X, 1.0 + X @ [2.0, -1.0] + 0.5 * rng.normal(size=n))


class TestBasis:
    def test_design_and_names(self):
        b = Basis.linear(2).plus(((0, 2),), ((0, 1), (1, 1)))
        Z = b.design([[2.0, 3.0]])
        np.testing.assert_array_equal(Z, [[1, 2, 3, 4, 6]])
        assert b.names == ["1", "x1", "x2", "x1^2", "x1*x2"]
        assert Basis.from_list(b.to_list()) == b

    def test_rank_error_names_columns(self):
        X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
        with pytest.raises(RankDeficientError, match="x"):
            fit_gaussian_lm(Dataset(X, np.arange(10.0)))


class TestLinear:
    def test_ols_recovers(self):
        m, rep = fit_gaussian_lm(_lin(2000))
        np.testing.assert_allclose(m.coef, [1, 2, -1], atol=0.05)
        assert m.sigma == pytest.approx(0.5, abs=0.03) and rep.converged

    def test_cdf_shapes(self):
        m, _ = fit_gaussian_lm(_lin())
        X = np.zeros((3, 2))
        assert m.cdf(np.zeros(3), X).shape == (3,)
        assert m.cdf(np.zeros((3, 4)), X).shape == (3, 4)

    @pytest.mark.parametrize("seed", range(5))
    def test_logistic_gradient(self, seed):
        rng = np.random.default_rng(seed)
        Z = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
        lab = (rng.uniform(size=50) < 0.4).astype(float)
        beta = rng.normal(size=3)
        fd = approx_fprime(beta, lambda b: logistic_loglik(b, Z, lab), 1e-6)
        np.testing.assert_allclose(logistic_score(beta, Z, lab), fd, rtol=1e-4, atol=1e-6)

    def test_logistic_weights(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(4000, 1))
        lab = (rng.uniform(size=4000) < 1 / (1 + np.exp(-(0.3 + X[:, 0])))).astype(float)
        wm, rep = fit_logistic(X, lab)
        assert wm.coef[1] == pytest.approx(1.0, abs=0.1)
        n1 = lab.sum()
        np.testing.assert_allclose(wm([[0.0]]), np.exp(wm.coef[0]) * (4000 - n1) / n1)
        assert not rep.flags["ridge"]

    def test_logistic_separation_uses_ridge(self):
        X = np.arange(20.0)[:, None]
        wm, rep = fit_logistic(X, (X[:, 0] > 9.5).astype(float))
        assert rep.flags["ridge"] and np.all(np.isfinite(wm(X)))

    def test_pinball(self):
        assert pinball_loss([1.0, -2.0], 0.25) == pytest.approx(0.25 + 1.5)

    def test_quantile_monotone_and_calibrated(self):
        d = _lin(400, 2)
        qm = LinearQuantileModel(d)
        Q = qm.predict_quantiles(d.X, [0.1, 0.5, 0.9])
        assert np.all(np.diff(Q, axis=1) >= 0)
        assert np.mean(d.y <= Q[:, 2]) == pytest.approx(0.9, abs=0.02)


class TestMixture:
    def _data(self, seed, n=400):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-1, 1, size=(n, 1))
        z = rng.uniform(size=n) < 0.5
        y = np.where(z, 3 * X[:, 0], -3 * X[:, 0]) + 0.3 * rng.normal(size=n)
        return Dataset(X, y)

    @pytest.mark.parametrize("seed", range(3))
    def test_em_monotone_and_recovers(self, seed):
        m, rep = fit_mixture_lm(self._data(seed), restarts=5, seed=seed)
        assert np.all(np.diff(rep.trace) >= -1e-8 * np.abs(rep.trace[:-1]))
        assert sorted(np.round(m.coefs[:, 1])) == [-3.0, 3.0]
        assert m.weights.sum() == pytest.approx(1.0)

    def test_monotonicity_guard_fires(self, monkeypatch):
        import confsel.models.mixture as mx
        real = mx._e_step
        calls = {"n": 0}

        def worse(*a):
            resp, ll = real(*a)
            calls["n"] += 1
            return resp, ll - calls["n"]  # artificially decreasing

        monkeypatch.setattr(mx, "_e_step", worse)
        d = self._data(0, 100)
        Z = Basis.linear(1).design(d.X)
        resp = np.full((100, 2), 0.5)
        resp[:50, 0] = 0.9
        resp[:50, 1] = 0.1
        with pytest.raises(EMMonotonicityError):
            _em_run(Z, d.y, resp, True, 50, 0.0, True)

    def test_needs_two_components(self):
        with pytest.raises(ValueError):
            fit_mixture_lm(self._data(0), components=1)


class TestGamma:
    def _data(self, seed, n=1000):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-1, 1, size=(n, 2))
        scale = np.exp(0.2 + 0.5 * X[:, 0] - 0.3 * X[:, 1])
        return Dataset(X, rng.gamma(4.0, scale))

    @pytest.mark.parametrize("seed", range(5))
    def test_score_matches_finite_difference(self, seed):
        d = self._data(seed, 60)
        Z = Basis.linear(2).design(d.X)
        p = np.random.default_rng(seed).normal(scale=0.3, size=4)
        fd = approx_fprime(p, lambda q: gamma_loglik(q, Z, d.y), 1e-7)
        np.testing.assert_allclose(gamma_score(p, Z, d.y), fd, rtol=1e-4, atol=1e-5)

    def test_recovers(self):
        m, rep = fit_gamma_glm(self._data(1, 4000))
        assert rep.converged
        np.testing.assert_allclose(m.coef, [0.2, 0.5, -0.3], atol=0.06)
        assert m.shape == pytest.approx(4.0, rel=0.1)

    def test_cdf_matches_scipy(self):
        m = GammaRegressionModel([0.1, 0.2], 3.0, Basis.linear(1))
        X = np.array([[0.5]])
        s = np.exp(0.1 + 0.1)
        assert m.cdf(np.array([2.0]), X)[0] == pytest.approx(gamma_dist.cdf(2.0, 3.0, scale=s))

    def test_positive_outcomes_required(self):
        with pytest.raises(ValueError, match="positive"):
            fit_gamma_glm(Dataset(np.ones((2, 1)) * [[1], [2]], [1.0, 0.0]))


class TestForests:
    def test_forest_sigma_and_roundtrip(self, tmp_path):
        d = _lin(300)
        m, rep = fit_forest(d, n_trees=20, min_leaf=5, seed=0)
        assert rep.flags["oob_r2"] > 0.5
        save_model(m, tmp_path / "f.json")
        back = load_model(tmp_path / "f.json")
        np.testing.assert_allclose(back.mean(d.X[:20]), m.mean(d.X[:20]), rtol=1e-12)
        assert back.sigma == m.sigma

    def test_quantile_forest_monotone_and_roundtrip(self):
        d = _lin(300)
        qf, _ = fit_quantile_forest(d, n_trees=20, seed=1)
        Q = qf.predict_quantiles(d.X[:30], np.linspace(0.1, 0.9, 9))
        assert np.all(np.diff(Q, axis=1) >= 0)
        back = model_from_dict(qf.to_dict())
        np.testing.assert_array_equal(back.predict_quantiles(d.X[:30], [0.3, 0.7]),
                                      qf.predict_quantiles(d.X[:30], [0.3, 0.7]))

    def test_forest_params_validated(self):
        with pytest.raises(ValueError):
            ForestParams(n_trees=0)

    def test_boosted_stumps_loss_decreases(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(300, 2))
        lab = (X[:, 0] + rng.normal(size=300) > 0).astype(int)
        wm, rep = fit_boosted_stumps(X, lab, rounds=30)
        assert rep.trace[-1] < rep.trace[0]
        w = wm(X)
        assert np.all(w > 0) and np.corrcoef(w, X[:, 0])[0, 1] > 0.5


class TestSerialization:
    def test_roundtrips(self, tmp_path):
        d = _lin()
        lm, _ = fit_gaussian_lm(d)
        mix, _ = fit_mixture_lm(d, restarts=2)
        ga = GammaRegressionModel([0.1, 0.2, 0.3], 2.0, Basis.linear(2))
        y = np.abs(d.y[:10]) + 0.1
        for m in (lm, mix, ga):
            save_model(m, tmp_path / "m.json")
            back = load_model(tmp_path / "m.json")
            np.testing.assert_array_equal(back.cdf(y, d.X[:10]), m.cdf(y, d.X[:10]))

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="unknown model family"):
            model_from_dict({"family": "nope"})


class TestScreening:
    def test_keeps_signal_columns(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(500, 10))
        d = Dataset(X, 3 * X[:, 4] - 2 * X[:, 7] + rng.normal(size=500))
        np.testing.assert_array_equal(sis_screen(d, 2), [4, 7])

    def test_constant_column_zero(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        np.testing.assert_allclose(marginal_correlations(X, np.arange(5.0)), [0.0, 1.0], rtol=1e-12)

    def test_full_keep_identity(self):
        np.testing.assert_array_equal(sis_screen(_lin(), 2), [0, 1])

    def test_bad_keep(self):
        with pytest.raises(ValueError):
            sis_screen(_lin(), 0)
