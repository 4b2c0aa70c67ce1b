import numpy as np
import pytest

from confsel.core import Dataset
from confsel.engine import error_fn, power_fn
from confsel.models import Basis, fit_gaussian_lm
from confsel.powermax import (ParamSearchSpace, fit_ensemble_weights, linear_gaussian_family,
                              maximize_power, plugin_space, profile_eta)

from oracles import brute_eta, brute_power


def _data(n=300, seed=0, beta=(1.0, -0.5), noise=1.0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, len(beta)))
    y = X @ np.asarray(beta) + noise * rng.normal(size=n)
    return Dataset(X, y)


def _family(dim=2, intercept=0.0, sigma=1.0):
    return linear_gaussian_family(Basis.linear(dim), intercept, sigma)


def _profiled_power(theta, d, c, target, fam):
    m = fam.build(np.asarray(theta, float))
    F = m.cdf(np.full(d.n, c), d.X)
    r = F / (1 - F)
    null = d.y <= c
    eta = brute_eta(r, null, np.ones(d.n), target)
    return 0.0 if eta < 0 else float(brute_power(r, null, np.ones(d.n), eta))


class TestSearchSpace:
    def test_validation(self):
        fam = _family()
        with pytest.raises(ValueError, match="dimensions"):
            ParamSearchSpace(fam, [0], [1], [0])
        with pytest.raises(ValueError, match="exceeds"):
            ParamSearchSpace(fam, [1, 1], [0, 2], [1, 1])
        with pytest.raises(ValueError, match="outside"):
            ParamSearchSpace(fam, [0, 0], [1, 1], [2, 0])
        with pytest.raises(ValueError, match="finite"):
            ParamSearchSpace(fam, [0, -np.inf], [1, 1], [0, 0])

    def test_around_contains_centre(self):
        sp = ParamSearchSpace.around(_family(), [1.0, -2.0])
        assert np.all(sp.lower < [1.0, -2.0]) and np.all(sp.upper > [1.0, -2.0])


class TestMaximizePower:
    def test_degenerate_box_is_profile(self):
        d = _data()
        fam = _family()
        th = np.array([0.8, -0.3])
        sp = ParamSearchSpace(fam, th, th, th)
        res = maximize_power(d, 0.5, 0.2, sp)
        np.testing.assert_array_equal(res.theta_hat, th)
        assert res.eta_hat == profile_eta(th, d, 0.5, 0.2, fam)
        model = fam.build(th)
        assert res.achieved_power == pytest.approx(power_fn(d, model, 0.5, res.eta_hat))
        assert res.achieved_error == pytest.approx(error_fn(d, model, 0.5, res.eta_hat))

    def test_beats_brute_scan(self):
        d = _data(n=200, seed=3)
        fam = _family()
        sp = ParamSearchSpace(fam, [-2, -2], [2, 2], [[0.1, 0.1]])
        res = maximize_power(d, 0.5, 0.2, sp, starts=16, seed=1)
        angles = np.linspace(0, 2 * np.pi, 20, endpoint=False)
        scan = max(_profiled_power(1.5 * np.array([np.cos(a), np.sin(a)]), d, 0.5, 0.2, fam) for a in angles)
        assert res.achieved_power >= scan - 1e-12

    def test_feasible_and_dominates_plugin(self):
        d = _data(seed=4)
        lm, _ = fit_gaussian_lm(d)
        sp = plugin_space(lm)
        res = maximize_power(d, 1.0, 0.1, sp, delta=0.5)
        assert res.eta_hat >= 0 and res.achieved_error <= 0.1
        start = _profiled_power(lm.coef[1:], d, 1.0, 0.1, sp.family)
        assert res.achieved_power >= start - 1e-12
        m = res.model(sp.family)
        assert error_fn(d, m, 1.0, res.eta_hat, delta=0.5) == pytest.approx(res.achieved_error)

    def test_joint_mode_feasible(self):
        d = _data(seed=5)
        lm, _ = fit_gaussian_lm(d)
        res = maximize_power(d, 1.0, 0.1, plugin_space(lm), joint=True, starts=4)
        assert res.achieved_error <= 0.1 and res.achieved_power > 0

    def test_deterministic(self):
        d = _data(seed=6)
        lm, _ = fit_gaussian_lm(d)
        a = maximize_power(d, 1.0, 0.1, plugin_space(lm), seed=7)
        b = maximize_power(d, 1.0, 0.1, plugin_space(lm), seed=7)
        np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
        assert a.eta_hat == b.eta_hat

    def test_infeasible(self):
        # with delta = 1 the error never drops below 1/n, above the target
        d = Dataset(np.arange(10.0)[:, None], np.r_[np.zeros(9), 5.0][::-1])
        fam = _family(1)
        assert profile_eta([-1.0], d, 1.0, 0.01, fam, delta=1.0) == -1
        sp = ParamSearchSpace(fam, [-1.0], [-1.0], [-1.0])
        res = maximize_power(d, 1.0, 0.01, sp, delta=1.0)
        assert res.eta_hat == -1 and res.achieved_power == 0.0

    def test_one_sided_calibration_rejected(self):
        d = _data()
        sp = ParamSearchSpace.around(_family(), [1.0, 1.0])
        with pytest.raises(ValueError, match="both sides"):
            maximize_power(d, 100.0, 0.1, sp)

    def test_direction_consistency(self):
        beta = np.array([1.0, -0.5])
        dirs = []
        for n in (200, 2000):
            d = _data(n=n, seed=11, beta=beta, noise=0.5)
            lm, _ = fit_gaussian_lm(d)
            res = maximize_power(d, 1.0, 0.1, plugin_space(lm), seed=0)
            dirs.append(res.theta_hat / np.linalg.norm(res.theta_hat))
        truth = beta / np.linalg.norm(beta)
        assert dirs[1] @ truth > 0.95
        assert dirs[1] @ truth >= dirs[0] @ truth - 0.05


class _Const:
    def __init__(self, f):
        self.f = f

    def mean(self, X):
        return self.f(np.atleast_2d(X))


class TestEnsemble:
    def test_single_model(self):
        d = _data()
        np.testing.assert_array_equal(fit_ensemble_weights([_Const(lambda X: X[:, 0])], d, 0.5, 0.2), [1.0])

    def test_identical_models_uniform(self):
        d = _data()
        m = _Const(lambda X: X @ [1.0, -0.5])
        np.testing.assert_allclose(fit_ensemble_weights([m, m], d, 0.5, 0.2), [0.5, 0.5])

    def test_prefers_informative_model(self):
        d = _data(n=500, seed=2, noise=0.3)
        good = _Const(lambda X: X @ [1.0, -0.5])
        junk = _Const(lambda X: -X @ [1.0, -0.5])
        om = fit_ensemble_weights([good, junk], d, 0.5, 0.1)
        assert om[0] > 0.5 and om.sum() == pytest.approx(1.0) and np.all(om >= 0)

    def test_empty(self):
        with pytest.raises(ValueError):
            fit_ensemble_weights([], _data(), 0.5, 0.1)
