import numpy as np
import pytest

from helpers import random_survival_dataset
from qinact import (Dataset, ModelConfig, QRProblem, StepFunction,
                    compute_ipcw_weights, estimating_equation, fit,
                    fit_censoring_km, predict_quantile_inactivity, solve)
from qinact.errors import InsufficientEvents, ZeroCensoringSurvival
from qinact.model import FitResult


def _data(times, status, covs=None, names=()):
    times = np.asarray(times, dtype=float)
    if covs is None:
        covs = np.zeros((len(times), 0))
    return Dataset.from_arrays(times, np.asarray(status, dtype=np.int8),
                               np.asarray(covs, dtype=float), names)


def _fake_fit(beta):
    beta = np.asarray(beta, dtype=float)
    return FitResult(
        beta=beta, quantile=0.5, t0=20.0, n_effective=10,
        weights=np.ones(10), censoring_km=StepFunction(np.array([]), np.array([])),
        eq_residual=np.zeros(beta.size), active_set=np.arange(beta.size),
        objective=0.0, iterations=1,
    )


class TestIPCWWeights:
    def test_no_censoring(self):
        data = _data([1.0, 2.0, 9.0], [1, 1, 1])
        G = fit_censoring_km(data)
        w = compute_ipcw_weights(data, 5.0, G)
        assert w == pytest.approx([1.0, 1.0, 0.0])

    def test_km_hand_oracle_weight(self):
        data = _data([1.0, 2.0, 3.0], [0, 1, 0])
        G = fit_censoring_km(data)
        w = compute_ipcw_weights(data, 2.5, G)
        assert w == pytest.approx([0.0, 1.5, 0.0])

    def test_event_at_t0_gets_zero_weight(self):
        data = _data([1.0, 2.5, 3.0], [1, 1, 1])
        w = compute_ipcw_weights(data, 2.5, fit_censoring_km(data))
        assert w == pytest.approx([1.0, 0.0, 0.0])

    def test_zero_censoring_survival_raises_with_hint(self):
        data = _data([1.0, 2.0], [1, 1])
        G = StepFunction(np.array([1.5]), np.array([0.0]))
        with pytest.raises(ZeroCensoringSurvival) as err:
            compute_ipcw_weights(data, 3.0, G)
        assert err.value.index == 1
        assert "truncation_bound" in str(err.value)


class TestFit:
    def test_uncensored_intercept_only_is_sample_quantile(self):
        times = np.array([14.0, 12.0, 10.0, 5.0, 1.0, 16.0, 20.0])
        data = _data(times, np.ones(7, dtype=int))
        result = fit(data, ModelConfig(t0=15.0, quantile=0.5, min_events=3))
        # events before 15: times 14,12,10,5,1 -> inactivity 1,3,5,10,14
        assert np.exp(result.beta[0]) == pytest.approx(5.0, rel=1e-12)
        assert result.n_effective == 5

    def test_point_mass_recovers_log_exactly(self):
        data = _data([7.0] * 6, [1] * 6)
        result = fit(data, ModelConfig(t0=15.0, quantile=0.5, min_events=3))
        assert result.beta[0] == np.log(15.0 - 7.0)

    def test_censoring_free_reduction_is_bitwise(self):
        rng = np.random.default_rng(101)
        data = random_survival_dataset(rng, n=50, p=2, censoring=0.0, scale=6.0)
        config = ModelConfig(t0=10.0, quantile=0.35, min_events=5)
        result = fit(data, config)
        rows = np.flatnonzero((data.status == 1) & (data.times < 10.0))
        X = np.hstack([np.ones((rows.size, 1)), data.covariates[rows]])
        y = np.log(10.0 - data.times[rows])
        direct = solve(QRProblem(X, y, np.ones(rows.size), 0.35))
        assert np.array_equal(result.beta, direct.beta)
        assert result.objective == direct.objective

    def test_recovers_simulation_truth(self):
        from qinact.simulate import (WeibullPHSpec, calibrate_censoring_interval,
                                     generate_weibull_ph, true_median_inactivity)
        spec = WeibullPHSpec(group_sizes=(200, 200))
        a, b = calibrate_censoring_interval(spec, 0.10)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(77)))
        times, z = generate_weibull_ph(spec, rng)
        c = rng.uniform(a, b, spec.n)
        data = Dataset.from_arrays(np.minimum(times, c),
                                   (times <= c).astype(np.int8),
                                   z[:, None], ("group",))
        result = fit(data, ModelConfig(t0=15.0, quantile=0.5))
        truth = np.log(true_median_inactivity(0.2, 2.0, 0.0, 0.0, 15.0))
        assert abs(result.beta[0] - truth) < 0.1
        assert abs(result.beta[1]) < 0.15

    def test_insufficient_events(self):
        data = _data([1.0, 2.0, 30.0, 40.0], [1, 1, 1, 1])
        with pytest.raises(InsufficientEvents):
            fit(data, ModelConfig(t0=5.0, quantile=0.5, min_events=3))

    def test_near_t0_event_excluded_with_warning(self):
        times = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 15.0 - 1e-14])
        data = _data(times, np.ones(6, dtype=int))
        with pytest.warns(RuntimeWarning, match="excluded"):
            result = fit(data, ModelConfig(t0=15.0, quantile=0.5, min_events=3))
        assert result.weights[5] == 0.0
        assert result.n_effective == 5

    def test_truncation_bound_above_max_time_rejected(self):
        data = _data([1.0, 2.0, 3.0], [1, 1, 0])
        with pytest.raises(ValueError):
            fit(data, ModelConfig(t0=2.5, quantile=0.5, min_events=1,
                                  truncation_bound=10.0))

    def test_truncation_applies_to_censoring_km(self):
        rng = np.random.default_rng(55)
        data = random_survival_dataset(rng, n=80, p=0, censoring=0.35, scale=4.0)
        bound = float(np.quantile(data.times, 0.9))
        config = ModelConfig(t0=6.0, quantile=0.5, min_events=5,
                             truncation_bound=bound)
        result = fit(data, config)
        assert result.censoring_km.jump_times.max() <= bound


class TestEstimatingEquation:
    def test_all_indicators_zero(self):
        data = _data([1.0, 2.0, 3.0, 9.0], [1, 1, 1, 0], np.ones((4, 1)), ("z",))
        G = fit_censoring_km(data)
        beta = np.array([-100.0, 0.0])
        q = estimating_equation(data, ModelConfig(t0=5.0, quantile=0.3), beta, G)
        w = compute_ipcw_weights(data, 5.0, G)
        design = np.hstack([np.ones((4, 1)), data.covariates])
        expected = 0.3 * design.T @ w / np.sqrt(4)
        assert q == pytest.approx(expected, rel=1e-12)

    def test_all_indicators_one(self):
        data = _data([1.0, 2.0, 3.0, 9.0], [1, 1, 1, 0], np.ones((4, 1)), ("z",))
        G = fit_censoring_km(data)
        beta = np.array([100.0, 0.0])
        q = estimating_equation(data, ModelConfig(t0=5.0, quantile=0.3), beta, G)
        w = compute_ipcw_weights(data, 5.0, G)
        design = np.hstack([np.ones((4, 1)), data.covariates])
        expected = (0.3 - 1.0) * design.T @ w / np.sqrt(4)
        assert q == pytest.approx(expected, rel=1e-12)

    def test_root_bound_at_fitted_beta(self):
        rng = np.random.default_rng(202)
        for _ in range(20):
            data = random_survival_dataset(rng, n=70, p=1, censoring=0.25)
            t0 = float(np.quantile(data.times, 0.8))
            config = ModelConfig(t0=t0, quantile=0.5, min_events=5)
            result = fit(data, config)
            active_w = result.weights[result.active_set]
            zmax = np.maximum(
                1.0, np.abs(data.covariates[result.active_set]).max(axis=1))
            bound = float(active_w @ zmax) / np.sqrt(data.n)
            assert np.abs(result.eq_residual).max() <= bound * (1 + 1e-9)


class TestPredict:
    def test_multivariate_arithmetic(self):
        result = _fake_fit([2.86, 0.08, -0.62, 0.24])
        pred = predict_quantile_inactivity(result, [1.0, 0.30, 0.50])
        assert pred == pytest.approx(np.exp(2.874), rel=1e-12)
        assert abs(pred - 17.7) < 0.05

    def test_node_negative_variant(self):
        result = _fake_fit([2.86, 0.08, -0.62, 0.24])
        pred = predict_quantile_inactivity(result, [0.0, 0.30, 0.50])
        assert abs(pred - 16.3) < 0.06

    def test_zero_coefficients(self):
        assert predict_quantile_inactivity(_fake_fit([0.0, 0.0]), [3.0]) == 1.0

    def test_dimension_checked(self):
        with pytest.raises(ValueError):
            predict_quantile_inactivity(_fake_fit([1.0, 2.0]), [1.0, 2.0])

    def test_group_ratio_identity(self):
        rng = np.random.default_rng(303)
        z = rng.integers(0, 2, 60).astype(float)
        t = 4.0 * rng.weibull(1.4, 60) * np.exp(0.2 * z)
        data = Dataset.from_arrays(t, np.ones(60, dtype=np.int8), z[:, None],
                                   ("arm",))
        result = fit(data, ModelConfig(t0=float(np.quantile(t, 0.8)),
                                       quantile=0.5, min_events=5))
        ratio = result.predict([1.0]) / result.predict([0.0])
        assert ratio == pytest.approx(np.exp(result.beta[1]), rel=1e-12)

    def test_t0_shift_moves_median_by_shift(self):
        times = np.array([1.0, 2.0, 3.0, 5.0, 8.0])
        data = _data(times, np.ones(5, dtype=int))
        base = fit(data, ModelConfig(t0=10.0, quantile=0.5, min_events=3))
        shifted = fit(data, ModelConfig(t0=12.5, quantile=0.5, min_events=3))
        assert np.exp(shifted.beta[0]) == pytest.approx(
            np.exp(base.beta[0]) + 2.5, abs=1e-9)
