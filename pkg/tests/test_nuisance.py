import numpy as np
import pytest

from stratdr.datagen import DataGenConfig, gen_dataset
from stratdr.domain import EquilibriumState, ObservedData
from stratdr.errors import ArmTooSmall
from stratdr.nuisance import (
    CORRECT,
    MISSPECIFIED,
    FeatureMapSpec,
    NuisanceModels,
    build_features,
    fit_logistic,
    fit_outcome_arm,
    fit_propensity,
    fit_ridge,
    predict_outcome,
    predict_propensity,
)
from stratdr.numerics import sigmoid


def test_feature_maps():
    assert np.array_equal(build_features([1, 2], 0.3, CORRECT), [1, 1, 2, 0.3])
    assert np.array_equal(build_features([0, 0], 0.3, MISSPECIFIED), [1, 1, 1])
    assert np.array_equal(build_features([1, 2], 0.3, CORRECT.without_state()), [1, 1, 2])
    ks_with_state = FeatureMapSpec(include_state=True, transform="kang_schafer")
    assert build_features(np.zeros((4, 2)), np.zeros(4), ks_with_state).shape == (4, 3)


def test_unknown_transform():
    with pytest.raises(ValueError):
        FeatureMapSpec(transform="square")


def _separable(n=200):
    x = np.linspace(-1, 1, n)
    return np.column_stack([np.ones(n), x]), (x > 0).astype(float)


def test_separation_gives_finite_coefficients():
    z, t = _separable()
    b = fit_logistic(z, t, ridge=1e-3)
    assert np.all(np.isfinite(b)) and b[1] > 0


def test_huge_ridge_shrinks_slopes():
    rng = np.random.default_rng(0)
    z = np.column_stack([np.ones(500), rng.normal(size=(500, 3))])
    t = (rng.uniform(size=500) < sigmoid(z @ [0.2, 1, -1, 2])).astype(float)
    b = fit_logistic(z, t, ridge=1e6)
    assert np.all(np.abs(b[1:]) <= 1e-3)


def test_irls_objective_monotone():
    rng = np.random.default_rng(1)
    z = np.column_stack([np.ones(300), rng.normal(size=(300, 2))])
    t = (rng.uniform(size=300) < sigmoid(z @ [0.5, 3, -2])).astype(float)
    hist = []
    fit_logistic(z, t, history=hist)
    assert len(hist) >= 2
    assert all(b >= a for a, b in zip(hist, hist[1:]))


def test_propensity_recovery():
    rng = np.random.default_rng(2)
    n = 20_000
    x = rng.normal(size=(n, 2))
    s = rng.uniform(size=n)
    truth = np.array([0.3, 0.7, -0.6, 1.2])
    t = (rng.uniform(size=n) < sigmoid(build_features(x, s, CORRECT) @ truth)).astype(np.int8)
    b = fit_propensity(ObservedData(np.zeros(n), t, x), EquilibriumState(s, 0.5), CORRECT)
    assert np.all(np.abs(b - truth) <= 0.1)


def test_predict_propensity_clamps():
    x = np.array([[1.0]])
    assert predict_propensity(np.zeros(2), x, None, CORRECT.without_state())[0] == 0.5
    assert predict_propensity([1e3, 0.0], x, None, CORRECT.without_state(), (0.01, 0.99))[0] == 0.99
    assert predict_propensity([-1e3, 0.0], x, None, CORRECT.without_state(), (0.01, 0.99))[0] == 0.01


def test_truncation_guard():
    with pytest.raises(ValueError):
        NuisanceModels(np.zeros(2), np.zeros(2), np.zeros(2), CORRECT, CORRECT, truncation=(0.6, 0.4))


def _arm_data(n, seed, coef, noise=0.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    s = rng.uniform(size=n)
    y = build_features(x, s, CORRECT) @ coef + noise * rng.normal(size=n)
    return ObservedData(y, np.ones(n, dtype=np.int8), x), EquilibriumState(s, 0.5)


def test_outcome_interpolation():
    coef = np.array([1.0, -2.0, 0.5, 3.0])
    data, s = _arm_data(50, 3, coef)
    b = fit_outcome_arm(data, 1, s, CORRECT, ridge=0.0)
    resid = data.y - predict_outcome(b, 1, data.x, s.s, CORRECT)
    assert np.max(np.abs(resid)) <= 1e-10


def test_outcome_constant_target():
    data, s = _arm_data(50, 4, np.array([3.0, 0.0, 0.0, 0.0]))
    b = fit_outcome_arm(data, 1, s, CORRECT)
    assert b[0] == pytest.approx(3.0, abs=1e-9)
    assert np.all(np.abs(b[1:]) <= 1e-9)


def test_outcome_recovery():
    coef = np.array([0.5, 1.0, -1.0, 2.0])
    data, s = _arm_data(20_000, 5, coef, noise=1.0)
    b = fit_outcome_arm(data, 1, s, CORRECT)
    assert np.all(np.abs(b - coef) <= 0.05)


def test_small_arm_rejected():
    rng = np.random.default_rng(6)
    t = np.array([1, 1, 1, 0, 0, 0, 0, 0], dtype=np.int8)
    data = ObservedData(rng.normal(size=8), t, rng.normal(size=(8, 2)))
    with pytest.raises(ArmTooSmall):
        fit_outcome_arm(data, 1, EquilibriumState(np.full(8, 0.3), 0.3), CORRECT)


def test_ridge_solver_singular_fallback():
    z = np.column_stack([np.ones(10), np.ones(10)])
    b = fit_ridge(z, np.full(10, 2.0), ridge=0.0)
    assert np.allclose(z @ b, 2.0)


def test_propensity_consistent_with_choice_probability():
    # confounder off, so the choice probability given (x, rate) is observable;
    # the state is the shared equilibrium rate, which does not encode own treatment
    ds = gen_dataset(DataGenConfig.default(10_000, alpha=0.5, seed=1, confounder_scale=0.0))
    p = ds.oracle.params
    rate = ds.oracle.s_true.mean_rate
    s = EquilibriumState(np.full(ds.n, rate), rate)
    b = fit_propensity(ds.observed, s, CORRECT)
    e_hat = predict_propensity(b, ds.x, s.s, CORRECT, (0.0 + 1e-12, 1 - 1e-12))
    truth = sigmoid((p.tau_direct + p.alpha * ds.oracle.s_true.s + ds.x @ p.beta) / p.payoff_noise)
    assert np.mean(np.abs(e_hat - truth)) <= 0.02
