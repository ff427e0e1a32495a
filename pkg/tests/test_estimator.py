import numpy as np
import pytest
from scipy.stats import norm

from stratdr.datagen import DataGenConfig, gen_dataset
from stratdr.domain import Dataset
from stratdr.errors import ConfigError, MissingOracle
from stratdr.estimator import (
    SdrConfig,
    efficiency_bound,
    fit_sdr,
    inference,
    oracle_nuisances,
    run_dr_nonstrategic,
    run_sdr,
    sdr_point_estimate,
    sensitivity_bounds,
    sensitivity_from_fit,
)


def test_point_estimate_hand_case():
    tau, psi = sdr_point_estimate([3, 1], [1, 0], [0.5, 0.5], [0, 0], [0, 0])
    assert np.array_equal(psi, [6, -2]) and tau == 2.0


def test_zero_residuals_reduce_to_imputation():
    rng = np.random.default_rng(0)
    mu1, mu0 = rng.normal(size=10), rng.normal(size=10)
    t = rng.integers(0, 2, 10)
    y = np.where(t == 1, mu1, mu0)
    tau, _ = sdr_point_estimate(y, t, rng.uniform(0.1, 0.9, 10), mu1, mu0)
    assert tau == pytest.approx(np.mean(mu1 - mu0), abs=1e-14)


def test_oracle_nuisances_recover_truth():
    ds = gen_dataset(DataGenConfig.default(5000, alpha=0.5, seed=0))
    tau, psi = sdr_point_estimate(ds.y, ds.t, *oracle_nuisances(ds))
    se, _, _ = inference(psi)
    assert abs(tau - ds.oracle.tau_true) <= 3 * se


def test_inference_constant():
    se, lo, hi = inference(np.full(5, 1.3))
    assert se == 0.0 and lo == hi == 1.3


def test_inference_hand_case():
    se, lo, hi = inference([0.0, 2.0])
    z = norm.ppf(0.975)
    assert se == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert lo == pytest.approx(1 - z / np.sqrt(2)) and hi == pytest.approx(1 + z / np.sqrt(2))
    assert 1 - lo == pytest.approx(1.3859, abs=1e-4)


def test_inference_standard_normal():
    psi = np.random.default_rng(1).standard_normal(10_000)
    se, _, _ = inference(psi)
    assert se == pytest.approx(0.01, rel=0.01)


def test_inference_needs_two():
    with pytest.raises(ValueError):
        inference([1.0])


def test_config_guards():
    with pytest.raises(ConfigError):
        SdrConfig(epsilon=0.0)
    with pytest.raises(ConfigError):
        SdrConfig(ci_level=1.0)
    with pytest.raises(ConfigError):
        SdrConfig(state_init="random")


def test_sdr_decoupled_game():
    # hidden confounder off: with alpha=0 nothing else biases the comparison
    ds = gen_dataset(DataGenConfig.default(2000, alpha=0.0, seed=0, confounder_scale=0.0))
    r = run_sdr(ds.observed)
    assert r.converged
    assert abs(r.tau_hat - ds.oracle.tau_true) <= 3 * r.std_error


def test_sdr_deterministic():
    ds = gen_dataset(DataGenConfig.default(300, alpha=0.5, seed=2))
    a, b = run_sdr(ds.observed), run_sdr(ds.observed)
    assert a.to_dict() == b.to_dict()
    assert a.influence.tobytes() == b.influence.tobytes()


def test_influence_mean_is_estimate():
    ds = gen_dataset(DataGenConfig.default(400, alpha=0.9, seed=3))
    for r in (run_sdr(ds.observed), run_dr_nonstrategic(ds.observed)):
        assert abs(r.influence.mean() - r.tau_hat) <= 1e-12


def test_non_convergence_still_returns_estimate():
    ds = gen_dataset(DataGenConfig.default(300, alpha=0.5, seed=4))
    r = run_sdr(ds.observed, SdrConfig(max_outer_iterations=1, epsilon=1e-300))
    assert not r.converged and r.iterations == 1 and np.isfinite(r.tau_hat)


def test_dr_no_strategic_confounding():
    ds = gen_dataset(DataGenConfig.default(5000, alpha=0.0, seed=0, confounder_scale=0.0))
    r = run_dr_nonstrategic(ds.observed)
    assert abs(r.tau_hat - ds.oracle.tau_true) <= 3 * r.std_error


def test_shared_estimating_equation():
    ds = gen_dataset(DataGenConfig.default(500, alpha=0.5, seed=5))
    fit = fit_sdr(ds.observed)
    tau, _ = sdr_point_estimate(ds.y, ds.t, fit.e_hat, fit.mu1_hat, fit.mu0_hat)
    assert tau == run_sdr(ds.observed).tau_hat


@pytest.mark.parametrize("alpha", [0.0, 0.5, 0.9])
def test_outer_loop_monotone_after_three(alpha):
    ok = 0
    for seed in range(20):
        trace = np.array(fit_sdr(gen_dataset(DataGenConfig.default(300, alpha=alpha, seed=seed)).observed).trace)
        ok += bool(np.all(np.diff(trace[2:]) < 0))
    assert ok / 20 >= 0.95


def _flat_dataset(sigma, n=6):
    ds = gen_dataset(DataGenConfig.default(n, d=1, seed=0, sigma_noise=sigma))
    return ds


def test_efficiency_bound_examples():
    ds = _flat_dataset(0.0)
    tau = ds.oracle.tau_true
    e = np.full(ds.n, 0.5)
    mu0 = np.zeros(ds.n)
    assert efficiency_bound(ds, e, mu0 + tau, mu0) == 0.0
    ds1 = _flat_dataset(1.0)
    assert efficiency_bound(ds1, e, mu0 + tau, mu0) == 4.0


def test_efficiency_bound_needs_oracle():
    with pytest.raises(MissingOracle):
        efficiency_bound(Dataset(y=[0, 1], t=[0, 1], x=[[0.0], [1.0]]))


@pytest.fixture(scope="module")
def fitted():
    ds = gen_dataset(DataGenConfig.default(400, alpha=0.5, seed=6))
    return ds, fit_sdr(ds.observed)


def test_sensitivity_gamma_one(fitted):
    ds, fit = fitted
    tau = run_sdr(ds.observed).tau_hat
    assert sensitivity_from_fit(ds.y, ds.t, fit, 1.0) == (tau, tau)
    assert sensitivity_bounds(ds.observed, SdrConfig(), 1.0) == (tau, tau)


def test_sensitivity_brackets_and_widens(fitted):
    ds, fit = fitted
    tau = run_sdr(ds.observed).tau_hat
    lo, hi = sensitivity_from_fit(ds.y, ds.t, fit, 2.0)
    assert lo <= tau <= hi
    widths = [np.subtract(*sensitivity_from_fit(ds.y, ds.t, fit, g)[::-1]) for g in (1, 1.5, 2, 3)]
    assert all(b >= a for a, b in zip(widths, widths[1:]))


def test_sensitivity_guard(fitted):
    ds, _ = fitted
    with pytest.raises(ConfigError):
        sensitivity_bounds(ds.observed, SdrConfig(), 0.5)


def test_sensitivity_interior_propensities():
    from stratdr.domain import EquilibriumState
    from stratdr.estimator import SdrFit

    rng = np.random.default_rng(7)
    n = 200
    t = rng.integers(0, 2, n)
    y = 1.0 + t + rng.normal(size=n)
    fit = SdrFit(EquilibriumState(np.full(n, 0.5), 0.5), rng.uniform(0.3, 0.7, n),
                 np.full(n, 1.5), np.full(n, 0.5), 1, True, ())
    widths = [hi - lo for lo, hi in (sensitivity_from_fit(y, t, fit, g) for g in (1, 1.5, 2, 3))]
    assert widths[0] == 0.0 and widths[1] > 0.05
    assert all(b >= a for a, b in zip(widths, widths[1:]))


def test_constant_half_start_calibrated_intervals():
    # the observed-treatment start leaks own treatment into s; a neutral start does not
    cover = []
    for seed in range(40):
        ds = gen_dataset(DataGenConfig.default(1000, alpha=0.0, seed=seed, confounder_scale=0.0))
        r = run_sdr(ds.observed, SdrConfig(state_init="constant_half"))
        cover.append(r.ci_low <= ds.oracle.tau_true <= r.ci_high)
    assert 0.85 <= np.mean(cover) <= 1.0
