"""Strategic doubly robust (SDR) estimation.

The outer loop alternates a logistic choice-model fit on (1, X, S) with a
damped mean-field update of the per-agent strategic state S. Once S settles,
propensity and per-arm outcome models are fitted conditional on (X, S) and
combined in the augmented IPW estimating equation. Standard errors come
from the empirical variance of the per-unit influence values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .domain import Dataset, EquilibriumState, EstimateReport, ObservedData
from .equilibrium import estimate_payoff_params, state_from_treatments, update_equilibrium
from .errors import ConfigError, MissingOracle
from .nuisance import (
    CORRECT,
    DEFAULT_RIDGE,
    DEFAULT_TRUNCATION,
    FeatureMapSpec,
    fit_nuisance,
)
from .numerics import sigmoid

STATE_INITS = ("observed_treatments", "constant_half")


@dataclass(frozen=True)
class SdrConfig:
    epsilon: float = 1e-6
    max_outer_iterations: int = 50
    damping: float = 0.5
    ridge: float = DEFAULT_RIDGE
    truncation: tuple = DEFAULT_TRUNCATION
    propensity_map: FeatureMapSpec = field(default=CORRECT)
    outcome_map: FeatureMapSpec = field(default=CORRECT)
    ci_level: float = 0.95
    state_init: str = "observed_treatments"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError("ci_level must lie in (0, 1)")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigError("damping must lie in (0, 1]")
        if self.max_outer_iterations < 1:
            raise ConfigError("max_outer_iterations must be >= 1")
        if self.state_init not in STATE_INITS:
            raise ConfigError(f"state_init must be one of {STATE_INITS}")
        lo, hi = self.truncation
        if not 0.0 < lo < hi < 1.0:
            raise ConfigError("truncation must satisfy 0 < lo < hi < 1")


def sdr_point_estimate(y, t, e_hat, mu1_hat, mu0_hat) -> tuple[float, np.ndarray]:
    """Augmented IPW estimating equation; returns (tau_hat, per-unit influence values)."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    e = np.asarray(e_hat, dtype=float)
    mu1 = np.asarray(mu1_hat, dtype=float)
    mu0 = np.asarray(mu0_hat, dtype=float)
    psi = t * (y - mu1) / e - (1.0 - t) * (y - mu0) / (1.0 - e) + mu1 - mu0
    return float(np.mean(psi)), psi


def inference(influence, ci_level: float = 0.95, tau_hat: float | None = None) -> tuple[float, float, float]:
    """Standard error and normal-theory CI from influence values.

    Uses the 1/n empirical variance of the influence values around their mean.
    """
    psi = np.asarray(influence, dtype=float)
    n = len(psi)
    if n < 2:
        raise ValueError("inference needs at least two influence values")
    tau = float(np.mean(psi)) if tau_hat is None else tau_hat
    v_hat = float(np.mean((psi - tau) ** 2))
    se = float(np.sqrt(v_hat / n))
    z = float(norm.ppf(0.5 + ci_level / 2.0))
    return se, tau - z * se, tau + z * se


def make_report(influence, ci_level: float, method: str, iterations: int = 0,
                converged: bool = True, estimand: str = "ATE", trace=()) -> EstimateReport:
    psi = np.asarray(influence, dtype=float)
    tau = float(np.mean(psi))
    se, lo, hi = inference(psi, ci_level, tau)
    return EstimateReport(tau_hat=tau, std_error=se, ci_low=lo, ci_high=hi, influence=psi,
                          iterations=iterations, converged=converged, method_name=method,
                          estimand=estimand, trace=tuple(trace))


@dataclass(frozen=True)
class SdrFit:
    """Everything the final SDR estimate is computed from."""

    state: EquilibriumState
    e_hat: np.ndarray
    mu1_hat: np.ndarray
    mu0_hat: np.ndarray
    iterations: int
    converged: bool
    trace: tuple


def initial_state(data: ObservedData, how: str) -> EquilibriumState:
    if how == "observed_treatments":
        return state_from_treatments(data.t)
    n = data.n
    return EquilibriumState(s=np.full(n, 0.5), mean_rate=0.5, iterations=0, converged=False)


def iterate_state(data: ObservedData, cfg: SdrConfig) -> tuple[EquilibriumState, list[float], bool]:
    """Stage 1: alternate choice-model fits and mean-field state updates.

    Returns the final state, the per-iteration relative state changes and
    whether the relative change fell below epsilon.
    """
    data.require_both_arms()
    s = initial_state(data, cfg.state_init)
    trace: list[float] = []
    for _ in range(cfg.max_outer_iterations):
        theta = estimate_payoff_params(data.t, data.x, s, cfg.ridge)
        s_new = update_equilibrium(theta, data.x, s, cfg.damping)
        rel = float(np.linalg.norm(s_new.s - s.s) / max(np.linalg.norm(s.s), 1e-12))
        trace.append(rel)
        s = s_new
        if rel < cfg.epsilon:
            return replace(s, converged=True), trace, True
    return s, trace, False


def fit_sdr(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> SdrFit:
    state, trace, converged = iterate_state(data, cfg)
    models = fit_nuisance(data, state, cfg.propensity_map, cfg.outcome_map,
                          cfg.ridge, cfg.truncation)
    e, mu1, mu0 = models.predict(data.x, state)
    return SdrFit(state, e, mu1, mu0, len(trace), converged, tuple(trace))


def run_sdr(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> EstimateReport:
    fit = fit_sdr(data, cfg)
    _, psi = sdr_point_estimate(data.y, data.t, fit.e_hat, fit.mu1_hat, fit.mu0_hat)
    return make_report(psi, cfg.ci_level, "SDR", fit.iterations, fit.converged, trace=fit.trace)


def single_pass_dr(data: ObservedData, cfg: SdrConfig, method: str) -> EstimateReport:
    """Doubly robust estimate conditioning on X only, with no equilibrium loop."""
    pmap = cfg.propensity_map.without_state()
    omap = cfg.outcome_map.without_state()
    models = fit_nuisance(data, None, pmap, omap, cfg.ridge, cfg.truncation)
    e, mu1, mu0 = models.predict(data.x, None)
    _, psi = sdr_point_estimate(data.y, data.t, e, mu1, mu0)
    return make_report(psi, cfg.ci_level, method, iterations=1, converged=True)


def run_dr_nonstrategic(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> EstimateReport:
    return single_pass_dr(data, cfg, "DR")


# -- oracle diagnostics ----------------------------------------------------

def oracle_nuisances(ds: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """True assignment probability and true conditional outcome means.

    The true conditioning set includes the hidden confounder u, so these are
    only available for synthetic data.
    """
    o = ds.oracle
    if o is None or o.params is None:
        raise MissingOracle("oracle nuisances need a generated dataset")
    p = o.params
    index = p.tau_direct + p.alpha * o.s_true.s + ds.x @ p.beta + o.u
    e = sigmoid(index / p.payoff_noise)
    base = p.alpha * o.t_star.mean() + ds.x @ p.gamma + o.u
    return e, base + p.tau_direct, base


def efficiency_bound(ds: Dataset, e=None, mu1=None, mu0=None) -> float:
    """Sample average of the semiparametric variance bound under the true nuisances.

    Outcome noise is homoscedastic, so both conditional variances equal sigma^2.
    """
    o = ds.oracle
    if o is None or o.params is None:
        raise MissingOracle("efficiency_bound needs the oracle")
    if e is None:
        e, mu1, mu0 = oracle_nuisances(ds)
    var = o.params.sigma_noise ** 2
    cate = np.asarray(mu1) - np.asarray(mu0)
    return float(np.mean(var / e + var / (1.0 - e) + (cate - o.tau_true) ** 2))


# -- sensitivity -----------------------------------------------------------

def tilt_propensity(e, gamma: float, truncation=DEFAULT_TRUNCATION) -> np.ndarray:
    """Multiply treatment odds by gamma and re-truncate."""
    e = np.asarray(e, dtype=float)
    odds = gamma * e / (1.0 - e)
    lo, hi = truncation
    return np.clip(odds / (1.0 + odds), lo, hi)


def sensitivity_from_fit(y, t, fit: SdrFit, gamma: float, truncation=DEFAULT_TRUNCATION) -> tuple[float, float]:
    if gamma < 1.0:
        raise ConfigError("gamma must be >= 1")
    tau, _ = sdr_point_estimate(y, t, fit.e_hat, fit.mu1_hat, fit.mu0_hat)
    if gamma == 1.0:
        return tau, tau
    up, _ = sdr_point_estimate(y, t, tilt_propensity(fit.e_hat, gamma, truncation), fit.mu1_hat, fit.mu0_hat)
    down, _ = sdr_point_estimate(y, t, tilt_propensity(fit.e_hat, 1.0 / gamma, truncation), fit.mu1_hat, fit.mu0_hat)
    # the untilted estimate is included so the interval always contains it
    return min(up, down, tau), max(up, down, tau)


def sensitivity_bounds(data: ObservedData, cfg: SdrConfig, gamma: float) -> tuple[float, float]:
    if gamma < 1.0:
        raise ConfigError("gamma must be >= 1")
    return sensitivity_from_fit(data.y, data.t, fit_sdr(data, cfg), gamma, cfg.truncation)
