"""Strategy-blind reference estimators: IPW, AIPW, propensity matching,
S-learner and T-learner. All of them condition on X only."""

from __future__ import annotations

import numpy as np

from .domain import EstimateReport, ObservedData
from .estimator import SdrConfig, make_report, single_pass_dr
from .nuisance import (
    _penalty,
    build_features,
    fit_outcome_arm,
    fit_propensity,
    fit_ridge,
    predict_propensity,
)
from .numerics import solve_spd


def _blind_propensity(data: ObservedData, cfg: SdrConfig) -> np.ndarray:
    pmap = cfg.propensity_map.without_state()
    coefs = fit_propensity(data, None, pmap, cfg.ridge)
    return predict_propensity(coefs, data.x, None, pmap, cfg.truncation)


def ipw_influence(y, t, e) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    return t * y / e - (1.0 - t) * y / (1.0 - e)


def estimate_ipw(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> EstimateReport:
    e = _blind_propensity(data, cfg)
    return make_report(ipw_influence(data.y, data.t, e), cfg.ci_level, "IPW")


def estimate_aipw(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> EstimateReport:
    return single_pass_dr(data, cfg, "AIPW")


def match_on_score(score_treated, score_control) -> np.ndarray:
    """Index of the nearest control score for each treated score.

    With replacement; equidistant candidates resolve to the lower control index.
    """
    sc = np.asarray(score_control, dtype=float)
    order = np.argsort(sc, kind="stable")
    sorted_sc = sc[order]
    out = np.empty(len(score_treated), dtype=np.int64)
    for k, s in enumerate(np.asarray(score_treated, dtype=float)):
        dist = np.abs(sorted_sc - s)
        best = dist.min()
        out[k] = order[dist == best].min()
    return out


def matching_from_scores(y, t, e) -> np.ndarray:
    """Matched-pair differences (treated outcome minus matched control outcome)."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t)
    treated = np.flatnonzero(t == 1)
    control = np.flatnonzero(t == 0)
    m = match_on_score(np.asarray(e)[treated], np.asarray(e)[control])
    return y[treated] - y[control[m]]


def estimate_matching(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> EstimateReport:
    """1:1 nearest-neighbour matching on the fitted propensity (ATT).

    The standard error treats matched-pair differences as i.i.d.; it ignores
    reuse of controls.
    """
    e = _blind_propensity(data, cfg)
    diffs = matching_from_scores(data.y, data.t, e)
    return make_report(diffs, cfg.ci_level, "Matching", estimand="ATT")


def estimate_s_learner(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> EstimateReport:
    data.require_both_arms()
    omap = cfg.outcome_map.without_state()
    z = np.column_stack([build_features(data.x, None, omap), data.t.astype(float)])
    coefs = fit_ridge(z, data.y, cfg.ridge)
    tau = float(coefs[-1])
    # sandwich-form influence of the treatment coefficient
    bread = z.T @ z + np.diag(_penalty(z.shape[1], cfg.ridge))
    resid = data.y - z @ coefs
    unit = np.zeros(z.shape[1])
    unit[-1] = 1.0
    row = solve_spd(bread, unit)
    corr = data.n * (z @ row) * resid
    psi = tau + corr - corr.mean()
    return make_report(psi, cfg.ci_level, "S-Learner")


def _arm_correction(z, resid, mask, zbar, ridge) -> np.ndarray:
    """Per-unit influence of one arm's regression on the mean prediction."""
    za = z[mask]
    bread = za.T @ za + np.diag(_penalty(z.shape[1], ridge))
    out = np.zeros(len(z))
    out[mask] = len(z) * (za @ solve_spd(bread, zbar)) * resid[mask]
    return out


def estimate_t_learner(data: ObservedData, cfg: SdrConfig = SdrConfig()) -> EstimateReport:
    omap = cfg.outcome_map.without_state()
    b1 = fit_outcome_arm(data, 1, None, omap, cfg.ridge)
    b0 = fit_outcome_arm(data, 0, None, omap, cfg.ridge)
    z = build_features(data.x, None, omap)
    zbar = z.mean(axis=0)
    treated = data.t == 1
    # plug-in contrast plus the regression-error terms of each arm's fit
    corr = (_arm_correction(z, data.y - z @ b1, treated, zbar, cfg.ridge)
            - _arm_correction(z, data.y - z @ b0, ~treated, zbar, cfg.ridge))
    return make_report(z @ b1 - z @ b0 + corr - corr.mean(), cfg.ci_level, "T-Learner")
