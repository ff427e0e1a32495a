"""Strategic propensity score and per-arm outcome models.

Both are parametric: penalized logistic regression fitted by damped Newton
(IRLS) and ridge least squares. A ``FeatureMapSpec`` decides the conditioning
set and functional form, which is how misspecification is injected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import EquilibriumState, ObservedData
from .errors import ArmTooSmall, DidNotConverge, NotPositiveDefinite
from .numerics import sigmoid, solve_spd

DEFAULT_RIDGE = 1e-6
DEFAULT_TRUNCATION = (0.01, 0.99)
TRANSFORMS = ("identity", "kang_schafer")


@dataclass(frozen=True)
class FeatureMapSpec:
    include_state: bool = True
    transform: str = "identity"
    include_intercept: bool = True

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; expected one of {TRANSFORMS}")
        if not self.include_intercept:
            raise ValueError("feature maps always carry an intercept")

    @property
    def uses_state(self) -> bool:
        # the exp-transform map deliberately omits the strategic state
        return self.include_state and self.transform == "identity"

    def without_state(self) -> "FeatureMapSpec":
        return FeatureMapSpec(False, self.transform)


CORRECT = FeatureMapSpec(True, "identity")
MISSPECIFIED = FeatureMapSpec(False, "kang_schafer")


def _state_vector(s, n: int) -> np.ndarray | None:
    if s is None:
        return None
    if isinstance(s, EquilibriumState):
        s = s.s
    return np.broadcast_to(np.asarray(s, dtype=float), (n,))


def build_features(x, s, fmap: FeatureMapSpec) -> np.ndarray:
    """Design row(s) for covariates ``x`` and state ``s``.

    A 1-D ``x`` is one unit and yields a 1-D feature vector; a 2-D ``x``
    yields the full design matrix.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xx = x[None, :] if single else x
    n = xx.shape[0]
    cols = [np.ones((n, 1))]
    if fmap.transform == "identity":
        cols.append(xx)
        if fmap.include_state:
            sv = _state_vector(s, n)
            if sv is None:
                raise ValueError("feature map includes the state but none was given")
            cols.append(sv[:, None])
    else:
        cols.append(np.exp(xx / 2.0))
    z = np.hstack(cols)
    return z[0] if single else z


def _penalty(p: int, ridge: float) -> np.ndarray:
    pen = np.full(p, float(ridge))
    pen[0] = 0.0
    return pen


def _penalized_loglik(z, t, beta, pen) -> float:
    eta = z @ beta
    # log-likelihood of logistic model, written to avoid overflow
    ll = np.sum(t * eta - np.logaddexp(0.0, eta))
    return float(ll - 0.5 * np.sum(pen * beta * beta))


def fit_logistic(z: np.ndarray, t: np.ndarray, ridge: float = DEFAULT_RIDGE,
                 max_iter: int = 100, tol: float = 1e-8, history: list | None = None) -> np.ndarray:
    """L2-penalized logistic regression (intercept unpenalized) by damped Newton.

    Each Newton step is halved until the penalized log-likelihood does not
    decrease, so the objective is monotone across accepted iterates.
    """
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    p = z.shape[1]
    pen = _penalty(p, ridge)
    beta = np.zeros(p)
    obj = _penalized_loglik(z, t, beta, pen)
    if history is not None:
        history.append(obj)
    for _ in range(max_iter):
        mu = sigmoid(z @ beta)
        w = mu * (1.0 - mu)
        grad = z.T @ (t - mu) - pen * beta
        hess = (z * w[:, None]).T @ z + np.diag(pen)
        try:
            step = solve_spd(hess, grad)
        except NotPositiveDefinite:
            step = solve_spd(hess + np.eye(p) * max(ridge, 1e-8), grad)
        scale = 1.0
        for _ in range(60):
            cand = beta + scale * step
            cand_obj = _penalized_loglik(z, t, cand, pen)
            if cand_obj >= obj:
                break
            scale *= 0.5
        else:
            # no ascent possible along the Newton direction: at the optimum numerically
            return beta
        change = np.max(np.abs(cand - beta))
        beta, obj = cand, cand_obj
        if history is not None:
            history.append(obj)
        if change <= tol:
            return beta
    raise DidNotConverge(f"logistic IRLS did not converge in {max_iter} iterations")


def fit_ridge(z: np.ndarray, y: np.ndarray, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """Ridge least squares via the normal equations (intercept unpenalized)."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    pen = _penalty(z.shape[1], ridge)
    gram = z.T @ z + np.diag(pen)
    rhs = z.T @ y
    try:
        return solve_spd(gram, rhs)
    except NotPositiveDefinite:
        retry = max(1e3 * ridge, 1e-6)
        return solve_spd(z.T @ z + np.diag(_penalty(z.shape[1], retry)), rhs)


def fit_propensity(data: ObservedData, s, fmap: FeatureMapSpec,
                   ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    data.require_both_arms()
    z = build_features(data.x, s, fmap)
    return fit_logistic(z, data.t, ridge)


def predict_propensity(coefs, x, s, fmap: FeatureMapSpec,
                       truncation=DEFAULT_TRUNCATION):
    lo, hi = truncation
    z = build_features(x, s, fmap)
    return np.clip(sigmoid(z @ np.asarray(coefs)), lo, hi)


def fit_outcome_arm(data: ObservedData, arm: int, s, fmap: FeatureMapSpec,
                    ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    mask = data.t == arm
    z = build_features(data.x, s, fmap)[mask]
    if z.shape[0] < z.shape[1]:
        raise ArmTooSmall(
            f"arm t={arm} has {z.shape[0]} units, needs at least {z.shape[1]}"
        )
    return fit_ridge(z, data.y[mask], ridge)


def predict_outcome(coefs, t: int, x, s, fmap: FeatureMapSpec):
    # t only selects which arm's coefficients the caller passed in
    return build_features(x, s, fmap) @ np.asarray(coefs)


@dataclass(frozen=True)
class NuisanceModels:
    propensity_coefs: np.ndarray
    mu1_coefs: np.ndarray
    mu0_coefs: np.ndarray
    propensity_map: FeatureMapSpec
    outcome_map: FeatureMapSpec
    truncation: tuple = DEFAULT_TRUNCATION

    def __post_init__(self):
        lo, hi = self.truncation
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"truncation must satisfy 0 < lo < hi < 1, got {self.truncation}")

    def predict(self, x, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (e_hat, mu1_hat, mu0_hat) for every unit."""
        e = predict_propensity(self.propensity_coefs, x, s, self.propensity_map, self.truncation)
        mu1 = predict_outcome(self.mu1_coefs, 1, x, s, self.outcome_map)
        mu0 = predict_outcome(self.mu0_coefs, 0, x, s, self.outcome_map)
        return e, mu1, mu0


def fit_nuisance(data: ObservedData, s, propensity_map: FeatureMapSpec,
                 outcome_map: FeatureMapSpec, ridge: float = DEFAULT_RIDGE,
                 truncation=DEFAULT_TRUNCATION) -> NuisanceModels:
    return NuisanceModels(
        propensity_coefs=fit_propensity(data, s, propensity_map, ridge),
        mu1_coefs=fit_outcome_arm(data, 1, s, outcome_map, ridge),
        mu0_coefs=fit_outcome_arm(data, 0, s, outcome_map, ridge),
        propensity_map=propensity_map,
        outcome_map=outcome_map,
        truncation=tuple(truncation),
    )
