"""Equilibrium machinery: the leave-one-out state, the realized binary game,
best-response dynamics, the estimated mean-field update, and an exhaustive
Nash oracle for small games."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import EquilibriumState, PayoffParameters
from .errors import TooLarge
from .nuisance import DEFAULT_RIDGE, FeatureMapSpec, build_features, fit_logistic
from .numerics import sigmoid

BRUTE_FORCE_MAX_N = 20
CHOICE_MAP = FeatureMapSpec(include_state=True, transform="identity")


@dataclass(frozen=True)
class PayoffInputs:
    """Per-agent primitives of the realized game."""

    x: np.ndarray
    u: np.ndarray
    eps: np.ndarray

    @property
    def n(self) -> int:
        return len(self.u)

    def base_gain(self, p: PayoffParameters) -> np.ndarray:
        """Gain from treatment excluding the peer term."""
        return p.tau_direct + self.x @ p.beta + self.u + self.eps


def state_from_treatments(t) -> EquilibriumState:
    t = np.asarray(t, dtype=float)
    n = len(t)
    if n < 2:
        raise ValueError("need at least two agents")
    total = t.sum()
    return EquilibriumState(s=(total - t) / (n - 1), mean_rate=float(total / n),
                            iterations=0, converged=True)


def realized_gain(t, inputs: PayoffInputs, p: PayoffParameters) -> np.ndarray:
    """Payoff difference pi(1) - pi(0) for every agent given the others in ``t``."""
    t = np.asarray(t, dtype=float)
    n = len(t)
    others = (t.sum() - t) / (n - 1)
    return inputs.base_gain(p) + p.alpha * others


def is_nash(t, inputs: PayoffInputs, p: PayoffParameters) -> bool:
    """No agent can strictly gain by flipping its own treatment."""
    t = np.asarray(t)
    g = realized_gain(t, inputs, p)
    return bool(np.all(np.where(t == 1, g >= 0.0, g <= 0.0)))


def solve_equilibrium(inputs: PayoffInputs, p: PayoffParameters, init_t,
                      max_iter: int = 100) -> tuple[np.ndarray, EquilibriumState]:
    """Asynchronous best-response dynamics in ascending agent order.

    A sweep visits every agent once; the loop stops after the first sweep in
    which nobody switches. Ties (zero gain) resolve to no treatment.
    """
    n = inputs.n
    if len(init_t) != n:
        raise ValueError("init_t length must equal the number of agents")
    base = inputs.base_gain(p).tolist()
    t = [int(v) for v in init_t]
    total = sum(t)
    coef = p.alpha / (n - 1)
    sweeps = 0
    converged = False
    while sweeps < max_iter:
        sweeps += 1
        changed = False
        for i in range(n):
            ti = t[i]
            new = 1 if base[i] + coef * (total - ti) > 0.0 else 0
            if new != ti:
                t[i] = new
                total += new - ti
                changed = True
        if not changed:
            converged = True
            break
    t_star = np.array(t, dtype=np.int8)
    st = state_from_treatments(t_star)
    return t_star, EquilibriumState(st.s, st.mean_rate, sweeps, converged)


def brute_force_nash(inputs: PayoffInputs, p: PayoffParameters) -> list[np.ndarray]:
    """Every pure-strategy Nash profile, by enumeration of all 2**n profiles."""
    n = inputs.n
    if n > BRUTE_FORCE_MAX_N:
        raise TooLarge(f"brute-force enumeration limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    codes = np.arange(1 << n, dtype=np.int64)
    profiles = ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8)
    total = profiles.sum(axis=1, keepdims=True)
    gain = inputs.base_gain(p)[None, :] + p.alpha * (total - profiles) / (n - 1)
    stable = np.where(profiles == 1, gain >= 0.0, gain <= 0.0).all(axis=1)
    return [row.copy() for row in profiles[stable]]


def estimate_payoff_params(t, x, s: EquilibriumState, ridge: float = DEFAULT_RIDGE) -> np.ndarray:
    """MLE of the logistic choice model on (1, x, s).

    Returns (intercept, covariate weights..., state weight).
    """
    z = build_features(x, s, CHOICE_MAP)
    return fit_logistic(z, t, ridge)


def choice_probabilities(theta, x, s: EquilibriumState) -> np.ndarray:
    return sigmoid(build_features(x, s, CHOICE_MAP) @ np.asarray(theta))


def update_equilibrium(theta, x, s_prev: EquilibriumState, damping: float = 0.5) -> EquilibriumState:
    """One damped mean-field step on the fitted choice probabilities."""
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    prob = choice_probabilities(theta, x, s_prev)
    n = len(prob)
    target = (prob.sum() - prob) / (n - 1)
    s_new = (1.0 - damping) * s_prev.s + damping * target
    return EquilibriumState(
        s=s_new,
        mean_rate=float(np.clip(s_new.mean(), 0.0, 1.0)),
        iterations=s_prev.iterations + 1,
        converged=False,
    )


def fixed_point_residual(theta, x, s: EquilibriumState) -> float:
    prob = choice_probabilities(theta, x, s)
    n = len(prob)
    return float(np.max(np.abs(s.s - (prob.sum() - prob) / (n - 1))))
