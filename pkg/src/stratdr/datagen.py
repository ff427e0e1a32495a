"""Synthetic strategic data: covariates, hidden confounders, a binary
participation game solved by best-response dynamics, and potential outcomes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Dataset, OracleInfo, PayoffParameters
from .equilibrium import PayoffInputs, solve_equilibrium, state_from_treatments
from .errors import MissingOracle
from .numerics import RngStream


@dataclass(frozen=True)
class DataGenConfig:
    n: int
    d: int = 5
    params: PayoffParameters | None = None
    seed: int = 0
    max_br_iterations: int = 100
    stream_id: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2 agents, got {self.n}")
        if self.d < 1:
            raise ValueError(f"need d >= 1 covariates, got {self.d}")
        if self.max_br_iterations < 1:
            raise ValueError("max_br_iterations must be >= 1")
        if self.params is None:
            object.__setattr__(self, "params", PayoffParameters.default(self.d))
        if len(self.params.beta) != self.d:
            raise ValueError("params.beta length must equal d")

    @classmethod
    def default(cls, n: int, d: int = 5, alpha: float = 0.5, seed: int = 0,
                stream_id: int = 0, **param_overrides) -> "DataGenConfig":
        return cls(n=n, d=d, params=PayoffParameters.default(d, alpha=alpha, **param_overrides),
                   seed=seed, stream_id=stream_id)

    def rng(self) -> RngStream:
        return RngStream(self.seed, self.stream_id)


_GRID = 2.0**36


def gen_covariates(cfg: DataGenConfig, rng: RngStream) -> np.ndarray:
    return rng.standard_normal(cfg.n * cfg.d).reshape(cfg.n, cfg.d)


def payoff(t_i: int, mean_others: float, x_i, u_i: float, eps_i: float,
           p: PayoffParameters) -> float:
    """Realized payoff of one agent; not treating is normalized to zero."""
    if not t_i:
        return 0.0
    return p.tau_direct + p.alpha * mean_others + float(np.dot(p.beta, x_i)) + u_i + eps_i


def gen_outcomes(t_star, x, u, p: PayoffParameters, rng: RngStream):
    """Outcomes with the grand-mean peer term held at the equilibrium rate.

    Returns (y, y1, y0); both potential outcomes share the same noise draw.
    """
    t_star = np.asarray(t_star)
    n = len(t_star)
    noise = p.sigma_noise * rng.standard_normal(n)
    common = p.alpha * t_star.mean() + np.asarray(x) @ p.gamma + np.asarray(u) + noise
    # snap to a 2**-36 grid so that y1 - y0 == tau holds bitwise for dyadic tau
    common = np.round(common * _GRID) / _GRID
    y0 = common
    y1 = p.tau_direct + common
    y = np.where(t_star == 1, y1, y0)
    return y, y1, y0


def draw_game(cfg: DataGenConfig, rng: RngStream) -> tuple[PayoffInputs, np.ndarray]:
    """Covariates, hidden confounders, payoff shocks and a random starting profile."""
    x = gen_covariates(cfg, rng)
    u = cfg.params.confounder_scale * rng.standard_normal(cfg.n)
    # eps is the shock difference eps(1) - eps(0), logistic so choice probabilities are sigmoids
    eps = rng.logistic(cfg.n, cfg.params.payoff_noise)
    init_t = rng.bernoulli(cfg.n, 0.5)
    return PayoffInputs(x, u, eps), init_t


def gen_dataset(cfg: DataGenConfig) -> Dataset:
    rng = cfg.rng()
    p = cfg.params
    inputs, init_t = draw_game(cfg, rng)
    t_star, br_state = solve_equilibrium(inputs, p, init_t, cfg.max_br_iterations)
    x, u = inputs.x, inputs.u
    y, y1, y0 = gen_outcomes(t_star, x, u, p, rng)
    s_true = state_from_treatments(t_star)
    s_true = type(s_true)(s_true.s, s_true.mean_rate, br_state.iterations, br_state.converged)
    oracle = OracleInfo(u=u, y1=y1, y0=y0, t_star=t_star, s_true=s_true,
                        tau_true=float(p.tau_direct),
                        equilibrium_converged=br_state.converged, params=p)
    return Dataset(y=y, t=t_star, x=x, oracle=oracle)


def true_sate(ds: Dataset) -> float:
    if ds.oracle is None:
        raise MissingOracle("true_sate needs the oracle potential outcomes")
    return float(np.mean(ds.oracle.y1 - ds.oracle.y0))
