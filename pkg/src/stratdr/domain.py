"""Core types of the strategic causal model and dataset validation/serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class EquilibriumState:
    """Per-agent strategic state (leave-one-out mean treatment of others)."""

    s: np.ndarray
    mean_rate: float
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "s", _frozen(self.s))


@dataclass(frozen=True)
class PayoffParameters:
    tau_direct: float
    alpha: float
    beta: np.ndarray
    gamma: np.ndarray
    sigma_noise: float = 1.0
    payoff_noise: float = 1.0
    # scale of the hidden confounder u; 0 switches hidden confounding off
    confounder_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen(self.beta))
        object.__setattr__(self, "gamma", _frozen(self.gamma))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.sigma_noise < 0 or self.payoff_noise <= 0 or self.confounder_scale < 0:
            raise ValueError("noise scales must be positive")
        if self.beta.shape != self.gamma.shape:
            raise ValueError("beta and gamma must have the same length")

    @classmethod
    def default(cls, d: int = 5, alpha: float = 0.5, **overrides) -> "PayoffParameters":
        if d < 1:
            raise ValueError(f"need at least one covariate, got d={d}")
        w = np.full(d, 0.5 / np.sqrt(d))
        kw = dict(tau_direct=0.5, alpha=alpha, beta=w, gamma=w, sigma_noise=1.0, payoff_noise=1.0)
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "tau_direct": self.tau_direct,
            "alpha": self.alpha,
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "sigma_noise": self.sigma_noise,
            "payoff_noise": self.payoff_noise,
            "confounder_scale": self.confounder_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PayoffParameters":
        return cls(**d)


@dataclass(frozen=True)
class OracleInfo:
    """Hidden ground truth of a synthetic dataset. Estimators never see this."""

    u: np.ndarray
    y1: np.ndarray
    y0: np.ndarray
    t_star: np.ndarray
    s_true: EquilibriumState
    tau_true: float
    equilibrium_converged: bool
    params: PayoffParameters | None = None

    def __post_init__(self):
        for name in ("u", "y1", "y0"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "t_star", _frozen(self.t_star, np.int8))

    def to_dict(self) -> dict:
        return {
            "u": self.u.tolist(),
            "y1": self.y1.tolist(),
            "y0": self.y0.tolist(),
            "t_star": self.t_star.tolist(),
            "s_true": {
                "s": self.s_true.s.tolist(),
                "mean_rate": self.s_true.mean_rate,
                "iterations": self.s_true.iterations,
                "converged": self.s_true.converged,
            },
            "tau_true": self.tau_true,
            "equilibrium_converged": self.equilibrium_converged,
            "params": None if self.params is None else self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OracleInfo":
        d = dict(d)
        d["s_true"] = EquilibriumState(**d["s_true"])
        if d.get("params") is not None:
            d["params"] = PayoffParameters.from_dict(d["params"])
        return cls(**d)


@dataclass(frozen=True)
class ObservedData:
    """What an analyst sees: outcome, binary treatment, covariates."""

    y: np.ndarray
    t: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "t", _frozen(self.t, np.int8))
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def require_both_arms(self) -> None:
        k = int(self.t.sum())
        if k == 0 or k == self.n:
            from .errors import ArmTooSmall

            raise ArmTooSmall(f"both treatment arms must be present (treated={k}, n={self.n})")


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    t: np.ndarray
    x: np.ndarray
    oracle: OracleInfo | None = None

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y))
        # keep t as float so corrupted (non-binary) input is representable for validation
        object.__setattr__(self, "t", _frozen(self.t))
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def observed(self) -> ObservedData:
        return ObservedData(self.y, self.t.astype(np.int8), self.x)


@dataclass(frozen=True)
class EstimateReport:
    tau_hat: float
    std_error: float
    ci_low: float
    ci_high: float
    influence: np.ndarray
    iterations: int
    converged: bool
    method_name: str
    estimand: str = "ATE"
    trace: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "influence", _frozen(self.influence))

    def to_dict(self) -> dict:
        return {
            "method": self.method_name,
            "tau_hat": self.tau_hat,
            "std_error": self.std_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "iterations": self.iterations,
            "converged": self.converged,
            "estimand": self.estimand,
        }


def validate_dataset(ds: Dataset) -> list[str]:
    """Return human-readable invariant violations; empty means the dataset is usable."""
    out: list[str] = []
    y, t, x = ds.y, ds.t, ds.x
    n = len(y)
    if len(t) != n:
        out.append(f"t: length {len(t)} != n={n}")
    if x.shape[0] != n:
        out.append(f"x: {x.shape[0]} rows != n={n}")
    if x.shape[1] < 1:
        out.append("x: no covariate columns")
    for i in np.flatnonzero(~np.isfinite(y)):
        out.append(f"y: non-finite value at index {i}")
    for i, j in zip(*np.nonzero(~np.isfinite(x))):
        out.append(f"x: non-finite value at index {i}, column {j}")
    bad_t = np.flatnonzero(~np.isin(t, (0.0, 1.0)))
    for i in bad_t:
        out.append(f"t: non-binary value {t[i]!r} at index {i}")
    if len(bad_t) == 0 and len(t):
        k = int(t.sum())
        if k < 1:
            out.append("t: no treated units")
        if k > len(t) - 1:
            out.append("t: no control units")
    if ds.oracle is not None and len(t) == n and len(bad_t) == 0:
        o = ds.oracle
        if not (len(o.y1) == len(o.y0) == len(o.u) == n):
            out.append("oracle: potential-outcome lengths inconsistent with n")
        else:
            implied = np.where(t == 1, o.y1, o.y0)
            for i in np.flatnonzero(implied != y):
                out.append(f"oracle: y at index {i} inconsistent with potential outcomes")
    return out


# -- serialization ---------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def oracle_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".oracle.json")


def write_dataset(ds: Dataset, path: str | Path) -> None:
    """Write the observed projection as CSV (y,t,x1..xd) and the oracle as sidecar JSON."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "t"] + [f"x{j + 1}" for j in range(ds.d)])
        for i in range(ds.n):
            w.writerow([_fmt(ds.y[i]), str(int(ds.t[i]))] + [_fmt(v) for v in ds.x[i]])
    if ds.oracle is not None:
        oracle_path(path).write_text(json.dumps(ds.oracle.to_dict()))


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:2] != ["y", "t"]:
        raise ValueError(f"{path}: header must start with y,t")
    arr = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    oracle = None
    op = oracle_path(path)
    if op.exists():
        oracle = OracleInfo.from_dict(json.loads(op.read_text()))
    return Dataset(y=arr[:, 0], t=arr[:, 1], x=arr[:, 2:], oracle=oracle)
