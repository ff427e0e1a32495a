"""Monte Carlo experiment sweeps: replicate, estimate, aggregate, write tables."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from pathlib import Path

import numpy as np

from .baselines import (
    estimate_aipw,
    estimate_ipw,
    estimate_matching,
    estimate_s_learner,
    estimate_t_learner,
)
from .datagen import DataGenConfig, gen_dataset
from .domain import Dataset
from .errors import ConfigError, StratDRError
from .estimator import SdrConfig, fit_sdr, run_dr_nonstrategic, run_sdr, sensitivity_from_fit
from .nuisance import CORRECT, MISSPECIFIED
from .numerics import derive_stream_id

log = logging.getLogger(__name__)

METHODS = {
    "SDR": run_sdr,
    "DR": run_dr_nonstrategic,
    "AIPW": estimate_aipw,
    "IPW": estimate_ipw,
    "Matching": estimate_matching,
    "S-Learner": estimate_s_learner,
    "T-Learner": estimate_t_learner,
}

SPEC_CELLS = {
    "both_correct": (CORRECT, CORRECT),
    "outcome_misspecified": (CORRECT, MISSPECIFIED),
    "propensity_misspecified": (MISSPECIFIED, CORRECT),
    "both_misspecified": (MISSPECIFIED, MISSPECIFIED),
}

ERROR_BUDGET = 0.10

CSV_HEADER = [
    "method", "alpha", "n", "d", "spec_cell", "mean_abs_bias", "sd_abs_bias",
    "mean_bias", "mse", "ci_coverage", "mean_iterations", "convergence_rate",
    "replications_used",
]


@dataclass
class ScenarioConfig:
    alpha_grid: list = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    n_grid: list = field(default_factory=lambda: [10, 50, 100, 250, 500])
    d_grid: list = field(default_factory=lambda: [2, 5, 10, 20])
    replications: int = 200
    master_seed: int = 0
    methods: list = field(default_factory=lambda: list(METHODS))
    spec_cells: list = field(default_factory=lambda: ["both_correct"])
    gamma_grid: list | None = None
    sdr: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.spec_cells, str):
            self.spec_cells = [self.spec_cells]
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        for name in ("alpha_grid", "n_grid", "d_grid", "methods", "spec_cells"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be non-empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; known: {list(METHODS)}")
        bad = [c for c in self.spec_cells if c not in SPEC_CELLS]
        if bad:
            raise ConfigError(f"unknown spec cells {bad}; known: {list(SPEC_CELLS)}")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha_grid):
            raise ConfigError("alpha values must lie in [0, 1]")
        if any(n < 2 for n in self.n_grid) or any(d < 1 for d in self.d_grid):
            raise ConfigError("n values must be >= 2 and d values >= 1")
        if self.gamma_grid is not None and (
                not self.gamma_grid or any(g < 1.0 for g in self.gamma_grid)):
            raise ConfigError("gamma_grid must be non-empty with all values >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        raw = dict(raw)
        if "spec_cell" in raw:
            raw["spec_cells"] = raw.pop("spec_cell")
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def cells(self) -> list["Cell"]:
        out = [Cell(m, float(a), int(n), int(d), c) for m, a, n, d, c in product(
            self.methods, self.alpha_grid, self.n_grid, self.d_grid, self.spec_cells)]
        return sorted(out, key=Cell.sort_key)


@dataclass(frozen=True)
class Cell:
    method: str
    alpha: float
    n: int
    d: int
    spec_cell: str

    def sort_key(self):
        return (self.method, self.alpha, self.n, self.d, self.spec_cell)

    def sdr_config(self, overrides: dict) -> SdrConfig:
        pmap, omap = SPEC_CELLS[self.spec_cell]
        return SdrConfig(propensity_map=pmap, outcome_map=omap, **overrides)


@dataclass(frozen=True)
class Replication:
    r: int
    tau_true: float
    tau_hat: float = math.nan
    std_error: float = math.nan
    ci_low: float = math.nan
    ci_high: float = math.nan
    iterations: int = 0
    converged: bool = False
    error: str | None = None


@dataclass(frozen=True)
class MetricsRow:
    method: str
    alpha: float
    n: int
    d: int
    spec_cell: str
    mean_abs_bias: float
    sd_abs_bias: float
    mean_bias: float
    mse: float
    ci_coverage: float
    mean_iterations: float
    convergence_rate: float
    replications_used: int


@dataclass
class CellResult:
    row: MetricsRow
    replications: list
    errors: int
    elapsed: float

    @property
    def failed(self) -> bool:
        return self.errors > ERROR_BUDGET * len(self.replications)


def replication_dataset(master_seed: int, alpha: float, n: int, d: int, r: int) -> Dataset:
    """Dataset for replication ``r`` of a design point.

    The stream key covers the data-generating design only, so every method
    and specification cell sees the same datasets (common random numbers),
    and no cell depends on which other cells are in the sweep.
    """
    sid = derive_stream_id("data", float(alpha), int(n), int(d), int(r))
    return gen_dataset(DataGenConfig.default(n, d, alpha=alpha, seed=master_seed, stream_id=sid))


def run_replication(cell: Cell, r: int, master_seed: int, sdr_overrides: dict | None = None) -> Replication:
    ds = replication_dataset(master_seed, cell.alpha, cell.n, cell.d, r)
    tau_true = ds.oracle.tau_true
    try:
        rep = METHODS[cell.method](ds.observed, cell.sdr_config(sdr_overrides or {}))
    except (StratDRError, np.linalg.LinAlgError) as exc:
        return Replication(r, tau_true, error=f"{type(exc).__name__}: {exc}")
    return Replication(r, tau_true, rep.tau_hat, rep.std_error, rep.ci_low, rep.ci_high,
                       rep.iterations, rep.converged)


def aggregate(cell: Cell, reps: list[Replication]) -> MetricsRow:
    ok = [r for r in reps if r.error is None]
    if not ok:
        nan = math.nan
        return MetricsRow(cell.method, cell.alpha, cell.n, cell.d, cell.spec_cell,
                          nan, nan, nan, nan, nan, nan, nan, 0)
    err = np.array([r.tau_hat - r.tau_true for r in ok])
    absb = np.abs(err)
    cover = np.array([r.ci_low <= r.tau_true <= r.ci_high for r in ok], dtype=float)
    return MetricsRow(
        method=cell.method, alpha=cell.alpha, n=cell.n, d=cell.d, spec_cell=cell.spec_cell,
        mean_abs_bias=float(absb.mean()),
        sd_abs_bias=float(absb.std(ddof=1)) if len(ok) > 1 else 0.0,
        mean_bias=float(err.mean()),
        mse=float(np.mean(err ** 2)),
        ci_coverage=float(cover.mean()),
        mean_iterations=float(np.mean([r.iterations for r in ok])),
        convergence_rate=float(np.mean([r.converged for r in ok])),
        replications_used=len(ok),
    )


def run_cell(cfg: ScenarioConfig, cell: Cell) -> CellResult:
    start = time.perf_counter()
    reps = [run_replication(cell, r, cfg.master_seed, cfg.sdr) for r in range(cfg.replications)]
    errors = sum(r.error is not None for r in reps)
    if errors:
        log.info("%s: %d/%d replications failed", cell, errors, len(reps))
    return CellResult(aggregate(cell, reps), reps, errors, time.perf_counter() - start)


def _run_cell_star(args):
    return run_cell(*args)


def run_sweep(cfg: ScenarioConfig, jobs: int = 1) -> list[CellResult]:
    """Run every cell of the grid; results come back in lexicographic cell order."""
    cells = cfg.cells()
    if jobs <= 1 or len(cells) == 1:
        return [run_cell(cfg, c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell_star, [(cfg, c) for c in cells]))


@dataclass(frozen=True)
class SensitivityRow:
    alpha: float
    n: int
    d: int
    spec_cell: str
    gamma: float
    tau_low: float
    tau_high: float
    width: float
    replications_used: int


def _sensitivity_cell(args) -> list[SensitivityRow]:
    cfg, alpha, n, d, spec_cell = args
    cell = Cell("SDR", alpha, n, d, spec_cell)
    sdr_cfg = cell.sdr_config(cfg.sdr)
    bounds = {g: [] for g in cfg.gamma_grid}
    for r in range(cfg.replications):
        ds = replication_dataset(cfg.master_seed, alpha, n, d, r)
        try:
            fit = fit_sdr(ds.observed, sdr_cfg)
        except StratDRError:
            continue
        for g in cfg.gamma_grid:
            bounds[g].append(sensitivity_from_fit(ds.y, ds.t, fit, g, sdr_cfg.truncation))
    rows = []
    for g in cfg.gamma_grid:
        b = np.array(bounds[g]).reshape(-1, 2)
        lo, hi = (b.mean(axis=0) if len(b) else (math.nan, math.nan))
        rows.append(SensitivityRow(alpha, n, d, spec_cell, float(g), float(lo), float(hi),
                                   float(hi - lo), len(b)))
    return rows


def run_sensitivity(cfg: ScenarioConfig, jobs: int = 1) -> list[SensitivityRow]:
    if not cfg.gamma_grid:
        raise ConfigError("sensitivity analysis needs a non-empty gamma_grid")
    tasks = [(cfg, float(a), int(n), int(d), c) for a, n, d, c in product(
        cfg.alpha_grid, cfg.n_grid, cfg.d_grid, cfg.spec_cells)]
    tasks.sort(key=lambda t: t[1:])
    if jobs <= 1:
        parts = [_sensitivity_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_sensitivity_cell, tasks))
    return [row for part in parts for row in part]


# -- output ----------------------------------------------------------------

def _cell_text(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_rows(rows, fmt: str, path: str | Path, header: list[str] | None = None) -> None:
    """Write dataclass rows as CSV (17 significant digits) or a JSON array."""
    path = Path(path)
    if header is None:
        header = CSV_HEADER if not rows else [f.name for f in fields(rows[0])]
    dicts = [asdict(r) for r in rows]
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for d in dicts:
                    w.writerow([_cell_text(d[k]) for k in header])
        elif fmt == "json":
            path.write_text(json.dumps([{k: d[k] for k in header} for d in dicts], indent=1) + "\n")
        else:
            raise ConfigError(f"unknown output format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_outputs(rows: list[MetricsRow], fmt: str, path: str | Path) -> None:
    write_rows(rows, fmt, path, CSV_HEADER)


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    types = {f.name: f.type for f in fields(MetricsRow)}
    out = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for k, v in rec.items():
                t = types[k]
                kw[k] = int(v) if t in ("int", int) else float(v) if t in ("float", float) else v
            out.append(MetricsRow(**kw))
    return out


def write_replications(results: list[CellResult], path: str | Path) -> None:
    header = ["method", "alpha", "n", "d", "spec_cell"] + [f.name for f in fields(Replication)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for res in results:
            key = [res.row.method, res.row.alpha, res.row.n, res.row.d, res.row.spec_cell]
            for rep in res.replications:
                w.writerow([_cell_text(v) for v in key + list(asdict(rep).values())])
