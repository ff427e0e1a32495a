"""Acceptance checks, shared by ``stratdr selftest`` and the pytest suite.

Each check returns a CriterionResult; ``quick=True`` shrinks Monte Carlo
sizes for a fast smoke run (its verdicts are indicative only).
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .baselines import ipw_influence, matching_from_scores
from .datagen import DataGenConfig, draw_game
from .domain import PayoffParameters
from .equilibrium import brute_force_nash, solve_equilibrium
from .estimator import (
    SdrConfig,
    efficiency_bound,
    inference,
    oracle_nuisances,
    run_sdr,
    sdr_point_estimate,
)
from .harness import Cell, ScenarioConfig, replication_dataset, run_cell
from .nuisance import MISSPECIFIED, fit_nuisance
from .numerics import RngStream

SEED = 0


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] C{self.number} {self.name}: {self.detail}"


def nash_oracle(instances: int = 200, seed: int = SEED) -> CriterionResult:
    root = RngStream(seed, 1)
    converged = members = 0
    for k in range(instances):
        rng = root.substream("nash", k)
        n = 4 + k % 9
        alpha = float(rng.uniform(1)[0])
        tau = float(-1.5 + 2.5 * rng.uniform(1)[0])
        cfg = DataGenConfig(n=n, d=2, params=PayoffParameters.default(2, alpha=alpha, tau_direct=tau))
        inputs, init_t = draw_game(cfg, rng)
        t_star, state = solve_equilibrium(inputs, cfg.params, init_t, 100)
        if state.converged:
            converged += 1
            members += any(np.array_equal(t_star, p) for p in brute_force_nash(inputs, cfg.params))
    ok = converged > 0 and members == converged
    return CriterionResult(1, "Nash oracle equivalence", ok,
                           f"{members}/{converged} converged profiles are brute-force Nash "
                           f"({converged}/{instances} converged)")


def estimating_equations() -> CriterionResult:
    tol = 1e-12
    checks = {}
    tau, psi = sdr_point_estimate([3, 1], [1, 0], [0.5, 0.5], [0, 0], [0, 0])
    checks["SDR n=2"] = abs(tau - 2.0) <= tol and np.allclose(psi, [6, -2], atol=tol, rtol=0)
    # hand computation: psi = (4, 1, 2.25, 2), mean 2.3125
    tau, _ = sdr_point_estimate([3, 1, 2, 0], [1, 0, 1, 0], [0.5, 0.25, 0.8, 0.5],
                                [2, 2, 1, 1], [0, 1, 0, 1])
    checks["AIPW n=4"] = abs(tau - 2.3125) <= tol
    tau, _ = sdr_point_estimate([5, 1, 2], [1, 0, 1], [0.3, 0.6, 0.9], [5, 4, 2], [3, 1, 0])
    checks["AIPW zero residuals"] = abs(tau - 7.0 / 3.0) <= tol
    checks["IPW n=2"] = abs(np.mean(ipw_influence([3, 1], [1, 0], np.array([0.5, 0.5]))) - 2.0) <= tol
    diffs = matching_from_scores([4, 4, 3, 1], [1, 1, 0, 0], [0.2, 0.8, 0.21, 0.79])
    checks["Matching forced pairs"] = abs(diffs.mean() - 2.0) <= tol
    se, lo, hi = inference([0.0, 2.0], 0.95)
    checks["inference (0,2)"] = abs(se - 0.5**0.5) <= tol and abs(hi - 1 - 1.959963984540054 * se) <= 1e-12
    bad = [k for k, v in checks.items() if not v]
    return CriterionResult(2, "estimating-equation exactness", not bad,
                           f"{len(checks) - len(bad)}/{len(checks)} micro-examples exact to 1e-12"
                           + (f"; failed {bad}" if bad else ""))


def double_robustness(reps: int = 500, n: int = 2000, alpha: float = 0.5, seed: int = SEED) -> CriterionResult:
    est = {k: [] for k in ("prop_ok", "outcome_ok", "both_ok", "both_bad")}
    tau_true = None
    for r in range(reps):
        ds = replication_dataset(seed, alpha, n, 5, r)
        ob = ds.observed
        tau_true = ds.oracle.tau_true
        e, mu1, mu0 = oracle_nuisances(ds)
        wrong = fit_nuisance(ob, None, MISSPECIFIED, MISSPECIFIED)
        we, wmu1, wmu0 = wrong.predict(ob.x, None)
        est["prop_ok"].append(sdr_point_estimate(ob.y, ob.t, e, wmu1, wmu0)[0])
        est["outcome_ok"].append(sdr_point_estimate(ob.y, ob.t, we, mu1, mu0)[0])
        est["both_ok"].append(sdr_point_estimate(ob.y, ob.t, e, mu1, mu0)[0])
        est["both_bad"].append(sdr_point_estimate(ob.y, ob.t, we, wmu1, wmu0)[0])
    z = {}
    for k in ("prop_ok", "outcome_ok"):
        v = np.array(est[k])
        z[k] = (v.mean() - tau_true) / (v.std(ddof=1) / np.sqrt(reps))
    mab = {k: float(np.mean(np.abs(np.array(v) - tau_true))) for k, v in est.items()}
    ok = abs(z["prop_ok"]) <= 3 and abs(z["outcome_ok"]) <= 3 and mab["both_bad"] > mab["both_ok"]
    return CriterionResult(
        3, "double robustness", ok,
        f"z(true e, wrong mu)={z['prop_ok']:+.2f}, z(true mu, wrong e)={z['outcome_ok']:+.2f} (|z|<=3); "
        f"mean|bias| both-wrong={mab['both_bad']:.4f} > both-correct={mab['both_ok']:.4f}")


def _row(method, alpha, n, spec_cell, reps, seed, d=5):
    cfg = ScenarioConfig(alpha_grid=[alpha], n_grid=[n], d_grid=[d], replications=reps,
                         master_seed=seed, methods=[method], spec_cells=[spec_cell])
    return run_cell(cfg, Cell(method, alpha, n, d, spec_cell))


def misspecification_ordering(reps: int = 200, n: int = 2000, alpha: float = 0.5, seed: int = SEED) -> CriterionResult:
    res = {m: _row(m, alpha, n, "propensity_misspecified", reps, seed) for m in ("SDR", "IPW", "Matching")}
    mab = {m: r.row.mean_abs_bias for m, r in res.items()}
    ok = (not any(r.failed for r in res.values())
          and mab["SDR"] < mab["IPW"] and mab["SDR"] < mab["Matching"])
    return CriterionResult(4, "propensity-misspecified ordering", ok,
                           ", ".join(f"{m}={v:.4f}" for m, v in mab.items()) + " (need SDR lowest)")


def dr_ablation(reps: int = 500, n: int = 100, seed: int = SEED) -> CriterionResult:
    mab = {}
    failed = False
    for a in (0.1, 0.9):
        for m in ("SDR", "DR"):
            r = _row(m, a, n, "both_correct", reps, seed)
            failed |= r.failed
            mab[(m, a)] = r.row.mean_abs_bias
    reduction = 1.0 - mab[("SDR", 0.9)] / mab[("DR", 0.9)]
    gap_hi = mab[("DR", 0.9)] - mab[("SDR", 0.9)]
    gap_lo = mab[("DR", 0.1)] - mab[("SDR", 0.1)]
    ok = not failed and reduction >= 0.10 and gap_hi > gap_lo
    return CriterionResult(
        5, "SDR vs non-strategic DR", ok,
        f"alpha=0.9: SDR={mab[('SDR', 0.9)]:.4f} DR={mab[('DR', 0.9)]:.4f} reduction={reduction:+.1%} (need >=10%); "
        f"gap@0.9={gap_hi:+.4f} vs gap@0.1={gap_lo:+.4f} (need wider at 0.9)")


def coverage_normality(reps: int = 1000, n: int = 2000, alpha: float = 0.5, seed: int = SEED) -> CriterionResult:
    zs, cover = [], []
    for r in range(reps):
        ds = replication_dataset(seed, alpha, n, 5, r)
        e, mu1, mu0 = oracle_nuisances(ds)
        tau, psi = sdr_point_estimate(ds.y, ds.t, e, mu1, mu0)
        se, lo, hi = inference(psi, 0.95, tau)
        tt = ds.oracle.tau_true
        zs.append((tau - tt) / se)
        cover.append(lo <= tt <= hi)
    cov = float(np.mean(cover))
    skew = float(stats.skew(zs))
    kurt = float(stats.kurtosis(zs))
    ok = 0.90 <= cov <= 0.98 and abs(skew) <= 0.2 and abs(kurt) <= 0.5
    return CriterionResult(6, "CI coverage and normality", ok,
                           f"coverage={cov:.3f} in [0.90,0.98], skew={skew:+.3f} (|.|<=0.2), "
                           f"excess kurtosis={kurt:+.3f} (|.|<=0.5)")


def efficiency(n: int = 10_000, alpha: float = 0.5, seed: int = SEED) -> CriterionResult:
    ds = replication_dataset(seed, alpha, n, 5, 0)
    e, mu1, mu0 = oracle_nuisances(ds)
    tau, psi = sdr_point_estimate(ds.y, ds.t, e, mu1, mu0)
    n_v = float(np.mean((psi - tau) ** 2))
    bound = efficiency_bound(ds)
    ratio = n_v / bound
    return CriterionResult(7, "oracle efficiency bound", abs(ratio - 1.0) <= 0.15,
                           f"n*V_hat={n_v:.4f}, bound={bound:.4f}, ratio={ratio:.3f} (within 15%)")


def bias_stabilization(reps: int = 200, alpha: float = 0.5, seed: int = SEED) -> CriterionResult:
    res = {n: _row("SDR", alpha, n, "both_correct", reps, seed) for n in (10, 250, 500)}
    m = {n: r.row.mean_abs_bias for n, r in res.items()}
    failed = [n for n, r in res.items() if r.failed]
    rel = abs(m[250] - m[500]) / m[250]
    ok = not failed and rel < 0.25 and m[10] > 1.25 * m[250]
    detail = (f"n=250 {m[250]:.4f} vs n=500 {m[500]:.4f} rel diff={rel:.1%} (<25%); "
              f"n=10 {m[10]:.4f} (need > {1.25 * m[250]:.4f})")
    if failed:
        detail += "; cells over error budget: " + ", ".join(
            f"n={n} ({res[n].errors}/{reps} errored)" for n in failed)
    return CriterionResult(8, "bias stabilization in N", ok, detail)


def scaling(ns=(250, 500, 1000, 2000), iterations: int = 10, repeats: int = 3,
            seed: int = SEED) -> CriterionResult:
    cfg = SdrConfig(epsilon=1e-300, max_outer_iterations=iterations)
    times = []
    for n in ns:
        ob = replication_dataset(seed, 0.5, n, 5, 0).observed
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            run_sdr(ob, cfg)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    slope = float(np.polyfit(np.log(ns), np.log(times), 1)[0])
    return CriterionResult(9, "runtime scaling", slope <= 2.3,
                           f"log-log exponent={slope:.2f} (<=2.3); times="
                           + ", ".join(f"n={n}:{t * 1e3:.1f}ms" for n, t in zip(ns, times)))


def cli_determinism(replications: int = 20) -> CriterionResult:
    cfg = {"alpha_grid": [0.3, 0.9], "n_grid": [50, 100], "d_grid": [2],
           "replications": replications, "methods": ["SDR", "DR", "IPW"],
           "spec_cells": ["both_correct", "propensity_misspecified"]}
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "cfg.json").write_text(json.dumps(cfg))
        outs = []
        for tag, jobs in (("a", 1), ("b", 1), ("c", 8)):
            out = tmp / f"{tag}.csv"
            subprocess.run([sys.executable, "-m", "stratdr", "sweep", "--config", str(tmp / "cfg.json"),
                            "--seed", "7", "--jobs", str(jobs), "--out", str(out)],
                           check=False, capture_output=True)
            outs.append(out.read_bytes() if out.exists() else b"")
    ok = bool(outs[0]) and outs[0] == outs[1] == outs[2]
    return CriterionResult(10, "sweep determinism", ok,
                           f"repeat identical={outs[0] == outs[1]}, jobs1 vs jobs8 identical={outs[0] == outs[2]}, "
                           f"{len(outs[0])} bytes")


def run_all(quick: bool = True) -> list[CriterionResult]:
    if quick:
        return [
            nash_oracle(60),
            estimating_equations(),
            double_robustness(reps=100),
            misspecification_ordering(reps=40),
            dr_ablation(reps=100),
            coverage_normality(reps=200),
            efficiency(),
            bias_stabilization(reps=40),
            scaling(repeats=1),
            cli_determinism(replications=5),
        ]
    return [
        nash_oracle(), estimating_equations(), double_robustness(), misspecification_ordering(),
        dr_ablation(), coverage_normality(), efficiency(), bias_stabilization(), scaling(),
        cli_determinism(),
    ]
