"""Reproduction runs: certainty-equivalent grid, figure datasets, MC checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .dynamics import (SimulationGrid, factor_moments, futures_paths, gaussian_band,
                       optimal_strategy_grid, simulate_factors, simulate_wealth)
from .model import (DAYS_PER_MONTH, DAYS_PER_YEAR, TABLE1_GAMMA, TABLE1_HORIZON,
                    TABLE1_MATURITIES, ModelParams, assemble_matrices, check_params)
from .strategy import (PortfolioSpec, certainty_equivalent,
                       integrated_lambda_squared, lambda_squared, strategy_point)
from .term_structure import ContractSpec

CE_SCALE = 1e-4

DEFAULT_CONTRACTS = tuple(ContractSpec(T, label) for label, T in TABLE1_MATURITIES.items())

# Futures combinations in column order: singles, pairs, then all three.
COMBINATIONS = tuple(
    combo
    for r in (1, 2, 3)
    for combo in itertools.combinations(("T1", "T2", "T3"), r)
)

CORRELATION_GRID = tuple(
    (rho12, rho13) for rho12 in (0.0, 0.5, -0.5) for rho13 in (-0.5, 0.0, 0.5)
)

# Published certainty equivalents (x 1e-4), keyed by (rho12, rho13).
PUBLISHED_CE_TABLE = {
    (0.0, -0.5): (0.563, 1.58, 3.25, 5.36, 4.65, 4.41, 419),
    (0.0, 0.0): (0.502, 1.09, 1.74, 3.09, 2.62, 2.41, 417),
    (0.0, 0.5): (0.456, 0.837, 1.19, 2.88, 2.35, 2.01, 417),
    (0.5, -0.5): (0.561, 1.56, 3.23, 5.34, 4.64, 4.40, 543),
    (0.5, 0.0): (0.500, 1.08, 1.73, 3.08, 2.62, 2.40, 542),
    (0.5, 0.5): (0.454, 0.833, 1.18, 2.87, 2.34, 2.01, 541),
    (-0.5, -0.5): (0.565, 1.59, 3.27, 5.39, 4.66, 4.42, 571),
    (-0.5, 0.0): (0.504, 1.10, 1.75, 3.11, 2.63, 2.41, 569),
    (-0.5, 0.5): (0.457, 0.842, 1.20, 2.90, 2.36, 2.02, 569),
}

# Relative tolerance against the published grid, by number of contracts.
CE_TOLERANCE = {1: 0.01, 2: 0.01, 3: 0.05}

FIG4_DAYS = tuple(range(0, DAYS_PER_MONTH + 1))
FIG4_GAMMAS = (0.5, 1.0, 2.0, 4.0)
FIGURES = ("fig1", "fig2", "fig3", "fig4")


def combo_label(combo) -> str:
    return "+".join(combo)


def contracts_for(combo, maturities=None) -> tuple[ContractSpec, ...]:
    maturities = maturities or TABLE1_MATURITIES
    return tuple(ContractSpec(maturities[label], label) for label in combo)


@dataclass
class CEGridResult:
    """Certainty equivalents (in ``CE_SCALE`` units) for each correlation row."""

    rows: list[tuple[float, float]]
    columns: tuple[str, ...]
    values: NDArray[np.float64]
    cond_numbers: NDArray[np.float64]
    errors: dict = field(default_factory=dict)

    def reference_diff(self):
        """Yield ``(row, column, ours, published, rel_err, tol, ok)`` per cell."""
        for i, row in enumerate(self.rows):
            published = PUBLISHED_CE_TABLE.get(row)
            for j, (col, combo) in enumerate(zip(self.columns, COMBINATIONS)):
                ours = self.values[i, j]
                if published is None:
                    yield row, col, ours, math.nan, math.nan, math.nan, None
                    continue
                ref = published[j]
                tol = CE_TOLERANCE[len(combo)]
                rel = abs(ours - ref) / abs(ref)
                yield row, col, ours, ref, rel, tol, bool(rel <= tol)

    def csv_rows(self):
        header = ["rho12", "rho13"] + list(self.columns)
        out = [header]
        for i, (r12, r13) in enumerate(self.rows):
            if (r12, r13) in self.errors:
                out.append([repr(r12), repr(r13)] + ["invalid"] * len(self.columns))
            else:
                out.append([repr(r12), repr(r13)] + [repr(float(v)) for v in self.values[i]])
        return out

    def diff_rows(self):
        out = [["rho12", "rho13", "combination", "computed", "published", "rel_err", "tol", "pass",
                "cond_number"]]
        for (row, col, ours, ref, rel, tol, ok), cond in zip(self.reference_diff(),
                                                               self.cond_numbers.ravel()):
            out.append([repr(row[0]), repr(row[1]), col, repr(float(ours)), repr(float(ref)),
                        repr(float(rel)), repr(float(tol)),
                        {True: "pass", False: "FAIL", None: "n/a"}[ok], repr(float(cond))])
        return out


def run_ce_grid(params: ModelParams, overrides=CORRELATION_GRID, *,
                horizon: float = TABLE1_HORIZON, gamma: float = TABLE1_GAMMA,
                w: float = 0.0, maturities=None) -> CEGridResult:
    """Certainty equivalent of every futures combination for each correlation override.

    ``overrides`` holds ``(rho12, rho13)`` pairs or dicts of parameter
    updates.  Invalid overrides are skipped and recorded in ``errors``.
    """
    rows, errors = [], {}
    values = np.full((len(overrides), len(COMBINATIONS)), np.nan)
    conds = np.full_like(values, np.nan)
    for i, ov in enumerate(overrides):
        updates = ov if isinstance(ov, dict) else {"rho12": ov[0], "rho13": ov[1]}
        key = (updates.get("rho12", params.rho12), updates.get("rho13", params.rho13))
        rows.append(key)
        p = params.with_updates(**updates)
        problems = check_params(p)
        if problems:
            errors[key] = problems
            continue
        m = assemble_matrices(p)
        for j, combo in enumerate(COMBINATIONS):
            contracts = contracts_for(combo, maturities)
            spec = PortfolioSpec(contracts, gamma, horizon, w)
            values[i, j] = (certainty_equivalent(m, spec, 0.0, w) - w) / CE_SCALE
            conds[i, j] = lambda_squared(m, contracts, 0.0, return_cond=True)[1]
    return CEGridResult(rows, tuple(combo_label(c) for c in COMBINATIONS), values, conds, errors)


@dataclass
class FigureData:
    name: str
    columns: list[str]
    rows: list[list]

    def csv_rows(self):
        return [self.columns] + [[_fmt(v) for v in r] for r in self.rows]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _fig1(params: ModelParams, seed: int, n_paths: int) -> FigureData:
    m = assemble_matrices(params)
    grid = SimulationGrid.daily(DEFAULT_CONTRACTS[0].maturity, measure="P", seed=seed)
    bundle = futures_paths(m, simulate_factors(m, params.x0, grid, n_paths), DEFAULT_CONTRACTS)
    bands = []
    for t in grid.times:
        mean, cov = factor_moments(m, params.x0, float(t), "P")
        lo, hi = gaussian_band(mean, np.diag(cov))
        bands.append((mean, lo, hi))
    cols = ["path_id", "day", "t", "x1", "x2", "x3", "spot", "F_T1", "F_T2", "F_T3"]
    for i in (1, 2, 3):
        cols += [f"x{i}_mean", f"x{i}_lo95", f"x{i}_hi95"]
    rows = []
    for p in range(n_paths):
        for k, t in enumerate(grid.times):
            x = bundle.factors[p, k]
            r = [p, k, t, *x, math.exp(x[0]), *bundle.futures[p, k]]
            mean, lo, hi = bands[k]
            for i in range(3):
                r += [mean[i], lo[i], hi[i]]
            rows.append(r)
    return FigureData("fig1", cols, rows)


def _fig2(params: ModelParams) -> FigureData:
    m = assemble_matrices(params)
    times = SimulationGrid.daily(TABLE1_HORIZON).times
    cols = ["combination", "day", "t", "pi_T1", "pi_T2", "pi_T3", "lambda_sq"]
    rows = []
    for combo in COMBINATIONS:
        spec = PortfolioSpec(contracts_for(combo), TABLE1_GAMMA, TABLE1_HORIZON)
        for day, t in enumerate(times):
            sp = strategy_point(m, spec, float(t))
            pos = dict(zip(combo, sp.pi))
            rows.append([combo_label(combo), day, t,
                         *(pos.get(lbl, "") for lbl in ("T1", "T2", "T3")), sp.lambda_sq])
    return FigureData("fig2", cols, rows)


def _fig3(params: ModelParams, seed: int) -> FigureData:
    m = assemble_matrices(params)
    spec = PortfolioSpec(DEFAULT_CONTRACTS, TABLE1_GAMMA, TABLE1_HORIZON)
    grid = SimulationGrid.daily(spec.horizon, measure="P", seed=seed)
    bundle = futures_paths(m, simulate_factors(m, params.x0, grid, 1), spec.contracts)
    pi = optimal_strategy_grid(m, spec, grid.times)
    bundle = simulate_wealth(m, bundle, pi[:-1], spec.w0)
    cols = ["day", "t", "pi_T1", "pi_T2", "pi_T3", "units_T1", "units_T2", "units_T3", "wealth"]
    rows = []
    for k, t in enumerate(grid.times):
        units = pi[k] / bundle.futures[0, k]
        rows.append([k, t, *pi[k], *units, bundle.wealth[0, k]])
    return FigureData("fig3", cols, rows)


def _fig4(params: ModelParams) -> FigureData:
    m = assemble_matrices(params)
    cols = ["day", "horizon", "gamma", "ce"]
    rows = []
    for day in FIG4_DAYS:
        horizon = day / DAYS_PER_YEAR
        integral = integrated_lambda_squared(m, DEFAULT_CONTRACTS, 0.0, horizon) if day else 0.0
        for gamma in FIG4_GAMMAS:
            rows.append([day, horizon, gamma, integral / (2.0 * gamma)])
    return FigureData("fig4", cols, rows)


def run_figure_data(params: ModelParams, which: str, *, seed: int = 42,
                    n_paths: int = 1) -> FigureData:
    """Plot-ready dataset for one of ``fig1`` .. ``fig4``."""
    if which == "fig1":
        return _fig1(params, seed, n_paths)
    if which == "fig2":
        return _fig2(params)
    if which == "fig3":
        return _fig3(params, seed)
    if which == "fig4":
        return _fig4(params)
    raise ValueError(f"unknown figure {which!r}; expected one of {FIGURES}")


@dataclass
class MCUtilityReport:
    n_paths: int
    seed: int
    closed_form: float
    mc_mean: float
    mc_stderr: float
    z_score: float
    passed: bool
    perturbation: float
    perturbed_mean: float
    perturbed_stderr: float
    separation_se: float
    perturbed_worse: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _mean_se(x):
    if len(x) < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def verify_mc_utility(params: ModelParams, spec: PortfolioSpec, n_paths: int = 50_000,
                      seed: int = 42, *, perturbation: float = 1.5,
                      workers: int = 1) -> MCUtilityReport:
    """Compare simulated terminal utility under the optimal strategy to the closed form.

    The perturbed strategy reuses the same paths; it must lose by at least
    three combined standard errors.
    """
    if n_paths < 1000:
        raise ValueError(f"n_paths must be >= 1000, got {n_paths}")
    m = assemble_matrices(params)
    grid = SimulationGrid.daily(spec.horizon, measure="P", seed=seed)
    bundle = simulate_factors(m, params.x0, grid, n_paths, workers=workers)
    pi = optimal_strategy_grid(m, spec, grid.times[:-1])
    closed = -math.exp(-spec.gamma * spec.w0
                       - 0.5 * integrated_lambda_squared(m, spec.contracts, 0.0, spec.horizon))

    def utility(strategy):
        wealth = simulate_wealth(m, bundle, strategy, spec.w0, spec.contracts).wealth[:, -1]
        return -np.exp(-spec.gamma * wealth)

    mean, se = _mean_se(utility(pi))
    p_mean, p_se = _mean_se(utility(perturbation * pi))
    # Constant utilities (zero strategy) leave only rounding noise in se.
    floor = 64 * np.finfo(float).eps * abs(closed)
    if se <= floor:
        z = 0.0 if abs(mean - closed) <= floor else math.inf
    else:
        z = (mean - closed) / se
    combined = math.hypot(se, p_se)
    separation = (mean - p_mean) / combined if combined > 0 else (math.inf if mean > p_mean else 0.0)
    return MCUtilityReport(
        n_paths=n_paths, seed=seed, closed_form=closed, mc_mean=mean, mc_stderr=se,
        z_score=z, passed=bool(abs(z) <= 3.0), perturbation=perturbation,
        perturbed_mean=p_mean, perturbed_stderr=p_se, separation_se=separation,
        perturbed_worse=bool(separation >= 3.0),
    )


__all__ = [
    "CEGridResult", "COMBINATIONS", "CORRELATION_GRID", "FIGURES", "FigureData", "MCUtilityReport",
    "PUBLISHED_CE_TABLE", "run_ce_grid", "run_figure_data", "verify_mc_utility",
]
