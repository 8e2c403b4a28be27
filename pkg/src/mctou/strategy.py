"""Optimal dynamic futures portfolios under exponential utility.

For a set of M non-redundant contracts the futures returns are

    dF/F = mu_F(t) dt + Sigma_F(t) dZ^P,   mu_F = A lambda,  Sigma_F = A Sigma C

with ``A`` stacking the contracts' loading vectors.  The optimal cash
positions, the value function and the certainty equivalent all depend only
on time through the aggregate squared Sharpe ratio

    Lambda^2(t) = mu_F' (Sigma_F Sigma_F')^{-1} mu_F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .model import ModelMatrices
from .term_structure import ContractSpec, loading_vectors

MAX_CONDITION = 1e14
LAMBDA_SQ_ABS_TOL = 1e-10


class NumericalError(ArithmeticError):
    """Linear algebra on the futures covariance cannot be trusted."""


class RedundantContractError(NumericalError):
    """Contract loadings are linearly dependent (rank of Sigma_F below M)."""


class InvalidPortfolio(ValueError):
    pass


@dataclass(frozen=True)
class PortfolioSpec:
    contracts: tuple[ContractSpec, ...]
    gamma: float
    horizon: float
    w0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "contracts", tuple(self.contracts))
        n = len(self.contracts)
        if not 1 <= n <= 3:
            raise InvalidPortfolio(f"portfolio must hold 1 to 3 contracts, got {n}")
        maturities = [c.maturity for c in self.contracts]
        seen = set()
        for c in self.contracts:
            if c.maturity in seen:
                raise InvalidPortfolio(
                    f"duplicate maturity {c.maturity!r} ({c.label or 'unlabelled'}): "
                    "contracts must have distinct maturities"
                )
            seen.add(c.maturity)
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidPortfolio(f"gamma must be > 0, got {self.gamma}")
        if not 0 < self.horizon <= min(maturities):
            raise InvalidPortfolio(
                f"horizon must satisfy 0 < horizon <= earliest maturity {min(maturities)}, "
                f"got {self.horizon}"
            )
        if not math.isfinite(self.w0):
            raise InvalidPortfolio(f"w0 must be finite, got {self.w0}")

    @property
    def maturities(self) -> NDArray[np.float64]:
        return np.array([c.maturity for c in self.contracts])

    def with_gamma(self, gamma: float) -> "PortfolioSpec":
        return PortfolioSpec(self.contracts, gamma, self.horizon, self.w0)

    def with_horizon(self, horizon: float) -> "PortfolioSpec":
        return PortfolioSpec(self.contracts, self.gamma, horizon, self.w0)


@dataclass(frozen=True)
class StrategyPoint:
    t: float
    pi: NDArray[np.float64]
    mu_F: NDArray[np.float64]
    Sigma_F: NDArray[np.float64]
    lambda_sq: float
    cond_number: float


def _maturities(contracts: Sequence[ContractSpec]) -> NDArray[np.float64]:
    return np.array([c.maturity for c in contracts], dtype=float)


def _redundant_label(Sigma_F: NDArray[np.float64], contracts) -> str:
    # The redundant contract is the one best explained by the others.
    best, best_resid = 0, math.inf
    for k in range(len(contracts)):
        others = np.delete(Sigma_F, k, axis=0)
        row = Sigma_F[k]
        if others.size:
            coef, *_ = np.linalg.lstsq(others.T, row, rcond=None)
            resid = np.linalg.norm(row - others.T @ coef) / max(np.linalg.norm(row), 1e-300)
        else:
            resid = np.linalg.norm(row)
        if resid < best_resid:
            best, best_resid = k, resid
    c = contracts[best]
    return c.label or f"maturity={c.maturity!r}"


def futures_loadings(m: ModelMatrices, contracts: Sequence[ContractSpec], t: float):
    """Drift ``mu_F`` (M,) and volatility loadings ``Sigma_F`` (M, 3) at ``t``."""
    T = _maturities(contracts)
    if np.any(t > T):
        raise ValueError(f"t={t} is after the earliest maturity {T.min()}")
    A = loading_vectors(m, T - t)
    mu_F = A @ m.lam
    Sigma_F = A @ m.Sigma @ m.C
    if np.linalg.matrix_rank(Sigma_F) < len(T):
        raise RedundantContractError(
            f"futures loadings are rank deficient at t={t}; "
            f"redundant contract: {_redundant_label(Sigma_F, contracts)}"
        )
    return mu_F, Sigma_F


def _solve(mu_F, Sigma_F):
    G = Sigma_F @ Sigma_F.T
    cond = float(np.linalg.cond(G))
    if not cond <= MAX_CONDITION:
        raise NumericalError(
            f"futures covariance condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}; "
            "use fewer or more widely spaced contracts"
        )
    try:
        factor = cho_factor(G, lower=True)
    except LinAlgError as exc:
        raise NumericalError(f"futures covariance is not positive definite: {exc}") from exc
    return cho_solve(factor, mu_F), cond


def lambda_squared(m: ModelMatrices, contracts, t: float, *, return_cond: bool = False):
    """Aggregate squared Sharpe ratio at ``t``.

    With ``return_cond=True`` returns ``(lambda_sq, cond)`` where ``cond`` is
    the 2-norm condition number of ``Sigma_F Sigma_F'``.
    """
    mu_F, Sigma_F = futures_loadings(m, contracts, t)
    x, cond = _solve(mu_F, Sigma_F)
    # Clamp rounding noise; the exact value is a quadratic form of an SPD inverse.
    value = max(float(mu_F @ x), 0.0)
    return (value, cond) if return_cond else value


def strategy_point(m: ModelMatrices, spec: PortfolioSpec, t: float) -> StrategyPoint:
    if t > spec.horizon:
        raise ValueError(f"t={t} is after the trading horizon {spec.horizon}")
    mu_F, Sigma_F = futures_loadings(m, spec.contracts, t)
    x, cond = _solve(mu_F, Sigma_F)
    return StrategyPoint(
        t=t, pi=x / spec.gamma, mu_F=mu_F, Sigma_F=Sigma_F,
        lambda_sq=max(float(mu_F @ x), 0.0), cond_number=cond,
    )


def optimal_strategy(m: ModelMatrices, spec: PortfolioSpec, t: float) -> NDArray[np.float64]:
    """Optimal cash amounts held in each contract at time ``t``.

    Deterministic in time: neither wealth nor the factor state enters.
    """
    return strategy_point(m, spec, t).pi


def single_contract_strategy(m: ModelMatrices, contract: ContractSpec, gamma: float, t: float) -> float:
    """Scalar form of the optimal position when only one contract is traded."""
    a = loading_vectors(m, contract.maturity - t)[0]
    sigma_F = m.C.T @ m.Sigma.T @ a
    return float(a @ m.lam) / (gamma * float(sigma_F @ sigma_F))


def integrated_lambda_squared(m: ModelMatrices, contracts, t: float, horizon: float) -> float:
    """``int_t^horizon Lambda^2(s) ds`` by adaptive quadrature."""
    if t > horizon:
        raise ValueError(f"t={t} is after the horizon {horizon}")
    if t == horizon:
        return 0.0
    value, _ = quad(
        lambda s: lambda_squared(m, contracts, s), t, horizon,
        epsabs=LAMBDA_SQ_ABS_TOL, epsrel=1e-12, limit=200,
    )
    return value


def value_function(m: ModelMatrices, spec: PortfolioSpec, t: float, w: float) -> float:
    """``-exp(-gamma w - 0.5 int_t^T Lambda^2)``."""
    if t > spec.horizon:
        raise ValueError(f"t={t} is after the trading horizon {spec.horizon}")
    integral = integrated_lambda_squared(m, spec.contracts, t, spec.horizon)
    return -math.exp(-spec.gamma * w - 0.5 * integral)


def certainty_equivalent(m: ModelMatrices, spec: PortfolioSpec, t: float, w: float) -> float:
    """Wealth plus ``int_t^T Lambda^2 / (2 gamma)``."""
    if t > spec.horizon:
        raise ValueError(f"t={t} is after the trading horizon {spec.horizon}")
    integral = integrated_lambda_squared(m, spec.contracts, t, spec.horizon)
    return w + integral / (2.0 * spec.gamma)


def strategy_path(m: ModelMatrices, spec: PortfolioSpec, times) -> list[StrategyPoint]:
    """Strategy evaluated exactly at each grid time (no interpolation)."""
    return [strategy_point(m, spec, float(t)) for t in times]
