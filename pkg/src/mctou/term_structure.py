"""Closed-form futures prices.

The futures price is exponential-affine in the factors,
``F(t, x) = exp(a(t)'x + beta(t))``, where the loading vector solves
``da/dt = K'a`` backward from ``a(T) = e1`` and ``beta`` integrates the
risk-neutral drift and convexity terms along it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad

from .model import ModelMatrices

BETA_ABS_TOL = 1e-10

E1 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class ContractSpec:
    maturity: float
    label: str = ""

    def __post_init__(self):
        if not self.maturity > 0:
            raise ValueError(f"contract maturity must be > 0, got {self.maturity}")


@dataclass(frozen=True)
class FactorState:
    x: tuple[float, float, float]
    t: float = 0.0

    def __post_init__(self):
        if len(self.x) != 3 or not all(math.isfinite(v) for v in self.x) or not math.isfinite(self.t):
            raise ValueError(f"factor state must be finite 3-vector, got {self.x!r} at t={self.t!r}")

    @property
    def vector(self) -> NDArray[np.float64]:
        return np.asarray(self.x, dtype=float)


@dataclass(frozen=True)
class FuturesCurvePoint:
    t: float
    maturity: float
    a: tuple[float, float, float]
    beta: float
    price: float
    label: str = ""


def _check_times(t, T):
    if t > T:
        raise ValueError(f"evaluation time {t} is after maturity {T}")


def _relaxation(r1: float, r2: float, tau: NDArray[np.float64]) -> NDArray[np.float64]:
    """(exp(-r2 tau) - exp(-r1 tau)) / (r1 - r2), in a stable form.

    Factoring out the slower decay keeps it free of overflow, and expm1
    keeps it accurate as the gap shrinks; at a zero gap it is the limit
    ``tau exp(-r tau)``.
    """
    lo, gap = min(r1, r2), abs(r1 - r2)
    if gap == 0.0:
        return tau * np.exp(-lo * tau)
    return np.exp(-lo * tau) * (-np.expm1(-gap * tau)) / gap


def loading_vectors(m: ModelMatrices, tau) -> NDArray[np.float64]:
    """Loading vectors for an array of times-to-maturity, shape ``(n, 3)``.

    Solved in closed form for every parameter set, including coincident
    rates where the relaxation terms pass to their limit.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau < 0):
        raise ValueError("time to maturity must be non-negative")
    p = m.params
    kappa, fast, slow = p.kappa, 1.0 / p.epsilon, p.delta
    out = np.empty((tau.size, 3))
    out[:, 0] = np.exp(-kappa * tau)
    out[:, 1] = kappa * _relaxation(fast, kappa, tau)
    out[:, 2] = kappa * _relaxation(slow, kappa, tau)
    return out


def loading_vector(m: ModelMatrices, t: float, T: float) -> NDArray[np.float64]:
    """``a(t) = exp(-(T - t) K') e1``."""
    _check_times(t, T)
    return loading_vectors(m, T - t)[0]


def beta_integrand(m: ModelMatrices, a: NDArray[np.float64]) -> NDArray[np.float64]:
    """Risk-neutral drift plus half the variance of ``a'X``; ``a`` is ``(n, 3)``."""
    G = m.cov_rate
    return a @ (m.mu - m.lam) + 0.5 * np.einsum("ni,ij,nj->n", a, G, a)


def beta_intercept(m: ModelMatrices, t: float, T: float) -> float:
    _check_times(t, T)
    if t == T:
        return 0.0

    def f(s):
        return float(beta_integrand(m, loading_vectors(m, T - s))[0])

    value, _ = quad(f, t, T, epsabs=BETA_ABS_TOL, epsrel=1e-13, limit=200)
    return value


def futures_price(m: ModelMatrices, s: FactorState, T: float) -> float:
    _check_times(s.t, T)
    a = loading_vector(m, s.t, T)
    return math.exp(float(a @ s.vector) + beta_intercept(m, s.t, T))


def curve_point(m: ModelMatrices, s: FactorState, contract: ContractSpec) -> FuturesCurvePoint:
    a = loading_vector(m, s.t, contract.maturity)
    beta = beta_intercept(m, s.t, contract.maturity)
    return FuturesCurvePoint(
        t=s.t,
        maturity=contract.maturity,
        a=tuple(float(v) for v in a),
        beta=beta,
        price=math.exp(float(a @ s.vector) + beta),
        label=contract.label,
    )


def curve(m: ModelMatrices, s: FactorState, contracts) -> list[FuturesCurvePoint]:
    """Futures curve at state ``s``, one point per contract, ordered by maturity."""
    contracts = list(contracts)
    if not contracts:
        raise ValueError("at least one contract is required")
    ordered = sorted(contracts, key=lambda c: c.maturity)
    return [curve_point(m, s, c) for c in ordered]
