"""Monte Carlo paths for factors, futures and wealth.

Factor paths use the exact Gaussian transition of the linear SDE on each
grid step, so they carry no discretisation bias.  Every path draws its own
standard normals from a Philox stream keyed by ``(seed, path index)``; the
same normals drive the factors and the wealth increments, and results do
not depend on how paths are split across worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm, hadamard

from .model import DAYS_PER_YEAR, ModelMatrices
from .strategy import PortfolioSpec, futures_loadings, strategy_point
from .term_structure import ContractSpec, beta_intercept, loading_vectors

_CHUNK = 4096
# Orthogonal and symmetric; conjugating by it hides triangular structure
# from expm, whose triangular shortcut loses accuracy for repeated rates.
_H4 = hadamard(4) / 2.0


@dataclass(frozen=True)
class SimulationGrid:
    t0: float
    t_end: float
    n_steps: int
    measure: str = "P"
    seed: int = 42

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ValueError(f"t_end must exceed t0, got [{self.t0}, {self.t_end}]")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if self.measure not in ("P", "Q"):
            raise ValueError(f"measure must be 'P' or 'Q', got {self.measure!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @classmethod
    def daily(cls, horizon: float, t0: float = 0.0, measure: str = "P", seed: int = 42,
              days_per_year: int = DAYS_PER_YEAR) -> "SimulationGrid":
        """One step per trading day from ``t0`` to ``t0 + horizon``."""
        n = max(1, int(round(horizon * days_per_year)))
        return cls(t0, t0 + horizon, n, measure, seed)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t0) / self.n_steps

    @property
    def times(self) -> NDArray[np.float64]:
        return np.linspace(self.t0, self.t_end, self.n_steps + 1)


@dataclass(frozen=True)
class PathBundle:
    """Simulated paths on a common grid.

    Arrays are indexed ``[path, time, ...]``.  ``noise`` holds the standard
    normals of every step so wealth can be driven by the same shocks.
    """

    times: NDArray[np.float64]
    factors: NDArray[np.float64]
    noise: NDArray[np.float64]
    measure: str
    seed: int
    futures: Optional[NDArray[np.float64]] = None
    contracts: tuple[ContractSpec, ...] = ()
    strategy: Optional[NDArray[np.float64]] = None
    wealth: Optional[NDArray[np.float64]] = None

    @property
    def n_paths(self) -> int:
        return self.factors.shape[0]


@dataclass(frozen=True)
class Transition:
    """Exact one-step law: ``X' = Phi X + offset + chol @ xi``, xi ~ N(0, I)."""

    Phi: NDArray[np.float64]
    offset: NDArray[np.float64]
    cov: NDArray[np.float64]
    chol: NDArray[np.float64]


def _sqrt_psd(cov: NDArray[np.float64]) -> NDArray[np.float64]:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # Near-singular covariance (vanishing noise): symmetric square root.
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def exact_transition(m: ModelMatrices, dt: float, measure: str) -> Transition:
    """Conditional mean map and covariance of the factor SDE over ``dt``.

    Both come from augmented matrix exponentials (Van Loan): the offset is
    ``int_0^dt exp(-K s) ds b`` and the covariance
    ``int_0^dt exp(-K s) G exp(-K' s) ds`` with ``G = Sigma Omega Sigma``.
    """
    K, G = m.K, m.cov_rate
    b = m.drift_offset(measure)
    aug = np.zeros((4, 4))
    aug[:3, :3] = -K
    aug[:3, 3] = b
    E = _H4 @ expm(_H4 @ (aug * dt) @ _H4) @ _H4
    Phi, offset = E[:3, :3], E[:3, 3]

    vl = np.zeros((6, 6))
    vl[:3, :3] = K
    vl[:3, 3:] = G
    vl[3:, 3:] = -K.T
    F = expm(vl * dt)
    cov = F[3:, 3:].T @ F[:3, 3:]
    cov = 0.5 * (cov + cov.T)
    return Transition(Phi=Phi, offset=offset, cov=cov, chol=_sqrt_psd(cov))


def factor_moments(m: ModelMatrices, x0, t: float, measure: str = "P"):
    """Mean and covariance of ``X_t`` given ``X_0 = x0``."""
    if t == 0:
        return np.asarray(x0, dtype=float), np.zeros((3, 3))
    tr = exact_transition(m, t, measure)
    return tr.Phi @ np.asarray(x0, dtype=float) + tr.offset, tr.cov


def path_normals(seed: int, path_index: int, n_steps: int) -> NDArray[np.float64]:
    """Standard normals for one path, shape ``(n_steps, 3)``."""
    key = (int(path_index) << 64) | int(seed)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal((n_steps, 3))


def _draw_noise(seed: int, n_paths: int, n_steps: int, workers: int) -> NDArray[np.float64]:
    noise = np.empty((n_paths, n_steps, 3))

    def fill(lo, hi):
        for i in range(lo, hi):
            noise[i] = path_normals(seed, i, n_steps)

    chunks = [(lo, min(lo + _CHUNK, n_paths)) for lo in range(0, n_paths, _CHUNK)]
    if workers <= 1 or len(chunks) == 1:
        for lo, hi in chunks:
            fill(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda c: fill(*c), chunks))
    return noise


def simulate_factors(m: ModelMatrices, x0, grid: SimulationGrid, n_paths: int = 1,
                     workers: int = 1) -> PathBundle:
    """Sample factor paths under ``grid.measure`` with exact transitions."""
    x0 = np.asarray(getattr(x0, "x", x0), dtype=float)
    if x0.shape != (3,) or not np.all(np.isfinite(x0)):
        raise ValueError(f"x0 must be a finite 3-vector, got {x0!r}")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    tr = exact_transition(m, grid.dt, grid.measure)
    noise = _draw_noise(grid.seed, n_paths, grid.n_steps, workers)
    X = np.empty((n_paths, grid.n_steps + 1, 3))
    X[:, 0] = x0
    for i in range(grid.n_steps):
        X[:, i + 1] = X[:, i] @ tr.Phi.T + tr.offset + noise[:, i] @ tr.chol.T
    return PathBundle(times=grid.times, factors=X, noise=noise,
                      measure=grid.measure, seed=grid.seed)


def futures_paths(m: ModelMatrices, bundle: PathBundle, contracts) -> PathBundle:
    """Attach futures prices ``exp(a(t)'X_t + beta(t))`` along every path."""
    contracts = tuple(contracts)
    if not contracts:
        raise ValueError("at least one contract is required")
    t_last = bundle.times[-1]
    for c in contracts:
        if c.maturity < t_last:
            raise ValueError(
                f"contract {c.label or c.maturity} matures at {c.maturity}, "
                f"before the grid end {t_last}"
            )
    logF = np.empty(bundle.factors.shape[:2] + (len(contracts),))
    for k, c in enumerate(contracts):
        A = loading_vectors(m, c.maturity - bundle.times)
        beta = np.array([beta_intercept(m, float(t), c.maturity) for t in bundle.times])
        logF[:, :, k] = np.einsum("pti,ti->pt", bundle.factors, A) + beta
    return replace(bundle, futures=np.exp(logF), contracts=contracts)


def optimal_strategy_grid(m: ModelMatrices, spec: PortfolioSpec, times) -> NDArray[np.float64]:
    """Optimal cash positions at each time in ``times``, shape ``(len(times), M)``."""
    return np.array([strategy_point(m, spec, float(t)).pi for t in times])


def simulate_wealth(m: ModelMatrices, bundle: PathBundle, strategy, w0: float,
                    contracts=None) -> PathBundle:
    """Accumulate wealth with an Euler scheme on the bundle's grid.

    ``strategy`` is an ``(n_steps, M)`` array of cash positions held over
    each step (a single row is broadcast).  Under Q the futures are
    martingales, so only the diffusion part contributes.
    """
    contracts = tuple(contracts) if contracts is not None else bundle.contracts
    if not contracts:
        raise ValueError("contracts are required to simulate wealth")
    times = bundle.times
    n_steps = len(times) - 1
    pi = np.asarray(strategy, dtype=float)
    if pi.ndim == 1:
        pi = np.broadcast_to(pi, (n_steps, pi.size))
    if pi.shape != (n_steps, len(contracts)):
        raise ValueError(
            f"strategy shape {pi.shape} does not match ({n_steps}, {len(contracts)}) "
            "steps x contracts"
        )
    drift = np.empty(n_steps)
    vol = np.empty((n_steps, 3))
    for i in range(n_steps):
        mu_F, Sigma_F = futures_loadings(m, contracts, float(times[i]))
        drift[i] = pi[i] @ mu_F if bundle.measure == "P" else 0.0
        vol[i] = pi[i] @ Sigma_F
    dt = np.diff(times)
    dW = drift * dt + np.einsum("psi,si->ps", bundle.noise, vol) * np.sqrt(dt)
    wealth = np.empty((bundle.n_paths, n_steps + 1))
    wealth[:, 0] = w0
    np.cumsum(dW, axis=1, out=wealth[:, 1:])
    wealth[:, 1:] += w0
    return replace(bundle, strategy=np.array(pi), wealth=wealth, contracts=contracts)


def gaussian_band(mean: NDArray[np.float64], var: NDArray[np.float64], level: float = 0.95):
    """Two-sided normal band ``mean -/+ z sqrt(var)``."""
    from scipy.stats import norm

    z = norm.ppf(0.5 + level / 2)
    sd = np.sqrt(np.maximum(var, 0.0))
    return mean - z * sd, mean + z * sd


def futures_units(bundle: PathBundle) -> NDArray[np.float64]:
    """Units of each contract held, cash position divided by futures price."""
    if bundle.futures is None or bundle.strategy is None:
        raise ValueError("bundle needs futures and strategy paths")
    return bundle.strategy[None, :, :] / bundle.futures[:, :-1, :]


__all__ = [
    "PathBundle", "SimulationGrid", "Transition", "exact_transition", "factor_moments",
    "futures_paths", "gaussian_band", "futures_units", "optimal_strategy_grid",
    "path_normals", "simulate_factors", "simulate_wealth",
]

