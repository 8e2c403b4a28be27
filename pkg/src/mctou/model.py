"""Parameters and matrix-form coefficients of the three-factor MCTOU system.

Under the physical measure P the factor vector X = (log spot, fast factor,
slow factor) follows

    dX = (mu - K X) dt + Sigma C dZ^P

and under the pricing measure Q the drift becomes ``mu - lambda - K X``.

Two volatility conventions are supported:

``"sde"``
    sigma1..3 are the raw coefficients of the scalar SDEs, so the diffusion
    matrix is ``diag(sigma1, sigma2 / sqrt(epsilon), sqrt(delta) * sigma3)``.
``"diffusion"``
    sigma1..3 are the diagonal of ``Sigma`` directly.  Only under this
    reading do the ``table1`` parameters reproduce the published
    certainty-equivalent grid, so :func:`table1_params` uses it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from numpy.typing import NDArray

VOL_CONVENTIONS = ("sde", "diffusion")

# Trading-day conventions used for every daily grid in the package.
DAYS_PER_YEAR = 252
DAYS_PER_MONTH = 21

ZETA_TOL = 1e-12


class InvalidParameters(ValueError):
    """Raised when a parameter set violates one or more model constraints.

    All violations are collected; ``errors`` holds one message per violated
    constraint, each naming the field and the bound.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ModelParams:
    """Full MCTOU parameter set.

    Rates are per year, times in years.  ``lambda1..3`` are the combined
    market prices of risk and are the canonical input; ``zeta1..3`` may be
    supplied alongside, in which case they must map onto the lambdas (see
    :meth:`from_zeta` to build a consistent instance).
    """

    kappa: float
    epsilon: float
    delta: float
    alpha2: float
    alpha3: float
    sigma1: float
    sigma2: float
    sigma3: float
    rho12: float = 0.0
    rho13: float = 0.0
    rho23: float = 0.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    zeta1: Optional[float] = None
    zeta2: Optional[float] = None
    zeta3: Optional[float] = None
    x0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    vol_convention: str = "sde"

    @property
    def lam(self) -> NDArray[np.float64]:
        return np.array([self.lambda1, self.lambda2, self.lambda3])

    @property
    def zeta(self) -> Optional[NDArray[np.float64]]:
        z = (self.zeta1, self.zeta2, self.zeta3)
        if all(v is None for v in z):
            return None
        return np.array(z, dtype=float)

    def with_updates(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @classmethod
    def from_zeta(cls, zeta, **kwargs) -> "ModelParams":
        """Build params whose lambdas are derived from raw prices of risk."""
        base = cls(**kwargs)
        lam = lambda_from_zeta(base, zeta)
        z = [float(v) for v in zeta]
        return replace(
            base,
            lambda1=float(lam[0]), lambda2=float(lam[1]), lambda3=float(lam[2]),
            zeta1=z[0], zeta2=z[1], zeta3=z[2],
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x0"] = list(self.x0)
        for k in ("zeta1", "zeta2", "zeta3"):
            if d[k] is None:
                del d[k]
        return d


def table1_params(**overrides) -> ModelParams:
    """Reference parameter set (kappa=5, epsilon=0.05, delta=0.01, ...).

    Uses the ``"diffusion"`` volatility convention unless overridden.
    """
    base = ModelParams(
        kappa=5.0, epsilon=0.05, delta=0.01,
        alpha2=0.5, alpha3=0.5,
        sigma1=0.8, sigma2=0.02, sigma3=0.3,
        rho12=0.0, rho13=0.0, rho23=0.0,
        lambda1=0.02, lambda2=0.02, lambda3=0.02,
        x0=(1.0, 0.5, 0.5),
        vol_convention="diffusion",
    )
    return replace(base, **overrides)


# Maturities of the reference contracts T1, T2, T3 (one, two, three months).
TABLE1_MATURITIES = {"T1": 1 / 12, "T2": 2 / 12, "T3": 3 / 12}
TABLE1_HORIZON = 1 / 12
TABLE1_GAMMA = 1.0


def check_params(p: ModelParams) -> list[str]:
    """Return every violated constraint of ``p`` (empty when valid)."""
    errors = []
    numeric = {
        name: getattr(p, name)
        for name in ("kappa", "epsilon", "delta", "alpha2", "alpha3",
                     "sigma1", "sigma2", "sigma3", "rho12", "rho13", "rho23",
                     "lambda1", "lambda2", "lambda3")
    }
    for name, value in numeric.items():
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            errors.append(f"{name} must be a finite number, got {value!r}")
    if errors:
        return errors

    for name in ("kappa", "epsilon", "delta", "sigma1", "sigma2", "sigma3"):
        if numeric[name] <= 0:
            errors.append(f"{name} must be > 0, got {numeric[name]}")
    if not abs(p.rho12) < 1:
        errors.append(f"rho12 out of open interval (-1, 1): {p.rho12}")
    if not p.rho13 ** 2 + p.rho23 ** 2 < 1:
        errors.append(
            f"rho13**2 + rho23**2 must be < 1, got {p.rho13 ** 2 + p.rho23 ** 2:.6g}"
        )
    if p.vol_convention not in VOL_CONVENTIONS:
        errors.append(f"vol_convention must be one of {VOL_CONVENTIONS}, got {p.vol_convention!r}")
    if len(p.x0) != 3 or not all(math.isfinite(float(v)) for v in p.x0):
        errors.append(f"x0 must hold three finite numbers, got {p.x0!r}")

    zeta = (p.zeta1, p.zeta2, p.zeta3)
    if any(v is not None for v in zeta) and not errors:
        if any(v is None for v in zeta):
            errors.append("zeta1, zeta2, zeta3 must be given together")
        else:
            lam = lambda_from_zeta(p, zeta)
            for i, (got, want) in enumerate(zip(p.lam, lam), start=1):
                if abs(got - want) > ZETA_TOL:
                    errors.append(
                        f"lambda{i}={got!r} inconsistent with zeta (expected {want!r})"
                    )
    return errors


def validate_params(p: ModelParams) -> ModelParams:
    """Return ``p`` unchanged if valid, else raise :class:`InvalidParameters`."""
    errors = check_params(p)
    if errors:
        raise InvalidParameters(errors)
    return p


def _diffusion_scales(p: ModelParams) -> NDArray[np.float64]:
    if p.vol_convention == "diffusion":
        return np.array([p.sigma1, p.sigma2, p.sigma3])
    return np.array([p.sigma1, p.sigma2 / math.sqrt(p.epsilon), math.sqrt(p.delta) * p.sigma3])


def correlation_factor(rho12: float, rho13: float, rho23: float) -> NDArray[np.float64]:
    """Lower-triangular loading of correlated drivers on independent ones."""
    return np.array([
        [1.0, 0.0, 0.0],
        [rho12, math.sqrt(1.0 - rho12 ** 2), 0.0],
        [rho13, rho23, math.sqrt(1.0 - rho13 ** 2 - rho23 ** 2)],
    ])


def lambda_from_zeta(p: ModelParams, zeta) -> NDArray[np.float64]:
    """Combined market prices of risk ``Sigma C zeta`` from raw ones."""
    zeta = np.asarray(zeta, dtype=float)
    C = correlation_factor(p.rho12, p.rho13, p.rho23)
    return _diffusion_scales(p) * (C @ zeta)


def _frozen(a) -> NDArray[np.float64]:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelMatrices:
    """Assembled coefficients of the linear factor SDE.

    ``Omega = C C'`` is the instantaneous correlation of the drivers, so the
    diffusion covariance of X is ``Sigma Omega Sigma``.
    """

    K: NDArray[np.float64]
    Sigma: NDArray[np.float64]
    C: NDArray[np.float64]
    mu: NDArray[np.float64]
    lam: NDArray[np.float64]
    Omega: NDArray[np.float64]
    params: ModelParams = field(repr=False)

    @property
    def cov_rate(self) -> NDArray[np.float64]:
        """``Sigma Omega Sigma``, the instantaneous covariance of dX."""
        return self.Sigma @ self.Omega @ self.Sigma

    def drift_offset(self, measure: str) -> NDArray[np.float64]:
        if measure == "P":
            return self.mu
        if measure == "Q":
            return self.mu - self.lam
        raise ValueError(f"measure must be 'P' or 'Q', got {measure!r}")


def assemble_matrices(p: ModelParams) -> ModelMatrices:
    validate_params(p)
    k, eps, d = p.kappa, p.epsilon, p.delta
    K = [[k, -k, -k], [0.0, 1.0 / eps, 0.0], [0.0, 0.0, d]]
    C = correlation_factor(p.rho12, p.rho13, p.rho23)
    return ModelMatrices(
        K=_frozen(K),
        Sigma=_frozen(np.diag(_diffusion_scales(p))),
        C=_frozen(C),
        mu=_frozen([0.0, p.alpha2 / eps, d * p.alpha3]),
        lam=_frozen(p.lam),
        Omega=_frozen(C @ C.T),
        params=p,
    )
