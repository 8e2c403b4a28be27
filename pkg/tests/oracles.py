"""Independent reference computations used only by the tests.

None of these call into the matrix-exponential or quadrature paths of the
package; they integrate the defining ODEs directly with classical RK4.
"""

import numpy as np


def model_arrays(kappa, epsilon, delta, alpha2, alpha3, s1, s2, s3, rho12, rho13, rho23, lam):
    """K, mu, G = Sigma C C' Sigma from raw numbers (diffusion convention)."""
    K = np.array([[kappa, -kappa, -kappa], [0, 1 / epsilon, 0], [0, 0, delta]], dtype=float)
    mu = np.array([0.0, alpha2 / epsilon, delta * alpha3])
    S = np.diag([s1, s2, s3])
    C = np.array([[1, 0, 0],
                  [rho12, np.sqrt(1 - rho12 ** 2), 0],
                  [rho13, rho23, np.sqrt(1 - rho13 ** 2 - rho23 ** 2)]])
    return K, mu, S @ C @ C.T @ S, np.asarray(lam, dtype=float)


def rk4_loading_beta(K, drift, G, tau, n_steps=20000):
    """RK4 in time-to-maturity for a batch of problems.

    Solves da/dtau = -K'a, dbeta/dtau = drift'a + a'Ga/2 from a = e1, beta = 0.
    ``K`` (B,3,3), ``drift`` (B,3), ``G`` (B,3,3), ``tau`` (B,).
    Returns (a (B,3), beta (B,)).
    """
    K, drift, G = np.atleast_3d(K), np.atleast_2d(drift), np.atleast_3d(G)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    B = tau.size
    Kt = np.transpose(K, (0, 2, 1))
    h = (tau / n_steps)[:, None]

    def f(a):
        da = -np.einsum("bij,bj->bi", Kt, a)
        db = np.einsum("bi,bi->b", drift, a) + 0.5 * np.einsum("bi,bij,bj->b", a, G, a)
        return da, db

    a = np.zeros((B, 3))
    a[:, 0] = 1.0
    beta = np.zeros(B)
    for _ in range(n_steps):
        k1a, k1b = f(a)
        k2a, k2b = f(a + 0.5 * h * k1a)
        k3a, k3b = f(a + 0.5 * h * k2a)
        k4a, k4b = f(a + h * k3a)
        a = a + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        beta = beta + h[:, 0] / 6 * (k1b + 2 * k2b + 2 * k3b + k4b)
    return a, beta


def rk4_ode_flow(K, b, x0, t, n_steps=20000):
    """Deterministic flow of dx = (b - Kx) dt."""
    x = np.asarray(x0, dtype=float)
    h = t / n_steps
    f = lambda y: b - K @ y  # noqa: E731
    for _ in range(n_steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def random_param_draws(rng, n, near_degenerate=0):
    """Random valid parameter dicts; the last ``near_degenerate`` have 1/eps ~ kappa."""
    draws = []
    for i in range(n):
        kappa = rng.uniform(0.5, 10.0)
        eps = rng.uniform(0.02, 0.5)
        if i >= n - near_degenerate:
            gap = rng.uniform(-1e-6, 1e-6) if i % 2 else 0.0
            eps = 1.0 / (kappa + gap)
        rho12 = rng.uniform(-0.9, 0.9)
        r = rng.uniform(0, 0.9)
        ang = rng.uniform(0, 2 * np.pi)
        draws.append(dict(
            kappa=kappa, epsilon=eps, delta=rng.uniform(0.001, 0.5),
            alpha2=rng.uniform(-1, 1), alpha3=rng.uniform(-1, 1),
            sigma1=rng.uniform(0.05, 1.0), sigma2=rng.uniform(0.01, 0.5),
            sigma3=rng.uniform(0.01, 0.5),
            rho12=rho12, rho13=r * np.cos(ang), rho23=r * np.sin(ang),
            lambda1=rng.uniform(-0.1, 0.1), lambda2=rng.uniform(-0.1, 0.1),
            lambda3=rng.uniform(-0.1, 0.1),
            x0=tuple(rng.uniform(-1, 2, size=3)),
            vol_convention="diffusion",
        ))
    return draws
