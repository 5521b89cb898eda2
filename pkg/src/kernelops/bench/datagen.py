"""Synthetic data generators for the benchmark experiments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

__all__ = [
    "gen_blobs",
    "BrownianBasket",
    "make_brownian_basket",
    "gen_ot_instance",
    "gen_linear_conditional",
]


def gen_blobs(modes: int, N: int, D: int, seed: int = 0) -> np.ndarray:
    """Equal-weight Gaussian mixture sample with unit-variance components.

    Mode centers are drawn uniformly on [-10, 10]^D from the seed; each
    point picks its mode independently.
    """
    if modes < 1:
        raise ValueError("modes must be at least 1")
    if N < 1 or D < 1:
        raise ValueError("N and D must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-10.0, 10.0, size=(modes, D))
    which = rng.integers(0, modes, size=N)
    return centers[which] + rng.standard_normal((N, D))


@dataclass
class BrownianBasket:
    """Driftless multivariate Brownian motion with a basket readout.

    The diffusion matrix is rescaled so that the basket b_t = <omega, X_t>
    has volatility exactly ``theta``; the weights satisfy |omega|_1 = 1.
    ``t1`` is the conditioning time, ``t2`` the option maturity.
    """

    sigma: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    theta: float = 0.2
    t1: float = 1.0
    t2: float = 2.0
    strike: float = 0.0

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    def basket(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.omega

    def payoff(self, Y) -> np.ndarray:
        """max(b(y) - K, 0) as a column vector."""
        return np.maximum(self.basket(Y) - self.strike, 0.0)[:, None]

    def closed_form(self, Z) -> np.ndarray:
        """Conditional expectation of the payoff given the time-t1 state.

        Bachelier-type formula for a driftless Gaussian basket: with
        s = theta * sqrt(t2 - t1) and d = (b - K) / s, the value is
        s * pdf(d) + (b - K) * cdf(d).
        """
        s = self.theta * np.sqrt(self.t2 - self.t1)
        b = self.basket(Z)
        d = (b - self.strike) / s
        return (s * norm.pdf(d) + (b - self.strike) * norm.cdf(d))[:, None]

    def sample_paths(self, N: int, rng) -> tuple[np.ndarray, np.ndarray]:
        """Paired states (X_{t1}, X_{t2}) of N independent paths."""
        X = np.sqrt(self.t1) * rng.standard_normal((N, self.dim)) @ self.sigma.T
        incr = np.sqrt(self.t2 - self.t1) * rng.standard_normal((N, self.dim))
        return X, X + incr @ self.sigma.T

    def sample_marginal(self, N: int, t: float, rng) -> np.ndarray:
        return np.sqrt(t) * rng.standard_normal((N, self.dim)) @ self.sigma.T


def make_brownian_basket(
    D: int, rng, theta: float = 0.2, strike: float = 0.0
) -> BrownianBasket:
    """Draw a random diffusion matrix and weights, normalized so the
    basket volatility is exactly theta."""
    sigma = rng.standard_normal((D, D))
    omega = rng.uniform(0.1, 1.0, size=D)
    omega = omega / np.abs(omega).sum()
    raw = float(np.linalg.norm(sigma.T @ omega))
    if raw == 0.0:
        raise ValueError("degenerate diffusion draw")
    sigma = sigma * (theta / raw)
    return BrownianBasket(sigma=sigma, omega=omega, theta=theta, strike=strike)


def gen_ot_instance(
    N: int, D: int, seed: int, n_test: int = 1024
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Transport benchmark instance: centered uniform X, its image under
    S(x) = x |x|_2^2 scrambled into Y, plus test points Z with S(Z).

    Returns (X, Y_scrambled, Z, S(Z)); the map is applied in the centered
    coordinates.
    """
    rng = np.random.default_rng([seed, N, D])
    X = rng.uniform(0.0, 1.0, size=(N, D))
    shift = X.mean(axis=0)
    X = X - shift

    def push(A):
        return A * np.sum(A * A, axis=1, keepdims=True)

    Y = push(X)[rng.permutation(N)]
    Z = rng.uniform(0.0, 1.0, size=(n_test, D)) - shift
    return X, Y, Z, push(Z)


def gen_linear_conditional(
    N: int, seed: int, slope: float = 2.0, intercept: float = 1.0, noise: float = 0.25
) -> tuple[np.ndarray, np.ndarray]:
    """Joint sample of a linear-in-x conditional law in one dimension:
    X uniform on [0, 2], Y = slope*X + intercept + noise*eta."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 2.0, size=(N, 1))
    Y = slope * X + intercept + noise * rng.standard_normal((N, 1))
    return X, Y
