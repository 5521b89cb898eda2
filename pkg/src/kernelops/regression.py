"""Kernel ridge regression in interpolation and extrapolation modes.

A regressor is the pair (support set Y, coefficient matrix theta) for a
fitted scaled kernel: predictions are K(Z, Y) @ theta.  When the support
equals the data sites and the ridge weight is zero the fit reproduces the
training values exactly, which several downstream modules rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lstsq

from .kernels import ScaledKernel, as_points, gram, grad_first, mmd

__all__ = [
    "Regressor",
    "fit",
    "predict",
    "gradient_operator",
    "laplacian_operator",
    "norm_estimate",
    "error_bound",
]

# Jitter ladder for barely-PD Gram factorizations, relative to trace(K)/N.
_JITTERS = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def _solve_spd(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive definite A.

    Tries a Cholesky factorization with an escalating diagonal jitter
    (relative to the mean diagonal).  One step of iterative refinement
    keeps the residual near machine precision, which the exact
    reproduction contracts depend on.
    """
    n = A.shape[0]
    scale = float(np.trace(A)) / n
    for jit in _JITTERS:
        try:
            cf = cho_factor(A + (jit * scale) * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
        X = cho_solve(cf, B)
        X += cho_solve(cf, B - A @ X)
        return X
    raise ValueError("ill-conditioned Gram")


def _solve_square(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve a general square system with the same jitter fallback."""
    n = A.shape[0]
    scale = float(np.abs(np.diag(A)).mean()) or 1.0
    for jit in _JITTERS:
        try:
            X = np.linalg.solve(A + (jit * scale) * np.eye(n), B)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(X)):
            return X
    raise ValueError("ill-conditioned Gram")


@dataclass
class Regressor:
    """Fitted kernel regressor: predictions are K(., support) @ theta."""

    kernel: ScaledKernel
    support: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    epsilon: float = 0.0

    def predict(self, Z) -> np.ndarray:
        return gram(self.kernel, Z, self.support) @ self.theta


def _as_targets(fX, n: int) -> np.ndarray:
    fX = np.asarray(fX, dtype=float)
    if fX.ndim == 1:
        fX = fX[:, None]
    if fX.ndim != 2 or fX.shape[0] != n:
        raise ValueError("targets must have one row per data point")
    if not np.all(np.isfinite(fX)):
        raise ValueError("targets contain non-finite entries")
    return fX


def fit(
    k: ScaledKernel,
    X,
    Y,
    fX,
    epsilon: float = 0.0,
    check_distinct: bool = True,
) -> Regressor:
    """Fit coefficients theta with data sites X, support Y and values fX.

    Solves (K(X, Y) + epsilon I) theta = fX as a square system when
    |X| = |Y|; a rectangular support goes through least squares (ridge
    normal equations when epsilon > 0).  Y = None means Y = X, the
    extrapolation mode with exact reproduction at epsilon = 0.
    """
    X = as_points(X, "X")
    same = Y is None
    Y = X if same else as_points(Y, "Y")
    same = same or (X.shape == Y.shape and np.array_equal(X, Y))
    if Y.shape[1] != X.shape[1]:
        raise ValueError("X and Y must share their feature dimension")
    fX = _as_targets(fX, X.shape[0])
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")

    if same and epsilon == 0.0 and check_distinct:
        if np.unique(X, axis=0).shape[0] != X.shape[0]:
            raise ValueError("duplicate rows in extrapolation fit")

    K = gram(k, X, Y)
    n_x, n_y = K.shape
    if n_x == n_y:
        A = K + epsilon * np.eye(n_x)
        theta = _solve_spd(A, fX) if same else _solve_square(A, fX)
    elif epsilon == 0.0:
        theta = lstsq(K, fX)[0]
    else:
        theta = _solve_spd(K.T @ K + epsilon * np.eye(n_y), K.T @ fX)
    return Regressor(kernel=k, support=Y, theta=theta, epsilon=epsilon)


def predict(r: Regressor, Z) -> np.ndarray:
    """Evaluate the fitted regressor at new points."""
    return r.predict(Z)


def gradient_operator(
    k: ScaledKernel, X, Y, Z, fX, epsilon: float = 0.0
) -> np.ndarray:
    """Gradient of the fitted regressor at Z, shape (N_Z, D, D_f).

    Chains the analytic kernel gradient through the scaling map, then
    contracts with the fitted coefficients.
    """
    if not k.family.smooth:
        raise ValueError("gradient unavailable")
    r = fit(k, X, Y, fX, epsilon)
    G = grad_first(k, Z, r.support)
    return np.einsum("zdy,yf->zdf", G, r.theta)


def laplacian_operator(k: ScaledKernel, X, epsilon: float = 0.0) -> np.ndarray:
    """Kernel Laplacian matrix -G^T G on the sites X, G the gradient operator.

    Symmetric negative semidefinite by construction (symmetrized against
    round-off).  Applied to values f(X) it discretizes div grad f.
    """
    if not k.family.smooth:
        raise ValueError("gradient unavailable")
    X = as_points(X, "X")
    n, d = X.shape
    K = gram(k, X, X) + epsilon * np.eye(n)
    G = grad_first(k, X, X).reshape(n * d, n)
    Gop = _solve_spd(K, G.T).T
    L = -(Gop.T @ Gop)
    return 0.5 * (L + L.T)


def norm_estimate(r: Regressor, fX) -> float:
    """Squared native-space norm estimate <fX, theta> of the fitted model."""
    fX = _as_targets(fX, r.theta.shape[0])
    return float(np.sum(fX * r.theta))


def error_bound(k: ScaledKernel, Z, X, r: Regressor, fX) -> float:
    """Worst-case extrapolation error estimate d_k(Z, X) * |f|_k.

    Product of the sample discrepancy between Z and X and the square root
    of the (clamped) norm estimate.
    """
    return float(
        np.sqrt(mmd(k, Z, X)) * np.sqrt(max(norm_estimate(r, fX), 0.0))
    )
