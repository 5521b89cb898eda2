"""Sample-to-sample maps, generative samplers and transition estimators.

A sampler map matches the rows of two samples (exact assignment on the
pairwise discrepancy when dimensions agree, pairwise-swap descent of a
gradient-energy objective otherwise) and fits an exact kernel map onto
the matched targets.  On top of it sit a latent-variable conditional
sampler, an iterative-proportional-fitting projection to bistochastic
matrices, a kernel transition estimator, and a fixed-point iteration
refining a permutation into a dense transition matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .kernels import (
    ScaledKernel,
    as_points,
    discrepancy_matrix,
    fit_scaling,
    gram,
)
from .regression import Regressor, fit, laplacian_operator
from .solvers import lsap_exact, permutation_descent

__all__ = [
    "SamplerMap",
    "sample_map",
    "generate",
    "ConditionalSampler",
    "conditional_sampler",
    "BiStochasticMatrix",
    "ipf",
    "transition_nw",
    "pi_algorithm",
    "conditional_expectation",
]


def _check_distinct(A: np.ndarray, name: str) -> None:
    if np.unique(A, axis=0).shape[0] != A.shape[0]:
        raise ValueError(f"duplicate rows in {name}")


# ---------------------------------------------------------------------------
# permutation energy for mismatched dimensions
# ---------------------------------------------------------------------------


class _FrobeniusGain:
    """Gain oracle for Q(sigma) = <A, W[sigma][:, sigma]> with symmetric
    A and W; the gain of a swap is the decrease of Q.

    Used with A the negated kernel Laplacian of the source sample and
    W the target row Gram, so Q is the squared gradient energy of the
    permuted target fitted on the source.  Swap evaluation is O(N) on
    maintained state; row evaluation is one matrix-vector product.
    """

    _REFRESH = 64

    def __init__(self, A: np.ndarray, W: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.W = np.asarray(W, dtype=float)
        self.P = self.W.copy()
        self.r = (self.A * self.P).sum(axis=1)
        # near-ties round to noise-positive gains; below this they are
        # not trustworthy as improvements
        self.tol = 1e-12 * (1.0 + abs(float(self.r.sum())))
        self._applied = 0

    def _delta_row(self, i: int, j_arr: np.ndarray) -> np.ndarray:
        A, P, r = self.A, self.P, self.r
        u = P @ A[i]
        z = A @ P[i]
        t_full = u[j_arr] - r[i] - r[j_arr] + z[j_arr]
        corr_i = (A[i, i] - A[j_arr, i]) * (P[j_arr, i] - P[i, i])
        corr_j = (A[i, j_arr] - A[j_arr, j_arr]) * (
            P[j_arr, j_arr] - P[i, j_arr]
        )
        t = t_full - corr_i - corr_j
        return 2.0 * t + (A[i, i] - A[j_arr, j_arr]) * (
            P[j_arr, j_arr] - P[i, i]
        )

    def gain(self, i: int, j: int, sigma: np.ndarray) -> float:
        return float(-self._delta_row(i, np.asarray([j]))[0])

    def gain_row(self, i: int, j_arr: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        return -self._delta_row(i, j_arr)

    def apply(self, i: int, j: int, sigma: np.ndarray) -> None:
        A, P = self.A, self.P
        self.r += (A[:, i] - A[:, j]) * (P[:, j] - P[:, i])
        P[[i, j], :] = P[[j, i], :]
        P[:, [i, j]] = P[:, [j, i]]
        self.r[i] = float(A[i] @ P[i])
        self.r[j] = float(A[j] @ P[j])
        self._applied += 1
        if self._applied % self._REFRESH == 0:
            self.r = (A * P).sum(axis=1)

    def cost(self, sigma: np.ndarray) -> float:
        return float(self.r.sum())


# ---------------------------------------------------------------------------
# sampler maps
# ---------------------------------------------------------------------------


@dataclass
class SamplerMap:
    """Matched pair of samples with exact kernel maps between them.

    ``forward`` maps source points onto the matched targets (training
    rows reproduce Y[sigma] exactly); ``inverse``, when fitted, maps the
    matched targets back onto the source.
    """

    forward: Regressor
    inverse: Regressor | None = field(default=None, repr=False)
    sigma: np.ndarray = field(default=None, repr=False)
    source: np.ndarray = field(default=None, repr=False)
    targets: np.ndarray = field(default=None, repr=False)


def sample_map(
    k: ScaledKernel,
    X,
    Y,
    sigma=None,
    fit_inverse: bool = True,
) -> SamplerMap:
    """Match two equal-count samples row-to-row and fit the kernel map.

    Equal dimensions: the matching is an exact assignment on the pairwise
    discrepancy matrix.  Different dimensions: a pairwise-swap descent
    reorders the targets to minimize the gradient energy of the fitted
    map.  A precomputed ``sigma`` skips the matching step.
    """
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have the same number of rows")
    _check_distinct(X, "X")
    _check_distinct(Y, "Y")
    n = X.shape[0]

    if sigma is None:
        if X.shape[1] == Y.shape[1]:
            sigma = lsap_exact(discrepancy_matrix(k, X, Y))
        else:
            A = -laplacian_operator(k, X)
            W = Y @ Y.T
            sigma = permutation_descent(
                _FrobeniusGain(A, W), np.arange(n), sweep="full"
            )
    else:
        sigma = np.asarray(sigma, dtype=int)
        if np.unique(sigma).shape[0] != n:
            raise ValueError("sigma must be a permutation")

    Yp = Y[sigma]
    forward = fit(k, X, None, Yp, 0.0)
    inverse = None
    if fit_inverse:
        k_inv = fit_scaling(Yp, Yp, k.family, erf_map=k.erf_map)
        inverse = fit(k_inv, Yp, None, X, 0.0)
    return SamplerMap(
        forward=forward, inverse=inverse, sigma=sigma, source=X, targets=Yp
    )


def generate(s: SamplerMap, Z) -> np.ndarray:
    """Push latent points through the fitted forward map."""
    return s.forward.predict(Z)


# ---------------------------------------------------------------------------
# conditional sampler
# ---------------------------------------------------------------------------


@dataclass
class ConditionalSampler:
    """Latent-variable sampler for Y conditioned on X.

    The decoder maps (latent-x, latent-y) rows to joint (x, y) rows; the
    encoder maps a condition x to its latent-x code (identity when the
    condition itself is the latent).  Feeding a training condition with
    its fit-time latent-y row reproduces the matched training output.
    """

    encoder: Regressor | None = field(repr=False)
    decoder: Regressor = field(repr=False)
    d_x: int
    d_y: int
    d_eta_x: int
    d_eta_y: int
    seed: int
    training_conditions: np.ndarray = field(repr=False)
    training_latents: np.ndarray = field(repr=False)
    training_outputs: np.ndarray = field(repr=False)

    def encode(self, x) -> np.ndarray:
        x = as_points(x, "x")
        if x.shape[1] != self.d_x:
            raise ValueError("condition dimension mismatch")
        return self.encoder.predict(x) if self.encoder is not None else x

    def sample(self, x, eta_y) -> np.ndarray:
        """Generate one Y row per condition row, driven by latent rows."""
        x = as_points(x, "x")
        eta_y = np.asarray(eta_y, dtype=float)
        if eta_y.ndim == 1:
            eta_y = eta_y[:, None]
        if eta_y.shape != (x.shape[0], self.d_eta_y):
            raise ValueError("latent rows must match condition rows")
        latent = np.hstack([self.encode(x), eta_y])
        joint = self.decoder.predict(latent)
        return joint[:, self.d_x :]

    def sample_at(self, x_value, n_samples: int, seed: int = 0) -> np.ndarray:
        """Draw fresh latent rows and sample Y at a single condition."""
        x_value = np.asarray(x_value, dtype=float).reshape(1, -1)
        rng = np.random.default_rng(seed)
        eta = rng.standard_normal((n_samples, self.d_eta_y))
        return self.sample(np.repeat(x_value, n_samples, axis=0), eta)


def conditional_sampler(
    X,
    Y,
    d_eta_x: int = 0,
    d_eta_y: int | None = None,
    k: ScaledKernel | None = None,
    family: str = "gaussian",
    seed: int = 0,
) -> ConditionalSampler:
    """Fit a conditional generator of Y given X from joint observations.

    Gaussian latents are drawn with the given seed; ``d_eta_x = 0`` uses
    the condition itself as the latent-x block, otherwise an encoder is
    fitted onto matched latent codes.  The joint decoder is fitted on the
    latent rows so that training pairs are reproduced exactly.
    """
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have the same number of rows")
    _check_distinct(X, "X")
    n, d_x = X.shape
    d_y = Y.shape[1]
    if d_eta_y is None:
        d_eta_y = min(d_y, 8)
    if d_eta_x < 0 or d_eta_y < 0:
        raise ValueError("latent dimensions must be nonnegative")
    if k is None:
        k = fit_scaling(X, X, family)

    rng = np.random.default_rng(seed)
    eta_y = rng.standard_normal((n, d_eta_y))

    if d_eta_x > 0:
        eta_x = rng.standard_normal((n, d_eta_x))
        enc_match = sample_map(k, X, eta_x, fit_inverse=False)
        eta_x_aligned = eta_x[enc_match.sigma]
    else:
        eta_x_aligned = X

    latent = np.hstack([eta_x_aligned, eta_y])
    targets = np.hstack([X, Y])
    k_lat = fit_scaling(latent, latent, family)

    if d_eta_x > 0:
        dec_match = sample_map(k_lat, latent, targets, fit_inverse=False)
        sigma = dec_match.sigma
        decoder = dec_match.forward
        k_enc = fit_scaling(X[sigma], X[sigma], family)
        encoder = fit(k_enc, X[sigma], None, eta_x_aligned, 0.0)
    else:
        sigma = np.arange(n)
        decoder = fit(k_lat, latent, None, targets, 0.0)
        encoder = None

    return ConditionalSampler(
        encoder=encoder,
        decoder=decoder,
        d_x=d_x,
        d_y=d_y,
        d_eta_x=d_eta_x,
        d_eta_y=d_eta_y,
        seed=seed,
        training_conditions=X[sigma],
        training_latents=eta_y,
        training_outputs=Y[sigma],
    )


# ---------------------------------------------------------------------------
# bistochastic matrices
# ---------------------------------------------------------------------------


@dataclass
class BiStochasticMatrix:
    """Square matrix with unit row and column sums (possibly approximate).

    ``converged`` reports whether the producing iteration met its
    tolerance; entries may be negative for the fixed-point refinements.
    """

    values: np.ndarray = field(repr=False)
    converged: bool = True
    sweeps: int = 0

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.values.sum(axis=0)


def ipf(M, tol: float = 1e-10, maxiter: int = 1000) -> BiStochasticMatrix:
    """Project a nonnegative square matrix to bistochastic form by
    alternating row and column normalization.

    A zero row or column makes the projection infeasible and raises; an
    already-bistochastic input is returned unchanged.  Exceeding
    ``maxiter`` returns the current iterate flagged as not converged.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite entries")
    if np.any(M < 0.0):
        raise ValueError("matrix must be nonnegative")

    P = M.copy()
    for sweep in range(maxiter + 1):
        rs = P.sum(axis=1)
        cs = P.sum(axis=0)
        if np.any(rs == 0.0) or np.any(cs == 0.0):
            raise ValueError("zero row or column; projection infeasible")
        dev = max(np.abs(rs - 1.0).max(), np.abs(cs - 1.0).max())
        if dev <= tol:
            return BiStochasticMatrix(values=P, converged=True, sweeps=sweep)
        if sweep == maxiter:
            break
        P = P / rs[:, None]
        P = P / P.sum(axis=0)[None, :]
    return BiStochasticMatrix(values=P, converged=False, sweeps=maxiter)


def transition_nw(
    k: ScaledKernel,
    X,
    Y,
    tol: float = 1e-10,
    mode: str = "product",
    maxiter: int = 1000,
) -> BiStochasticMatrix:
    """Kernel transition-probability estimate between paired samples.

    Projects the product (default) or elementwise product of the two
    self-Gram matrices onto bistochastic form.
    """
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have the same number of rows")
    Kx = gram(k, X, X)
    Ky = gram(k, Y, Y)
    if mode == "product":
        B = Kx @ Ky
    elif mode == "hadamard":
        B = Kx * Ky
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ipf(np.maximum(B, 0.0), tol=tol, maxiter=maxiter)


# ---------------------------------------------------------------------------
# fixed-point transition refinement
# ---------------------------------------------------------------------------


def pi_algorithm(
    X,
    Y,
    eps: float = 1e-9,
    maxiter: int = 500,
    kernel: ScaledKernel | None = None,
    cost: str = "discrepancy",
    family: str = "gaussian",
    callback=None,
) -> BiStochasticMatrix:
    """Refine a permutation match of two samples into a dense transition
    matrix by line-searched rank-N updates.

    Both samples are centered; an exact assignment on the chosen cost
    seeds the match, then the iteration adds multiples of the residual
    outer product, with the step length minimizing |X - Pi Y|_F^2 along
    the update direction (so the objective never increases and row and
    column sums stay exactly one).  Stops when the image moves less than
    ``eps`` or the direction vanishes.
    """
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape != Y.shape:
        raise ValueError("X and Y must have identical shape")
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)

    if cost == "discrepancy":
        kk = kernel if kernel is not None else fit_scaling(Xc, Yc, family)
        C = discrepancy_matrix(kk, Xc, Yc)
    elif cost == "euclidean":
        C = cdist(Xc, Yc, "sqeuclidean")
    else:
        raise ValueError(f"unknown cost {cost!r}")
    sigma = lsap_exact(C)
    Y0 = Yc[sigma]

    Pi = np.eye(n)
    Yn = Y0.copy()
    converged = False
    iterations = 0
    if callback is not None:
        callback(Pi.copy(), Yn.copy())
    for iterations in range(1, maxiter + 1):
        R = Xc - Yn
        M = R @ Yn.T
        MY0 = M @ Y0
        denom = float(np.sum(MY0 * MY0))
        if denom <= 0.0:
            converged = True
            break
        t = float(np.sum(R * MY0)) / denom
        Pi += t * M
        Y_next = Pi @ Y0
        if callback is not None:
            callback(Pi.copy(), Y_next.copy())
        delta = float(np.linalg.norm(Y_next - Yn))
        Yn = Y_next
        if delta <= eps:
            converged = True
            break

    out = np.empty_like(Pi)
    out[:, sigma] = Pi
    return BiStochasticMatrix(values=out, converged=converged, sweeps=iterations)


def conditional_expectation(P, gY) -> np.ndarray:
    """Transition-weighted average P @ g(Y) of per-sample values."""
    V = P.values if isinstance(P, BiStochasticMatrix) else np.asarray(P, float)
    gY = np.asarray(gY, dtype=float)
    return V @ gY
