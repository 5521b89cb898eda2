"""Cluster-center selection driven by kernel discrepancies.

Four routes to a set of representatives Y for a sample X: greedy subset
selection against the discrepancy increment, greedy selection against a
function's prediction error, pairwise-swap refinement of a given subset,
and unconstrained gradient descent of the squared discrepancy (sharp
centers that need not be sample points).  A balanced slot assignment and
a plain Lloyd baseline complete the toolbox.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .kernels import (
    ScaledKernel,
    as_points,
    discrepancy_matrix,
    gram,
    grad_first,
    mmd,
)
from .solvers import explicit_descent, greedy_search, permutation_descent

__all__ = [
    "ClusterModel",
    "greedy_discrepancy_clusters",
    "greedy_function_clusters",
    "subset_refine",
    "sharp_discrepancy",
    "balanced_assign",
    "kmeans_baseline",
    "metrics",
]

# Above this many points the full self-Gram is no longer precomputed and
# rows are streamed on demand.
_FULL_GRAM_LIMIT = 8192


@dataclass
class ClusterModel:
    """Cluster centers plus the rule allocating points to them.

    ``allocator`` picks the metric: "euclidean" and "kernel" allocate to
    the nearest centroid (squared euclidean / kernel discrepancy);
    "balanced" allocates to the cluster of the nearest training point
    under the stored slot permutation, so training points keep their
    exact balanced cluster.
    """

    centroids: np.ndarray = field(repr=False)
    assignment: np.ndarray | None = field(default=None, repr=False)
    source_indices: np.ndarray | None = field(default=None, repr=False)
    allocator: str = "euclidean"
    kernel: ScaledKernel | None = field(default=None, repr=False)
    training: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def allocate(self, Z) -> np.ndarray:
        Z = as_points(Z, "Z")
        if self.allocator == "balanced":
            if self.training is None or self.assignment is None:
                raise ValueError("balanced model needs training points and slots")
            D = self._dist(Z, self.training)
            nearest = np.argmin(D, axis=1)
            return self.assignment[nearest] % self.n_clusters
        D = self._dist(Z, self.centroids)
        return np.argmin(D, axis=1)

    def _dist(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kernel is not None:
            return discrepancy_matrix(self.kernel, A, B)
        return cdist(A, B, "sqeuclidean")


# ---------------------------------------------------------------------------
# greedy discrepancy clustering
# ---------------------------------------------------------------------------


class _ColumnStats:
    """Self-Gram access that precomputes small cases and streams large ones."""

    def __init__(self, k: ScaledKernel, X: np.ndarray):
        self.k = k
        self.X = X
        n = X.shape[0]
        if n <= _FULL_GRAM_LIMIT:
            self.K = gram(k, X, X)
            self.col_sums = self.K.sum(axis=0)
            self.diag = self.K.diagonal().copy()
        else:
            self.K = None
            sums = np.zeros(n)
            step = max(1, 10_000_000 // n)
            for lo in range(0, n, step):
                sums += gram(k, X[lo : lo + step], X).sum(axis=0)
            self.col_sums = sums
            self.diag = k.family.diag(k.transform(X))

    def row(self, i: int) -> np.ndarray:
        if self.K is not None:
            return self.K[i]
        return gram(self.k, self.X[i : i + 1], self.X)[0]


def greedy_discrepancy_clusters(
    k: ScaledKernel, X, n_clusters: int
) -> ClusterModel:
    """Greedily pick sample points whose empirical measure tracks X.

    Each round appends the candidate minimizing the squared discrepancy
    of the enlarged subset against the full sample; the first pick is the
    single point closest to X in that sense.
    """
    X = as_points(X, "X")
    stats = _ColumnStats(k, X)
    n = X.shape[0]
    col_means = stats.col_sums / n

    running = np.zeros(n)
    folded = 0

    def score(selected: np.ndarray) -> np.ndarray:
        nonlocal folded
        for idx in selected[folded:]:
            running[:] += stats.row(int(idx))
            folded += 1
        m = selected.shape[0]
        increment = (2.0 * running + stats.diag) / (m + 1) ** 2 - (
            2.0 / (m + 1)
        ) * col_means
        return -increment

    idx = greedy_search(X, score, n_clusters)
    return ClusterModel(
        centroids=X[idx],
        source_indices=idx,
        allocator="kernel",
        kernel=k,
    )


# ---------------------------------------------------------------------------
# greedy function-error clustering
# ---------------------------------------------------------------------------


def greedy_function_clusters(
    k: ScaledKernel, X, fX, n_clusters: int, p: float = 2.0
) -> ClusterModel:
    """Greedily pick support points by largest current prediction error.

    Maintains the inverse of the growing support Gram through rank-one
    block updates; a candidate whose Schur complement is not positive
    (numerically dependent on the current support) is skipped in favor of
    the next-best error.
    """
    X = as_points(X, "X")
    fX = np.asarray(fX, dtype=float)
    if fX.ndim == 1:
        fX = fX[:, None]
    n = X.shape[0]
    if fX.shape[0] != n:
        raise ValueError("targets must have one row per data point")
    if not 1 <= n_clusters <= n:
        raise ValueError(f"cannot select {n_clusters} rows out of {n}")

    diag = k.family.diag(k.transform(X))
    selected: list[int] = []
    K_inv = np.zeros((0, 0))
    K_cols = np.zeros((n, 0))
    pred = np.zeros_like(fX)

    for _ in range(n_clusters):
        residual = fX - pred
        errs = np.linalg.norm(residual, ord=p, axis=1)
        errs[selected] = -np.inf
        order = np.argsort(-errs, kind="stable")

        chosen = -1
        for cand in order:
            cand = int(cand)
            if not np.isfinite(errs[cand]):
                break
            col = gram(k, X, X[cand : cand + 1])[:, 0]
            if not selected:
                s = diag[cand]
                if s <= 0.0:
                    continue
                K_inv_new = np.array([[1.0 / s]])
            else:
                b = col[selected]
                w = K_inv @ b
                s = diag[cand] - float(b @ w)
                if s <= 1e-12 * max(diag[cand], 1.0):
                    continue
                m = len(selected)
                K_inv_new = np.empty((m + 1, m + 1))
                K_inv_new[:m, :m] = K_inv + np.outer(w, w) / s
                K_inv_new[:m, m] = -w / s
                K_inv_new[m, :m] = -w / s
                K_inv_new[m, m] = 1.0 / s
            chosen = cand
            K_inv = K_inv_new
            K_cols = np.hstack([K_cols, col[:, None]])
            break
        if chosen < 0:
            raise ValueError("no admissible candidate; support Gram is singular")

        selected.append(chosen)
        theta = K_inv @ fX[selected]
        pred = K_cols @ theta

    idx = np.asarray(selected, dtype=int)
    return ClusterModel(
        centroids=X[idx],
        source_indices=idx,
        allocator="kernel",
        kernel=k,
    )


# ---------------------------------------------------------------------------
# subset refinement by pairwise swaps
# ---------------------------------------------------------------------------


class _SubsetGain:
    """Gain oracle for swapping a subset member against an outside point.

    The gain is the decrease of the squared discrepancy d(Y, X)^2 when
    subset slot i takes over the outside point at slot j, computed from
    contracted kernel sums maintained across swaps.
    """

    def __init__(self, k: ScaledKernel, X: np.ndarray, n_subset: int):
        self.stats = _ColumnStats(k, X)
        self.n = X.shape[0]
        self.m = n_subset
        self.i_range = np.arange(n_subset)
        self.j_range = np.arange(n_subset, self.n)
        self.R = np.zeros(self.n)  # sum over subset of k(y, .)
        self._row_cache: tuple[int, np.ndarray] | None = None

    def seed(self, subset: np.ndarray) -> None:
        self.R[:] = 0.0
        for idx in subset:
            self.R += self.stats.row(int(idx))

    def _row(self, p: int) -> np.ndarray:
        if self._row_cache is None or self._row_cache[0] != p:
            self._row_cache = (p, self.stats.row(p))
        return self._row_cache[1]

    def gain(self, i: int, j: int, sigma: np.ndarray) -> float:
        return float(self.gain_row(i, np.asarray([j]), sigma)[0])

    def gain_row(self, i: int, j_arr: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        p = int(sigma[i])
        q = sigma[j_arr]
        row_p = self._row(p)
        d = self.stats.diag
        s = self.stats.col_sums
        quad = (
            2.0 * self.R[p]
            - 2.0 * self.R[q]
            + 2.0 * row_p[q]
            - d[p]
            - d[q]
        ) / self.m**2
        lin = (2.0 / (self.m * self.n)) * (s[p] - s[q])
        return quad - lin

    def apply(self, i: int, j: int, sigma: np.ndarray) -> None:
        # sigma is already swapped: slot i holds the entrant, slot j the leaver
        self.R += self.stats.row(int(sigma[i])) - self.stats.row(int(sigma[j]))
        self._row_cache = None

    def cost(self, sigma: np.ndarray) -> float:
        subset = sigma[: self.m]
        sub_rows = np.array([self.stats.row(int(p)) for p in subset])
        t_yy = sub_rows[:, subset].sum() / self.m**2
        t_xy = 2.0 * sub_rows.sum() / (self.m * self.n)
        return t_yy - t_xy


def subset_refine(
    k: ScaledKernel, X, initial, max_sweeps: int | None = None
) -> ClusterModel:
    """Improve a subset of sample points by in/out swaps.

    Starting from ``initial`` (row indices), repeatedly exchanges a
    member against an outside point whenever that strictly lowers the
    squared discrepancy against X; the result is a local minimum over
    single exchanges.
    """
    X = as_points(X, "X")
    initial = np.asarray(initial, dtype=int)
    n = X.shape[0]
    m = initial.shape[0]
    if np.unique(initial).shape[0] != m or not 1 <= m <= n:
        raise ValueError("initial must hold distinct valid row indices")

    oracle = _SubsetGain(k, X, m)
    oracle.seed(initial)
    outside = np.setdiff1d(np.arange(n), initial)
    sigma0 = np.concatenate([initial, outside])
    sigma = permutation_descent(oracle, sigma0, sweep="bipartite", max_sweeps=max_sweeps)
    idx = np.sort(sigma[:m])
    return ClusterModel(
        centroids=X[idx],
        source_indices=idx,
        allocator="kernel",
        kernel=k,
    )


# ---------------------------------------------------------------------------
# sharp discrepancy centers
# ---------------------------------------------------------------------------


def sharp_discrepancy(
    k: ScaledKernel,
    X,
    Y0,
    eps: float = 1e-6,
    maxiter: int = 100,
) -> ClusterModel:
    """Descend the squared discrepancy d(Y, X)^2 over free centers Y.

    Centers move off the sample; the analytic discrepancy gradient is
    chained through the kernel's scaling map.  Kernel families without an
    everywhere-defined gradient are rejected.
    """
    if not k.family.smooth:
        raise ValueError("concave discrepancy; use combinatorial clustering")
    X = as_points(X, "X")
    Y0 = as_points(Y0, "Y0")
    n = X.shape[0]
    m = Y0.shape[0]
    const = float(gram(k, X, X).mean())

    def J(Y: np.ndarray) -> float:
        K_yy = gram(k, Y, Y)
        K_yx = gram(k, Y, X)
        return float(K_yy.mean() + const - 2.0 * K_yx.mean())

    def gradJ(Y: np.ndarray) -> np.ndarray:
        G_yy = grad_first(k, Y, Y)
        G_yx = grad_first(k, Y, X)
        return (2.0 / m**2) * G_yy.sum(axis=2) - (2.0 / (m * n)) * G_yx.sum(
            axis=2
        )

    Y = explicit_descent(J, gradJ, Y0, eps=eps, maxiter=maxiter)
    return ClusterModel(centroids=Y, allocator="kernel", kernel=k)


# ---------------------------------------------------------------------------
# balanced slot assignment
# ---------------------------------------------------------------------------


class _BalancedGain:
    """Modulo-slot gain: swapping slots i, j moves points between the
    clusters i % M and j % M; the gain is the cost decrease under D."""

    def __init__(self, D: np.ndarray):
        self.D = D
        self.m = D.shape[0]

    # grouped as two differences so the reverse swap evaluates to exactly
    # the negated gain; a symmetric rounding of near-ties would otherwise
    # let sweeps ping-pong on noise-positive pairs forever
    def gain(self, i: int, j: int, sigma: np.ndarray) -> float:
        ci = sigma[i] % self.m
        cj = sigma[j] % self.m
        if ci == cj:
            return 0.0
        D = self.D
        return float((D[ci, i] - D[cj, i]) + (D[cj, j] - D[ci, j]))

    def gain_row(self, i: int, j_arr: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        D = self.D
        ci = sigma[i] % self.m
        cj = sigma[j_arr] % self.m
        return (D[ci, i] - D[cj, i]) + (D[cj, j_arr] - D[ci, j_arr])

    def cost(self, sigma: np.ndarray) -> float:
        cols = np.arange(self.D.shape[1])
        return float(self.D[sigma % self.m, cols].sum())


def balanced_assign(D, max_sweeps: int | None = None) -> np.ndarray:
    """Assign N points to M clusters of near-equal size (sizes differ by
    at most one) by descending the total point-to-centroid cost.

    ``D`` is the M x N cost matrix; the returned slot permutation sigma
    places point n in cluster sigma[n] % M.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    m, n = D.shape
    if not 1 <= m <= n:
        raise ValueError("need 1 <= n_clusters <= n_points")
    if not np.all(np.isfinite(D)):
        raise ValueError("cost matrix contains non-finite entries")
    if m == 1:
        return np.arange(n)
    return permutation_descent(
        _BalancedGain(D), np.arange(n), sweep="full", max_sweeps=max_sweeps
    )


# ---------------------------------------------------------------------------
# Lloyd baseline
# ---------------------------------------------------------------------------


def kmeans_baseline(
    X, n_clusters: int, maxiter: int = 100, seed: int = 0
) -> ClusterModel:
    """Plain Lloyd iteration with distance-squared seeding.

    Empty clusters are reseeded from the point currently farthest from
    its centroid.  Deterministic given (X, seed).
    """
    X = as_points(X, "X")
    n = X.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"cannot place {n_clusters} clusters on {n} points")
    rng = np.random.default_rng(seed)

    centers = np.empty((n_clusters, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = cdist(X, centers[:1], "sqeuclidean")[:, 0]
    for c in range(1, n_clusters):
        probs = closest / closest.sum() if closest.sum() > 0 else None
        pick = rng.choice(n, p=probs)
        centers[c] = X[pick]
        closest = np.minimum(closest, cdist(X, centers[c : c + 1], "sqeuclidean")[:, 0])

    labels = np.full(n, -1)
    for _ in range(maxiter):
        D = cdist(X, centers, "sqeuclidean")
        new_labels = np.argmin(D, axis=1)
        point_cost = D[np.arange(n), new_labels]
        for c in range(n_clusters):
            mask = new_labels == c
            if mask.any():
                centers[c] = X[mask].mean(axis=0)
            else:
                far = int(np.argmax(point_cost))
                centers[c] = X[far]
                new_labels[far] = c
                point_cost[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    return ClusterModel(centroids=centers, allocator="euclidean")


def metrics(model: ClusterModel, X, k: ScaledKernel) -> dict[str, float]:
    """Inertia (summed squared euclidean residual) and squared discrepancy
    of the model's centers against X."""
    X = as_points(X, "X")
    alloc = model.allocate(X)
    diff = X - model.centroids[alloc]
    return {
        "inertia": float(np.sum(diff * diff)),
        "mmd": mmd(k, model.centroids, X),
    }
