"""General-purpose combinatorial and continuous minimizers.

Three workhorses shared by the clustering, multiscale and transport
modules: a batched greedy subset selector, an exact rectangular linear
sum assignment, and a first-improvement pairwise-swap descent over
permutations driven by a user gain oracle.  A norm-minimizing gradient
descent with a doubling line search rounds out the set.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

__all__ = [
    "greedy_search",
    "lsap_exact",
    "permutation_descent",
    "explicit_descent",
]


def _debug_enabled() -> bool:
    return os.environ.get("KERNELOPS_DEBUG", "") not in ("", "0")


# ---------------------------------------------------------------------------
# greedy subset selection
# ---------------------------------------------------------------------------


def greedy_search(X, d, n_select: int, batch: int = 1, initial=None) -> np.ndarray:
    """Greedily pick ``n_select`` row indices of X maximizing a score oracle.

    ``d(selected)`` receives the currently selected index array and must
    return a score for every row of X; each round appends the ``batch``
    highest-scoring unselected indices (ties broken toward the lowest
    index).  ``initial`` seeds the selection and counts toward the total.
    """
    X = np.asarray(X)
    n = X.shape[0]
    if not 1 <= n_select <= n:
        raise ValueError(f"cannot select {n_select} rows out of {n}")
    if batch < 1:
        raise ValueError("batch must be at least 1")

    selected: list[int] = []
    if initial is not None:
        selected = [int(i) for i in np.asarray(initial, dtype=int)]
        if len(set(selected)) != len(selected):
            raise ValueError("initial indices must be distinct")
        if selected and not all(0 <= i < n for i in selected):
            raise ValueError("initial index out of range")
        if len(selected) > n_select:
            raise ValueError("initial selection longer than n_select")

    while len(selected) < n_select:
        scores = np.asarray(d(np.asarray(selected, dtype=int)), dtype=float)
        if scores.shape != (n,):
            raise ValueError("score oracle must return one value per row")
        scores[selected] = -np.inf
        take = min(batch, n_select - len(selected))
        # stable sort on the negated scores keeps the lowest index first
        # among exact ties
        order = np.argsort(-scores, kind="stable")[:take]
        selected.extend(int(i) for i in order)
    return np.asarray(selected, dtype=int)


# ---------------------------------------------------------------------------
# exact assignment
# ---------------------------------------------------------------------------


def lsap_exact(C) -> np.ndarray:
    """Exact linear sum assignment for an M x N cost matrix, M <= N.

    Returns sigma with row i assigned to column sigma[i], minimizing the
    total cost.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if C.shape[0] > C.shape[1]:
        raise ValueError("cost matrix must have at least as many columns as rows")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix contains non-finite entries")
    _, cols = linear_sum_assignment(C)
    return cols.astype(int)


# ---------------------------------------------------------------------------
# pairwise-swap descent
# ---------------------------------------------------------------------------


class _OracleView:
    """Normalized access to a gain oracle (callable or object)."""

    def __init__(self, oracle):
        if callable(oracle) and not hasattr(oracle, "gain"):
            self.gain = oracle
            self.gain_row = None
            self.apply = None
            self.cost = None
            self.i_range = None
            self.j_range = None
            self.tol = 0.0
        else:
            self.gain = oracle.gain
            self.gain_row = getattr(oracle, "gain_row", None)
            self.apply = getattr(oracle, "apply", None)
            self.cost = getattr(oracle, "cost", None)
            self.i_range = getattr(oracle, "i_range", None)
            self.j_range = getattr(oracle, "j_range", None)
            self.tol = float(getattr(oracle, "tol", 0.0))


def permutation_descent(
    gain,
    sigma0,
    sweep: str = "full",
    max_sweeps: int | None = None,
) -> np.ndarray:
    """First-improvement 2-swap descent over permutations.

    ``gain`` is either a callable ``s(i, j, sigma)`` or an object with a
    ``gain`` method; the value is the decrease of the underlying cost if
    entries i and j of sigma are exchanged, and a swap is committed
    whenever it is strictly positive.  Oracles may additionally provide
    ``gain_row(i, j_array, sigma)`` for vectorized sweeps, ``apply(i, j,
    sigma)`` invoked after each committed swap, ``cost(sigma)`` for the
    debug consistency check, ``i_range`` / ``j_range`` to restrict a
    bipartite sweep, and ``tol`` raising the acceptance threshold above
    zero when the oracle's arithmetic cannot resolve near-ties.  Sweeps
    repeat until no swap improves (or ``max_sweeps`` is hit); a hard cap
    on accepted swaps guards against inconsistent oracles.
    """
    sigma = np.asarray(sigma0, dtype=int).copy()
    n = sigma.shape[0]
    if np.unique(sigma).shape[0] != n:
        raise ValueError("sigma0 must be a permutation (distinct entries)")

    view = _OracleView(gain)
    if sweep == "full":
        i_range = np.arange(n)
        j_all = np.arange(n)
    elif sweep == "bipartite":
        if view.i_range is None or view.j_range is None:
            raise ValueError("bipartite sweep needs oracle i_range/j_range")
        i_range = np.asarray(view.i_range, dtype=int)
        j_all = np.asarray(view.j_range, dtype=int)
    else:
        raise ValueError(f"unknown sweep {sweep!r}")

    debug = _debug_enabled() and view.cost is not None
    cap = 10 * max(1, i_range.shape[0]) * max(1, j_all.shape[0])
    tol = view.tol
    accepted = 0
    sweeps = 0

    def commit(i: int, j: int, g: float) -> None:
        nonlocal accepted
        if debug:
            before = view.cost(sigma)
        sigma[i], sigma[j] = sigma[j], sigma[i]
        if view.apply is not None:
            view.apply(i, j, sigma)
        if debug:
            after = view.cost(sigma)
            if abs((before - after) - g) > 1e-8 * max(1.0, abs(before)):
                raise ValueError("gain oracle inconsistent with cost oracle")
        accepted += 1
        if accepted > cap:
            raise RuntimeError("permutation descent exceeded its swap budget")

    improved = True
    while improved and (max_sweeps is None or sweeps < max_sweeps):
        improved = False
        sweeps += 1
        for i in i_range:
            if sweep == "full":
                j_candidates = j_all[i + 1 :]
            else:
                j_candidates = j_all
            if j_candidates.shape[0] == 0:
                continue
            if view.gain_row is not None:
                start = 0
                while start < j_candidates.shape[0]:
                    g = np.asarray(
                        view.gain_row(int(i), j_candidates[start:], sigma),
                        dtype=float,
                    )
                    pos = np.flatnonzero(g > tol)
                    if pos.shape[0] == 0:
                        break
                    p = int(pos[0])
                    commit(int(i), int(j_candidates[start + p]), float(g[p]))
                    improved = True
                    start += p + 1
            else:
                for j in j_candidates:
                    g = float(view.gain(int(i), int(j), sigma))
                    if g > tol:
                        commit(int(i), int(j), g)
                        improved = True
    return sigma


# ---------------------------------------------------------------------------
# explicit gradient descent
# ---------------------------------------------------------------------------

_LINE_EVALS = 50


def _bracket_and_brent(phi, lam_init: float, phi0: float) -> float | None:
    """Expand from 0 by doubling until phi stops decreasing, then Brent.

    Returns the chosen step, or None when no step below phi(0) was found
    within the evaluation budget.
    """
    evals = 0
    lam = lam_init
    f = phi(lam)
    evals += 1
    while f >= phi0 and evals < _LINE_EVALS // 2:
        lam *= 0.5
        f = phi(lam)
        evals += 1
    if f >= phi0:
        return None

    a, b, fb = 0.0, lam, f
    c = None
    while evals < _LINE_EVALS:
        nxt = 2.0 * b
        fn = phi(nxt)
        evals += 1
        if fn >= fb:
            c = nxt
            break
        a, b, fb = b, nxt, fn
    if c is None:
        return b
    try:
        res = minimize_scalar(
            phi,
            bracket=(a, b, c),
            method="brent",
            options={"maxiter": max(3, _LINE_EVALS - evals)},
        )
        lam = float(res.x)
    except Exception:
        return b
    return lam if lam > 0.0 else b


def _check_gradient(J, gradJ, x: np.ndarray) -> None:
    g = np.asarray(gradJ(x), dtype=float)
    h = 1e-6 * max(1.0, float(np.abs(x).max()))
    fd = np.empty_like(g)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        fd[idx] = (J(xp) - J(xm)) / (2.0 * h)
        it.iternext()
    scale = max(1.0, float(np.abs(g).max()))
    if np.abs(g - fd).max() > 1e-3 * scale:
        raise ValueError("gradient oracle inconsistent with objective")


def explicit_descent(J, gradJ, X0, eps: float = 1e-8, maxiter: int = 200):
    """Gradient descent with a norm-minimizing line search.

    Each iteration picks the step length minimizing |gradJ(X - lam
    gradJ(X))| via doubling expansion plus Brent, then halves the step as
    needed so J never increases.  Stops when |gradJ| <= eps or after
    ``maxiter`` iterations.
    """
    x = np.array(X0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("X0 contains non-finite entries")
    if _debug_enabled():
        _check_gradient(J, gradJ, x)

    fx = float(J(x))
    lam_prev = 1.0
    for _ in range(maxiter):
        g = np.asarray(gradJ(x), dtype=float)
        gn = float(np.linalg.norm(g))
        if gn <= eps:
            break

        def phi(lam: float) -> float:
            return float(np.linalg.norm(np.asarray(gradJ(x - lam * g))))

        lam = _bracket_and_brent(phi, lam_prev, gn)
        if lam is None:
            lam = lam_prev / 2.0

        x_new = x - lam * g
        f_new = float(J(x_new))
        tol = 1e-12 * max(1.0, abs(fx))
        halvings = 0
        while f_new > fx + tol and halvings < 60:
            lam *= 0.5
            x_new = x - lam * g
            f_new = float(J(x_new))
            halvings += 1
        if f_new > fx + tol:
            raise ValueError("descent step increases objective")
        x, fx, lam_prev = x_new, f_new, max(lam, 1e-300)
    return x
