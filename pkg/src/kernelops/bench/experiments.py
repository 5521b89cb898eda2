"""Experiment drivers emitting deterministic CSV tables.

Every driver takes a parsed config plus a seed, runs its grid in a fixed
order, writes ``results.csv`` (and plot-ready ``*.plotdata`` files) under
the output directory, and returns the rows.  With the seed fixed, all
output except the wall-clock ``exec_time``/``time`` column is identical
across runs.
"""

from __future__ import annotations

import os
import time

import numpy as np
from scipy.spatial.distance import cdist

from ..kernels import discrepancy_matrix, fit_scaling
from ..clustering import (
    ClusterModel,
    balanced_assign,
    greedy_discrepancy_clusters,
    kmeans_baseline,
    metrics,
    sharp_discrepancy,
)
from ..multiscale import fit_multiscale, fit_multiscale_transport
from ..regression import fit, predict
from ..solvers import lsap_exact
from ..transport import (
    conditional_expectation,
    conditional_sampler,
    pi_algorithm,
    sample_map,
    transition_nw,
)
from .config import Config, ConfigError
from .datagen import (
    gen_blobs,
    gen_linear_conditional,
    gen_ot_instance,
    make_brownian_basket,
)
from .mnist import (
    DataError,
    MNIST_DIR_ENV,
    load_digits_bundled,
    load_mnist,
    one_hot,
)

__all__ = [
    "cluster_benchmark",
    "mnist_classify",
    "ot_benchmark",
    "bachelier_benchmark",
    "conditional_demo",
]


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: str, header: str, rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_plotdata(path: str, pairs: list[tuple[float, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for x, y in pairs:
            fh.write(f"{_fmt(x)} {_fmt(y)}\n")


# ---------------------------------------------------------------------------
# clustering metrics table
# ---------------------------------------------------------------------------


def _random_balanced_model(k, X, n_clusters: int, seed: int) -> ClusterModel:
    rng = np.random.default_rng([seed, 1])
    idx = rng.choice(X.shape[0], size=n_clusters, replace=False)
    centroids = X[idx]
    D = discrepancy_matrix(k, centroids, X)
    sigma = balanced_assign(D)
    return ClusterModel(
        centroids=centroids,
        assignment=sigma,
        source_indices=idx,
        allocator="balanced",
        kernel=k,
        training=X,
    )


def cluster_benchmark(cfg: Config, seed: int, out_dir: str) -> list[list[str]]:
    """Quality metrics of the clustering methods on a blob mixture."""
    n_x = cfg.require_positive("n_x", cfg.get_int("n_x", 1024))
    n_y = cfg.require_positive("n_y", cfg.get_int("n_y", 128))
    dim = cfg.require_positive("dim", cfg.get_int("dim", 2))
    modes = cfg.require_positive("modes", cfg.get_int("modes", 5))
    family = cfg.get_str("kernel", "gaussian")
    methods = cfg.get_list("methods", "greedy,sharp,kmeans,balanced-random")
    if n_y > n_x:
        raise ConfigError("n_y: must not exceed n_x")

    X = gen_blobs(modes, n_x, dim, seed=seed)
    k = fit_scaling(X, X, family)

    greedy_model = None

    def need_greedy():
        nonlocal greedy_model
        if greedy_model is None:
            greedy_model = greedy_discrepancy_clusters(k, X, n_y)
        return greedy_model

    rows: list[list[str]] = []
    for method in methods:
        t0 = time.perf_counter()
        if method == "greedy":
            model = need_greedy()
        elif method == "sharp":
            model = sharp_discrepancy(
                k,
                X,
                need_greedy().centroids,
                eps=cfg.get_float("sharp_eps", 1e-6),
                maxiter=cfg.get_int("sharp_maxiter", 100),
            )
        elif method == "kmeans":
            model = kmeans_baseline(X, n_y, seed=seed)
        elif method == "balanced-random":
            model = _random_balanced_model(k, X, n_y, seed)
        else:
            raise ConfigError(f"methods: unknown clustering method {method!r}")
        elapsed = time.perf_counter() - t0
        m = metrics(model, X, k)
        rows.append(
            [
                method,
                str(n_x),
                str(n_y),
                f"{elapsed:.6f}",
                _fmt(m["inertia"]),
                _fmt(m["mmd"]),
            ]
        )

    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "results.csv"),
        "method,N_X,N_Y,exec_time,inertia,MMD",
        rows,
    )
    return rows


# ---------------------------------------------------------------------------
# digit classification
# ---------------------------------------------------------------------------

_CLAMP = 1e-3


def _label_targets(labels: np.ndarray) -> np.ndarray:
    """One-hot labels pushed strictly inside the unit cube: clamp, rescale
    rows to unit mass, then take logarithms (so the final prediction can
    be softmaxed back)."""
    H = one_hot(labels)
    H = np.clip(H, _CLAMP, 1.0 - _CLAMP)
    H = H / H.sum(axis=1, keepdims=True)
    return np.log(H)


def _classify(scores: np.ndarray) -> np.ndarray:
    # softmax is monotone per-row, so argmax of the softmax is argmax of
    # the raw scores; computed explicitly to keep probabilities available
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    probs = e / e.sum(axis=1, keepdims=True)
    return np.argmax(probs, axis=1)


def _load_classification_data(cfg: Config, mnist_dir: str | None):
    dataset = cfg.get_str("dataset", "auto")
    directory = mnist_dir or os.environ.get(MNIST_DIR_ENV)
    if dataset not in ("auto", "mnist", "digits"):
        raise ConfigError(f"dataset: unknown dataset {dataset!r}")
    if dataset in ("auto", "mnist") and directory and os.path.isdir(directory):
        return ("mnist",) + load_mnist(directory)
    if dataset == "mnist":
        raise DataError(
            "mnist dataset requested but no directory with IDX files was "
            f"given (flag --mnist-dir or ${MNIST_DIR_ENV})"
        )
    images, labels = load_digits_bundled()
    split_seed = cfg.get_int("split_seed", 0)
    rng = np.random.default_rng(split_seed)
    order = rng.permutation(images.shape[0])
    n_train = int(round(0.8 * images.shape[0]))
    tr, te = order[:n_train], order[n_train:]
    return "digits", images[tr], labels[tr], images[te], labels[te]


def mnist_classify(
    cfg: Config,
    seed: int,
    out_dir: str | None = None,
    mnist_dir: str | None = None,
) -> dict:
    """Classify the held-out digit images with kernel regression.

    Targets are the log of row-normalized clamped one-hot labels; the
    predicted class is the argmax of the softmaxed regression output.
    Center selection (greedy or random), interpolation on selected
    centers, and the multiscale fit are all driven by the ``modes`` key.
    """
    name, train_x, train_y, test_x, test_y = _load_classification_data(
        cfg, mnist_dir
    )
    family = cfg.get_str("kernel", "matern-l1")
    default_centers = 2000 if name == "mnist" else 150
    n_centers = cfg.require_positive(
        "n_centers", cfg.get_int("n_centers", default_centers)
    )
    epsilon = cfg.get_float("epsilon", 1e-9)
    modes = cfg.get_list("modes", "greedy,random")
    select_cap = cfg.get_int("select_cap", 4000)
    n_train = train_x.shape[0]
    if n_centers > n_train:
        raise ConfigError("n_centers: exceeds the training set size")

    targets = _label_targets(train_y)
    k = fit_scaling(train_x, train_x, family)
    rng = np.random.default_rng(seed)

    def greedy_indices() -> np.ndarray:
        if 0 < select_cap < n_train:
            pool = rng.choice(n_train, size=select_cap, replace=False)
        else:
            pool = np.arange(n_train)
        sub = greedy_discrepancy_clusters(k, train_x[pool], n_centers)
        return pool[sub.source_indices]

    results = {}
    rows: list[list[str]] = []
    for mode in modes:
        t0 = time.perf_counter()
        if mode == "greedy":
            idx = greedy_indices()
            reg = fit(k, train_x[idx], None, targets[idx], epsilon)
            scores = predict(reg, test_x)
        elif mode == "random":
            idx = rng.choice(n_train, size=n_centers, replace=False)
            reg = fit(k, train_x[idx], None, targets[idx], epsilon)
            scores = predict(reg, test_x)
        elif mode == "interpolation":
            idx = greedy_indices()
            reg = fit(k, train_x, train_x[idx], targets, epsilon)
            scores = predict(reg, test_x)
        elif mode == "multiscale":
            cap = cfg.get_int("multiscale_cap", 8000)
            if 0 < cap < n_train:
                pool = rng.choice(n_train, size=cap, replace=False)
            else:
                pool = np.arange(n_train)
            ms = fit_multiscale(
                k,
                train_x[pool],
                targets[pool],
                n_clusters=cfg.get_int("n_clusters", 10),
                clustering=cfg.get_str("clustering", "greedy"),
                epsilon=epsilon,
                seed=seed,
                balance_sweeps=cfg.get_int("balance_sweeps", 2),
            )
            scores = ms.predict(test_x)
        else:
            raise ConfigError(f"modes: unknown classification mode {mode!r}")
        pred = _classify(scores)
        elapsed = time.perf_counter() - t0
        score = float(np.mean(pred == test_y))
        results[mode] = {"score": score, "exec_time": elapsed}
        rows.append([mode, str(n_centers), _fmt(score), f"{elapsed:.6f}"])

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(
            os.path.join(out_dir, "results.csv"),
            "method,n_centers,score,exec_time",
            rows,
        )
    first = modes[0]
    return {
        "dataset": name,
        "score": results[first]["score"],
        "exec_time": results[first]["exec_time"],
        "modes": results,
    }


# ---------------------------------------------------------------------------
# transport map recovery
# ---------------------------------------------------------------------------


def ot_benchmark(cfg: Config, seed: int, out_dir: str) -> list[list[str]]:
    """Mean squared recovery error of the pushforward map S(x) = x |x|^2."""
    sizes = cfg.get_int_list("sizes", "256,512,1024")
    dims = cfg.get_int_list("dims", "2,10")
    methods = cfg.get_list("methods", "cot,cot-ms")
    n_test = cfg.require_positive("n_test", cfg.get_int("n_test", 1024))
    family = cfg.get_str("kernel", "matern-l1")
    cluster_unit = cfg.require_positive(
        "cluster_unit", cfg.get_int("cluster_unit", 256)
    )

    rows: list[list[str]] = []
    series: dict[tuple[str, int], list[tuple[float, float]]] = {}
    for dim in dims:
        for n in sizes:
            X, Y, Z, SZ = gen_ot_instance(n, dim, seed, n_test=n_test)
            k = fit_scaling(X, Y, family)
            for method in methods:
                t0 = time.perf_counter()
                if method == "cot":
                    # euclidean assignment: for a gradient-of-convex target
                    # map the matching recovers the generating pairs, so the
                    # error is pure regression error and shrinks with N
                    sigma = lsap_exact(cdist(X, Y, "sqeuclidean"))
                    s = sample_map(k, X, Y, sigma=sigma, fit_inverse=False)
                    out = s.forward.predict(Z)
                elif method == "cot-ms":
                    mt = fit_multiscale_transport(
                        X,
                        Y,
                        max(1, n // cluster_unit),
                        k0=k,
                        seed=seed,
                    )
                    out = mt.transport(Z)
                else:
                    raise ConfigError(f"methods: unknown ot method {method!r}")
                elapsed = time.perf_counter() - t0
                mse = float(np.mean(np.sum((out - SZ) ** 2, axis=1)))
                rows.append(
                    [method, str(n), str(dim), _fmt(mse), f"{elapsed:.6f}"]
                )
                series.setdefault((method, dim), []).append((float(n), mse))

    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "results.csv"), "method,N,D,mse,time", rows)
    for (method, dim), pairs in series.items():
        _write_plotdata(
            os.path.join(out_dir, f"ot_{method}_d{dim}.plotdata"), pairs
        )
    return rows


# ---------------------------------------------------------------------------
# conditional expectation pricing
# ---------------------------------------------------------------------------


def _smoothing_centers(X: np.ndarray, m: int) -> np.ndarray:
    """Quantile-strided subset of X along the first coordinate."""
    order = np.argsort(X[:, 0], kind="stable")
    idx = order[np.linspace(0, X.shape[0] - 1, m).round().astype(int)]
    return X[np.sort(idx)]


def bachelier_benchmark(cfg: Config, seed: int, out_dir: str) -> list[list[str]]:
    """Relative error of transition-based conditional expectations against
    the closed-form Gaussian basket price.

    The transition methods produce a noisy per-path estimate at the
    training paths; carrying it to the test paths goes through a
    least-squares fit on a small quantile-strided center set, which
    averages the noise out instead of reproducing it.  The naive
    reference just interpolates the payoff function from the maturity
    sample, so it prices the intrinsic value and misses the time value.
    The marginals are Gaussian already, so scalings skip the
    gaussianizing map.
    """
    sizes = cfg.get_int_list("sizes", "128,256,512")
    dims = cfg.get_int_list("dims", "1")
    methods = cfg.get_list("methods", "pi,nw,ref")
    theta = cfg.get_float("theta", 0.2)
    strike = cfg.get_float("strike", 0.0)
    epsilon = cfg.get_float("epsilon", 1e-9)
    pi_eps = cfg.get_float("pi_eps", 1e-8)
    pi_maxiter = cfg.get_int("pi_maxiter", 300)
    nw_maxiter = cfg.get_int("nw_maxiter", 2000)
    family = cfg.get_str("kernel", "matern-l1")
    n_centers = cfg.get_int("centers", 8)

    rows: list[list[str]] = []
    series: dict[tuple[str, int], list[tuple[float, float]]] = {}
    for dim in dims:
        for n in sizes:
            rng = np.random.default_rng([seed, n, dim])
            basket = make_brownian_basket(dim, rng, theta=theta, strike=strike)
            X, Y = basket.sample_paths(n, rng)
            Z = basket.sample_marginal(n, basket.t1, rng)
            payoff = basket.payoff(Y)
            truth = basket.closed_form(Z)

            for method in methods:
                t0 = time.perf_counter()
                if method == "pi":
                    P = pi_algorithm(X, Y, eps=pi_eps, maxiter=pi_maxiter)
                    f_train = conditional_expectation(P, payoff)
                elif method == "nw":
                    # density-estimator transition: positive Gram entries
                    k_xy = fit_scaling(X, Y, "gaussian")
                    P = transition_nw(k_xy, X, Y, maxiter=nw_maxiter)
                    f_train = conditional_expectation(P, payoff)
                elif method == "ref":
                    k_y = fit_scaling(Y, Y, family, erf_map=False)
                    reg = fit(k_y, Y, None, payoff, epsilon)
                else:
                    raise ConfigError(
                        f"methods: unknown bachelier method {method!r}"
                    )
                if method in ("pi", "nw"):
                    if 0 < n_centers < n:
                        C = _smoothing_centers(X, n_centers)
                        k_c = fit_scaling(C, C, family, erf_map=False)
                        reg = fit(k_c, X, C, f_train, epsilon)
                    else:
                        k_x = fit_scaling(X, X, family, erf_map=False)
                        reg = fit(k_x, X, None, f_train, epsilon)
                f_hat = predict(reg, Z)
                elapsed = time.perf_counter() - t0
                err = float(np.linalg.norm(truth - f_hat))
                denom = float(np.linalg.norm(truth) + np.linalg.norm(f_hat))
                score = err / denom if denom > 0 else 0.0
                rows.append(
                    [method, str(n), str(dim), _fmt(score), f"{elapsed:.6f}"]
                )
                series.setdefault((method, dim), []).append((float(n), score))

    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "results.csv"), "method,N,D,score,time", rows
    )
    for (method, dim), pairs in series.items():
        _write_plotdata(
            os.path.join(out_dir, f"bachelier_{method}_d{dim}.plotdata"), pairs
        )
    return rows


# ---------------------------------------------------------------------------
# conditional generation sweep
# ---------------------------------------------------------------------------


def conditional_demo(cfg: Config, seed: int, out_dir: str) -> list[list[str]]:
    """Generate conditioned samples along a sweep between two condition
    values for a linear-in-x law, sharing one latent block across the
    sweep so endpoint clouds are reproducible."""
    n = cfg.require_positive("n", cfg.get_int("n", 256))
    n_draws = cfg.require_positive("n_draws", cfg.get_int("n_draws", 128))
    x_lo = cfg.get_float("x_lo", 0.3)
    x_hi = cfg.get_float("x_hi", 1.7)
    step = cfg.get_float("step", 0.4)
    if step <= 0 or x_hi < x_lo:
        raise ConfigError("sweep needs x_lo <= x_hi and positive step")

    X, Y = gen_linear_conditional(
        n,
        seed,
        slope=cfg.get_float("slope", 2.0),
        intercept=cfg.get_float("intercept", 1.0),
        noise=cfg.get_float("noise", 0.25),
    )
    sampler = conditional_sampler(
        X,
        Y,
        d_eta_x=cfg.get_int("d_eta_x", 0),
        d_eta_y=cfg.get_int("d_eta_y", 1),
        family=cfg.get_str("kernel", "matern-l1"),
        seed=seed,
    )
    latents = np.random.default_rng([seed, 77]).standard_normal(
        (n_draws, sampler.d_eta_y)
    )

    conditions = []
    x = x_lo
    while x <= x_hi + 1e-12:
        conditions.append(round(x, 12))
        x += step

    rows: list[list[str]] = []
    means: list[tuple[float, float]] = []
    for cond in conditions:
        tiled = np.full((n_draws, 1), cond)
        samples = sampler.sample(tiled, latents)
        means.append((cond, float(samples.mean())))
        for i in range(n_draws):
            rows.append([_fmt(cond), str(i), _fmt(samples[i, 0])])

    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "results.csv"), "condition,draw,y", rows
    )
    _write_plotdata(os.path.join(out_dir, "sweep_means.plotdata"), means)
    return rows
