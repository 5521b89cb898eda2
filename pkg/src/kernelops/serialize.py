"""Flat-file persistence for fitted objects.

Matrices go to CSV (row-major, comma separated, '.' decimal, one row
per line, 17 significant digits so float64 round-trips exactly).
Kernels go to JSON.  Composite objects (regressors, cluster models,
multiscale regressors, sampler maps, conditional samplers) go to
directory bundles of those two formats plus a small meta.json.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .clustering import ClusterModel
from .kernels import ScaledKernel, get_kernel_family
from .multiscale import MultiscaleRegressor
from .regression import Regressor
from .transport import BiStochasticMatrix, ConditionalSampler, SamplerMap

__all__ = [
    "save_matrix",
    "load_matrix",
    "save_kernel",
    "load_kernel",
    "save_regressor",
    "load_regressor",
    "save_cluster_model",
    "load_cluster_model",
    "save_multiscale",
    "load_multiscale",
    "save_sampler_map",
    "load_sampler_map",
    "save_conditional_sampler",
    "load_conditional_sampler",
    "save_bistochastic",
    "load_bistochastic",
]


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


def save_matrix(path, A) -> None:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValueError("only 1-D and 2-D arrays serialize to CSV")
    np.savetxt(path, A, fmt="%.17g", delimiter=",", newline="\n")


def load_matrix(path) -> np.ndarray:
    A = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    return A


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def _kernel_dict(k: ScaledKernel) -> dict:
    return {
        "family": k.family.name,
        "box_mul": np.asarray(k.box_mul, dtype=float).tolist(),
        "box_add": np.asarray(k.box_add, dtype=float).tolist(),
        "alpha": float(k.alpha),
        "erf_map": bool(k.erf_map),
    }


def _kernel_from_dict(d: dict) -> ScaledKernel:
    return ScaledKernel(
        family=get_kernel_family(d["family"]),
        box_mul=np.asarray(d["box_mul"], dtype=float),
        box_add=np.asarray(d["box_add"], dtype=float),
        alpha=float(d["alpha"]),
        erf_map=bool(d["erf_map"]),
    )


def save_kernel(path, k: ScaledKernel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_kernel_dict(k), fh, indent=1)
        fh.write("\n")


def load_kernel(path) -> ScaledKernel:
    with open(path, encoding="utf-8") as fh:
        return _kernel_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# fitted objects
# ---------------------------------------------------------------------------


def _write_meta(directory, meta: dict) -> None:
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def _read_meta(directory) -> dict:
    with open(os.path.join(directory, "meta.json"), encoding="utf-8") as fh:
        return json.load(fh)


def save_regressor(directory, r: Regressor) -> None:
    os.makedirs(directory, exist_ok=True)
    save_kernel(os.path.join(directory, "kernel.json"), r.kernel)
    save_matrix(os.path.join(directory, "support.csv"), r.support)
    save_matrix(os.path.join(directory, "theta.csv"), r.theta)
    _write_meta(directory, {"kind": "regressor", "epsilon": float(r.epsilon)})


def load_regressor(directory) -> Regressor:
    meta = _read_meta(directory)
    return Regressor(
        kernel=load_kernel(os.path.join(directory, "kernel.json")),
        support=load_matrix(os.path.join(directory, "support.csv")),
        theta=load_matrix(os.path.join(directory, "theta.csv")),
        epsilon=float(meta["epsilon"]),
    )


def save_cluster_model(directory, m: ClusterModel) -> None:
    os.makedirs(directory, exist_ok=True)
    save_matrix(os.path.join(directory, "centroids.csv"), m.centroids)
    if m.assignment is not None:
        np.savetxt(
            os.path.join(directory, "assignment.csv"),
            np.asarray(m.assignment, dtype=int)[:, None],
            fmt="%d",
            delimiter=",",
        )
    meta = {"kind": "cluster_model", "allocator": m.allocator}
    if m.source_indices is not None:
        meta["source_indices"] = np.asarray(m.source_indices, int).tolist()
    _write_meta(directory, meta)
    if m.kernel is not None:
        save_kernel(os.path.join(directory, "kernel.json"), m.kernel)
    if m.training is not None:
        save_matrix(os.path.join(directory, "training.csv"), m.training)


def load_cluster_model(directory) -> ClusterModel:
    meta = _read_meta(directory)
    kernel_path = os.path.join(directory, "kernel.json")
    training_path = os.path.join(directory, "training.csv")
    assign_path = os.path.join(directory, "assignment.csv")
    src = meta.get("source_indices")
    return ClusterModel(
        centroids=load_matrix(os.path.join(directory, "centroids.csv")),
        assignment=np.loadtxt(assign_path, dtype=int, ndmin=1)
        if os.path.exists(assign_path)
        else None,
        source_indices=None if src is None else np.asarray(src, dtype=int),
        allocator=meta["allocator"],
        kernel=load_kernel(kernel_path) if os.path.exists(kernel_path) else None,
        training=load_matrix(training_path)
        if os.path.exists(training_path)
        else None,
    )


def save_multiscale(directory, m: MultiscaleRegressor) -> None:
    os.makedirs(directory, exist_ok=True)
    save_regressor(os.path.join(directory, "coarse"), m.coarse)
    save_cluster_model(os.path.join(directory, "model"), m.model)
    for c, local in enumerate(m.locals):
        if local is not None:
            save_regressor(os.path.join(directory, f"cluster_{c:04d}"), local)
    _write_meta(
        directory,
        {
            "kind": "multiscale_regressor",
            "n_clusters": len(m.locals),
            "has_local": [local is not None for local in m.locals],
        },
    )


def load_multiscale(directory) -> MultiscaleRegressor:
    meta = _read_meta(directory)
    locals_ = [
        load_regressor(os.path.join(directory, f"cluster_{c:04d}"))
        if has
        else None
        for c, has in enumerate(meta["has_local"])
    ]
    return MultiscaleRegressor(
        coarse=load_regressor(os.path.join(directory, "coarse")),
        locals=locals_,
        model=load_cluster_model(os.path.join(directory, "model")),
    )


def save_sampler_map(directory, s: SamplerMap) -> None:
    os.makedirs(directory, exist_ok=True)
    save_regressor(os.path.join(directory, "forward"), s.forward)
    if s.inverse is not None:
        save_regressor(os.path.join(directory, "inverse"), s.inverse)
    np.savetxt(
        os.path.join(directory, "sigma.csv"),
        np.asarray(s.sigma, dtype=int)[:, None],
        fmt="%d",
    )
    save_matrix(os.path.join(directory, "source.csv"), s.source)
    save_matrix(os.path.join(directory, "targets.csv"), s.targets)
    _write_meta(
        directory, {"kind": "sampler_map", "has_inverse": s.inverse is not None}
    )


def load_sampler_map(directory) -> SamplerMap:
    meta = _read_meta(directory)
    inverse = None
    if meta["has_inverse"]:
        inverse = load_regressor(os.path.join(directory, "inverse"))
    return SamplerMap(
        forward=load_regressor(os.path.join(directory, "forward")),
        inverse=inverse,
        sigma=np.loadtxt(os.path.join(directory, "sigma.csv"), dtype=int, ndmin=1),
        source=load_matrix(os.path.join(directory, "source.csv")),
        targets=load_matrix(os.path.join(directory, "targets.csv")),
    )


def save_conditional_sampler(directory, s: ConditionalSampler) -> None:
    os.makedirs(directory, exist_ok=True)
    if s.encoder is not None:
        save_regressor(os.path.join(directory, "encoder"), s.encoder)
    save_regressor(os.path.join(directory, "decoder"), s.decoder)
    save_matrix(os.path.join(directory, "conditions.csv"), s.training_conditions)
    save_matrix(os.path.join(directory, "latents.csv"), s.training_latents)
    save_matrix(os.path.join(directory, "outputs.csv"), s.training_outputs)
    _write_meta(
        directory,
        {
            "kind": "conditional_sampler",
            "d_x": s.d_x,
            "d_y": s.d_y,
            "d_eta_x": s.d_eta_x,
            "d_eta_y": s.d_eta_y,
            "seed": s.seed,
            "has_encoder": s.encoder is not None,
        },
    )


def load_conditional_sampler(directory) -> ConditionalSampler:
    meta = _read_meta(directory)
    encoder = None
    if meta["has_encoder"]:
        encoder = load_regressor(os.path.join(directory, "encoder"))
    return ConditionalSampler(
        encoder=encoder,
        decoder=load_regressor(os.path.join(directory, "decoder")),
        d_x=int(meta["d_x"]),
        d_y=int(meta["d_y"]),
        d_eta_x=int(meta["d_eta_x"]),
        d_eta_y=int(meta["d_eta_y"]),
        seed=int(meta["seed"]),
        training_conditions=load_matrix(os.path.join(directory, "conditions.csv")),
        training_latents=load_matrix(os.path.join(directory, "latents.csv")),
        training_outputs=load_matrix(os.path.join(directory, "outputs.csv")),
    )


def save_bistochastic(directory, b: BiStochasticMatrix) -> None:
    os.makedirs(directory, exist_ok=True)
    save_matrix(os.path.join(directory, "values.csv"), b.values)
    _write_meta(
        directory,
        {
            "kind": "bistochastic",
            "converged": bool(b.converged),
            "sweeps": int(b.sweeps),
        },
    )


def load_bistochastic(directory) -> BiStochasticMatrix:
    meta = _read_meta(directory)
    return BiStochasticMatrix(
        values=load_matrix(os.path.join(directory, "values.csv")),
        converged=bool(meta["converged"]),
        sweeps=int(meta["sweeps"]),
    )
