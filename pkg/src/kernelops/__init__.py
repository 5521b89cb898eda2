"""Kernel-based regression, discrepancy minimization, clustering,
multiscale estimation and sample transport.

The package is organized around a scaled kernel object produced by
``fit_scaling``: regression operators, discrepancy functionals,
clustering methods, multiscale divide-and-conquer estimators, sampler
maps and transition-matrix estimators all consume it.  ``kernelops.bench``
holds the command-line benchmark harness.
"""

from .kernels import (
    GaussianKernel,
    KernelFamily,
    MaternL1Kernel,
    ScaledKernel,
    as_points,
    discrepancy_matrix,
    fit_scaling,
    get_kernel_family,
    gram,
    kernel_family_tags,
    mmd,
    register_kernel_family,
)
from .regression import (
    Regressor,
    error_bound,
    fit,
    gradient_operator,
    laplacian_operator,
    norm_estimate,
    predict,
)
from .solvers import (
    explicit_descent,
    greedy_search,
    lsap_exact,
    permutation_descent,
)
from .clustering import (
    ClusterModel,
    balanced_assign,
    greedy_discrepancy_clusters,
    greedy_function_clusters,
    kmeans_baseline,
    metrics,
    sharp_discrepancy,
    subset_refine,
)
from .multiscale import (
    MultiscaleRegressor,
    MultiscaleTransport,
    OTClusterMatch,
    fit_multiscale,
    fit_multiscale_transport,
    ot_cluster_match,
    predict_multiscale,
)
from .transport import (
    BiStochasticMatrix,
    ConditionalSampler,
    SamplerMap,
    conditional_expectation,
    conditional_sampler,
    generate,
    ipf,
    pi_algorithm,
    sample_map,
    transition_nw,
)
from . import serialize

__version__ = "0.1.0"

__all__ = [
    "GaussianKernel",
    "KernelFamily",
    "MaternL1Kernel",
    "ScaledKernel",
    "as_points",
    "discrepancy_matrix",
    "fit_scaling",
    "get_kernel_family",
    "gram",
    "kernel_family_tags",
    "mmd",
    "register_kernel_family",
    "Regressor",
    "error_bound",
    "fit",
    "gradient_operator",
    "laplacian_operator",
    "norm_estimate",
    "predict",
    "explicit_descent",
    "greedy_search",
    "lsap_exact",
    "permutation_descent",
    "ClusterModel",
    "balanced_assign",
    "greedy_discrepancy_clusters",
    "greedy_function_clusters",
    "kmeans_baseline",
    "metrics",
    "sharp_discrepancy",
    "subset_refine",
    "MultiscaleRegressor",
    "MultiscaleTransport",
    "OTClusterMatch",
    "fit_multiscale",
    "fit_multiscale_transport",
    "ot_cluster_match",
    "predict_multiscale",
    "BiStochasticMatrix",
    "ConditionalSampler",
    "SamplerMap",
    "conditional_expectation",
    "conditional_sampler",
    "generate",
    "ipf",
    "pi_algorithm",
    "sample_map",
    "transition_nw",
    "serialize",
    "__version__",
]
