"""Fused lasso spatial regression over adaptive minimum spanning trees."""

from ._flat import (
    ConfigError,
    ConvergenceError,
    FlatError,
    UndefinedMetricError,
    ValidationError,
    adjusted_rand_index,
    calinski_harabasz,
    dbscan,
    fit_flat,
    fit_gwr,
    fit_scc,
    pairwise_distances,
    pooled_ols,
    prim_mst,
    rand_index,
    run_cli,
    sdq_axis,
    sdq_nn,
    select_clustering,
    silhouette,
    simulate,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "FlatError",
    "UndefinedMetricError",
    "ValidationError",
    "adjusted_rand_index",
    "calinski_harabasz",
    "dbscan",
    "fit_flat",
    "fit_gwr",
    "fit_scc",
    "pairwise_distances",
    "pooled_ols",
    "prim_mst",
    "rand_index",
    "run_cli",
    "sdq_axis",
    "sdq_nn",
    "select_clustering",
    "silhouette",
    "simulate",
]
