"""Contaminated high-dimensional Gaussian mixtures for multivariate functional data.

Curves are smoothed onto a B-spline basis, clustered by a mixture whose
clusters live near low-dimensional subspaces, and each curve gets a posterior
probability of being a mild outlier drawn from a variance-inflated copy of
its cluster.
"""

__version__ = "0.1.0"

from .ecm import (
    ClusterParams,
    FitConfig,
    FitResult,
    MixtureModel,
    Responsibilities,
    cluster_log_density,
    cm1_step,
    cm2_step,
    e_step,
    fit,
    map_classify,
    observed_log_likelihood,
)
from .errors import CFunHDDCError
from .funbasis import BasisSystem, CurveSet, build_bspline_basis, smooth_curves
from .initialization import InitConfig, InitState, initialize, trimmed_kmeans
from .io import ingest_csv, normalize_time, write_curves_csv
from .metrics import ari, ari_clustering, ari_outlier, confusion, confusion_matrix
from .selection import SelectionReport, aic, bic, cattell_select, count_parameters, fit_restarts, select_model
from .simulate import LabeledCurves, SimSpec, simulate

__all__ = [
    "__version__",
    "BasisSystem",
    "CFunHDDCError",
    "ClusterParams",
    "CurveSet",
    "FitConfig",
    "FitResult",
    "InitConfig",
    "InitState",
    "LabeledCurves",
    "MixtureModel",
    "Responsibilities",
    "SelectionReport",
    "SimSpec",
    "aic",
    "ari",
    "ari_clustering",
    "ari_outlier",
    "bic",
    "build_bspline_basis",
    "cattell_select",
    "cluster_log_density",
    "cm1_step",
    "cm2_step",
    "confusion",
    "confusion_matrix",
    "count_parameters",
    "e_step",
    "fit",
    "fit_restarts",
    "ingest_csv",
    "initialize",
    "map_classify",
    "normalize_time",
    "observed_log_likelihood",
    "select_model",
    "simulate",
    "smooth_curves",
    "trimmed_kmeans",
    "write_curves_csv",
]
