"""Contaminated functional HDDC mixture and its ECM inference.

Each cluster ``k`` is a two-component contaminated Gaussian on the basis
coefficients: normal curves follow ``N(mu_k, Sigma_k)`` and abnormal ones
``N(mu_k, eta_k * Sigma_k)``. The covariance is parameterised through the
metric-whitened space ``y = W^{1/2} c``, in which

    W^{1/2} Sigma_k W^{1/2} = U_k diag(a_k) U_k' + b_k (I - U_k U_k').

All density evaluations work in that space and never build ``Sigma_k``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateClusterError, NumericalError
from .initialization import InitState

__all__ = [
    "ClusterParams",
    "MixtureModel",
    "Responsibilities",
    "FitResult",
    "FitConfig",
    "cluster_log_density",
    "mahalanobis",
    "e_step",
    "cm1_step",
    "cm2_step",
    "observed_log_likelihood",
    "map_classify",
    "fit",
]

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
B_FLOOR = 1e-10


@dataclass
class ClusterParams:
    """Parameters of one contaminated cluster.

    ``mean`` lives in coefficient space; ``U``, ``a`` and ``b`` describe the
    covariance in the whitened space.
    """

    pi: float
    beta: float
    eta: float
    mean: np.ndarray
    U: np.ndarray
    a: np.ndarray
    b: float

    @property
    def d(self) -> int:
        return self.U.shape[1]

    def trace_R(self) -> float:
        """Total variance ``sum(a) + (B - d) * b`` of the cluster in the whitened space."""
        return float(self.a.sum() + (self.U.shape[0] - self.d) * self.b)


@dataclass
class MixtureModel:
    clusters: list
    gram_sqrt: np.ndarray = field(repr=False)
    log_det_gram: float = 0.0

    @property
    def K(self) -> int:
        return len(self.clusters)

    @property
    def B(self) -> int:
        return self.gram_sqrt.shape[0]

    @property
    def dims(self) -> tuple:
        return tuple(c.d for c in self.clusters)

    def get(self, name) -> np.ndarray:
        return np.array([getattr(c, name) for c in self.clusters])


@dataclass
class Responsibilities:
    """Posterior cluster memberships ``t`` and normality probabilities ``s``, both (n, K)."""

    t: np.ndarray
    s: np.ndarray


@dataclass
class FitResult:
    model: MixtureModel
    resp: Responsibilities
    loglik_trace: list
    iterations: int
    converged: bool
    labels: np.ndarray
    outlier: np.ndarray
    n_params: int
    bic: float
    aic: float

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


@dataclass(frozen=True)
class FitConfig:
    """ECM stopping rule and optional scree-test dimension tracking.

    When ``cattell_threshold`` is set, each cluster's intrinsic dimension is
    re-estimated at every CM1 step from its current eigenvalues and the
    ``dims`` passed to :func:`fit` only bound it from above.
    """

    eps: float = 1e-4
    max_iter: int = 200
    cattell_threshold: float | None = None
    eta_min: float = 1.001


def _log_det_gram(gram_sqrt):
    sign, logdet = np.linalg.slogdet(gram_sqrt)
    if sign <= 0:
        raise NumericalError("Gram square root is not positive definite")
    return 2.0 * float(logdet)


def _whitened_mahalanobis(y, mean_y, U, a, b):
    z = y - mean_y
    proj = z @ U
    sq = (z * z).sum(axis=-1)
    proj_sq = proj * proj
    tail = np.maximum(sq - proj_sq.sum(axis=-1), 0.0)
    return (proj_sq / a).sum(axis=-1) + tail / b


def mahalanobis(coeffs, cluster: ClusterParams, gram_sqrt) -> np.ndarray:
    """Squared Mahalanobis distance of coefficient rows under ``Sigma_k``."""
    y = np.asarray(coeffs, dtype=float) @ gram_sqrt
    return _whitened_mahalanobis(y, cluster.mean @ gram_sqrt, cluster.U, cluster.a, cluster.b)


def _normal_log_terms(cluster, B, log_det_gram):
    # log|Sigma_k| = sum log a + (B - d) log b - log|W|
    return sum(np.log(cluster.a)) + (B - cluster.d) * np.log(cluster.b) - log_det_gram


def cluster_log_density(c, cluster: ClusterParams, inflated: bool, gram_sqrt, log_det_gram=None):
    """Gaussian log-density of coefficient vector(s) ``c`` under cluster ``k``.

    Parameters
    ----------
    c : array, shape (B,) or (n, B)
    cluster : ClusterParams
    inflated : bool
        Use the abnormal covariance ``eta_k * Sigma_k`` instead of ``Sigma_k``.
    gram_sqrt : array, shape (B, B)
        Symmetric square root of the Gram matrix.
    log_det_gram : float, optional
        ``log|W|``; computed from ``gram_sqrt`` when omitted.
    """
    c = np.asarray(c, dtype=float)
    B = gram_sqrt.shape[0]
    if log_det_gram is None:
        log_det_gram = _log_det_gram(gram_sqrt)
    maha = mahalanobis(c, cluster, gram_sqrt)
    logdet = _normal_log_terms(cluster, B, log_det_gram)
    if inflated:
        maha = maha / cluster.eta
        logdet = logdet + B * np.log(cluster.eta)
    out = -0.5 * (B * LOG_2PI + logdet + maha)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite log-density for cluster with pi={cluster.pi:.3g}")
    return out


def _all_mahalanobis(y, clusters, gram_sqrt):
    out = np.empty((y.shape[0], len(clusters)))
    for k, cl in enumerate(clusters):
        out[:, k] = _whitened_mahalanobis(y, cl.mean @ gram_sqrt, cl.U, cl.a, cl.b)
    return out


def _component_logs(y, model: MixtureModel, maha_all=None):
    """log(pi_k beta_k f) and log(pi_k (1 - beta_k) f_eta), each (n, K), and the Mahalanobis terms."""
    n, B = y.shape
    K = model.K
    log_norm = np.empty((n, K))
    log_infl = np.empty((n, K))
    if maha_all is None:
        maha_all = _all_mahalanobis(y, model.clusters, model.gram_sqrt)
    for k, cl in enumerate(model.clusters):
        maha = maha_all[:, k]
        base = -0.5 * (B * LOG_2PI + _normal_log_terms(cl, B, model.log_det_gram))
        with np.errstate(divide="ignore"):
            lp, lb, l1b = np.log(cl.pi), np.log(cl.beta), np.log1p(-cl.beta)
        log_norm[:, k] = lp + lb + base - 0.5 * maha
        log_infl[:, k] = lp + l1b + base - 0.5 * (B * np.log(cl.eta) + maha / cl.eta)
    if np.any(np.isnan(log_norm)) or np.any(np.isnan(log_infl)):
        raise NumericalError("NaN in component log-densities")
    return log_norm, log_infl, maha_all


def _e_step_whitened(y, model, maha_all=None):
    log_norm, log_infl, _ = _component_logs(y, model, maha_all)
    log_cluster = np.logaddexp(log_norm, log_infl)
    log_total = logsumexp(log_cluster, axis=1)
    bad = ~np.isfinite(log_total)
    if bad.any():
        raise NumericalError(f"all cluster densities underflow for observation {int(np.flatnonzero(bad)[0])}")
    t = np.exp(log_cluster - log_total[:, None])
    t /= t.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        s = np.exp(log_norm - log_cluster)
    # beta_k = 0 and beta_k = 1 both give finite cluster logs; fill any remaining 0/0
    s = np.where(np.isfinite(s), s, 0.0)
    return Responsibilities(t, np.clip(s, 0.0, 1.0)), float(log_total.sum())


def e_step(coeffs, model: MixtureModel) -> Responsibilities:
    """Posterior cluster and normality probabilities under ``model``."""
    y = np.asarray(coeffs, dtype=float) @ model.gram_sqrt
    return _e_step_whitened(y, model)[0]


def observed_log_likelihood(coeffs, model: MixtureModel) -> float:
    """Sum over observations of the log mixture density."""
    y = np.asarray(coeffs, dtype=float) @ model.gram_sqrt
    log_norm, log_infl, _ = _component_logs(y, model)
    value = float(logsumexp(np.logaddexp(log_norm, log_infl), axis=1).sum())
    if not np.isfinite(value):
        raise NumericalError("non-finite observed log-likelihood")
    return value


def _cm1_whitened(y, coeffs, resp, eta, dims, gram_sqrt, cattell_threshold=None):
    from .selection import cattell_select

    n, B = y.shape
    t, s = resp.t, resp.s
    K = t.shape[1]
    gamma = t.sum(axis=0)
    clusters = []
    for k in range(K):
        d = int(dims[k])
        if cattell_threshold is None and gamma[k] < d + 2:
            raise DegenerateClusterError(
                f"cluster {k} has mass {gamma[k]:.3g} < d + 2 = {d + 2}", cluster=k, mass=float(gamma[k])
            )
        if gamma[k] < 3:
            raise DegenerateClusterError(f"cluster {k} has mass {gamma[k]:.3g}", cluster=k, mass=float(gamma[k]))
        w = t[:, k] * (s[:, k] + (1.0 - s[:, k]) / eta[k])
        mean = (w @ coeffs) / w.sum()
        z = y - mean @ gram_sqrt
        M = (z * w[:, None]).T @ z / gamma[k]
        M = 0.5 * (M + M.T)
        try:
            lam, vec = np.linalg.eigh(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition failed for cluster {k}") from exc
        lam, vec = lam[::-1], vec[:, ::-1]
        trace = float(np.trace(M))
        if cattell_threshold is not None:
            d = min(d, cattell_select(np.maximum(lam, 0.0), cattell_threshold))
            if gamma[k] < d + 2:
                raise DegenerateClusterError(
                    f"cluster {k} has mass {gamma[k]:.3g} < d + 2 = {d + 2}", cluster=k, mass=float(gamma[k])
                )
        a = lam[:d].copy()
        b = (trace - a.sum()) / (B - d)
        b = max(b, B_FLOOR * trace / B, np.finfo(float).tiny)
        a = np.maximum(a, b)
        clusters.append(
            ClusterParams(
                pi=gamma[k] / n,
                beta=float(np.clip((t[:, k] * s[:, k]).sum() / gamma[k], 0.0, 1.0)),
                eta=float(eta[k]),
                mean=mean,
                U=vec[:, :d].copy(),
                a=a,
                b=float(b),
            )
        )
    return clusters


def cm1_step(coeffs, resp: Responsibilities, eta, dims, gram_sqrt, cattell_threshold=None) -> list:
    """Update proportions, normal fractions, means and subspace variances with ``eta`` held fixed.

    Returns a list of :class:`ClusterParams` carrying the unchanged ``eta``.

    Raises
    ------
    DegenerateClusterError
        If a cluster's posterior mass falls below ``d_k + 2``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    y = coeffs @ gram_sqrt
    return _cm1_whitened(y, coeffs, resp, np.asarray(eta, dtype=float), dims, gram_sqrt, cattell_threshold)


def _cm2_whitened(y, resp, clusters, gram_sqrt, eta_min=1.0, maha_all=None):
    B = y.shape[1]
    t, s = resp.t, resp.s
    eta = np.empty(len(clusters))
    for k, cl in enumerate(clusters):
        abnormal = t[:, k] * (1.0 - s[:, k])
        mass = abnormal.sum()
        # gamma_k - gamma_kg <= tiny: no abnormal mass to estimate an inflation from
        if mass <= 1e-10 * max(t[:, k].sum(), 1.0):
            eta[k] = max(1.0, eta_min)
            continue
        if maha_all is None:
            maha = _whitened_mahalanobis(y, cl.mean @ gram_sqrt, cl.U, cl.a, cl.b)
        else:
            maha = maha_all[:, k]
        eta[k] = max(1.0, eta_min, float(abnormal @ maha) / (B * mass))
    return eta


def cm2_step(coeffs, resp: Responsibilities, clusters, gram_sqrt, eta_min=1.0) -> np.ndarray:
    """Closed-form inflation factors given freshly updated CM1 parameters.

    ``eta_min`` raises the lower bound of the update above 1; the default
    keeps the plain ``max(1, .)`` rule.
    """
    y = np.asarray(coeffs, dtype=float) @ gram_sqrt
    return _cm2_whitened(y, resp, clusters, gram_sqrt, eta_min)


def map_classify(resp: Responsibilities):
    """MAP cluster labels and outlier flags.

    Ties go to the lowest cluster index. An observation is normal only if its
    normality probability in the assigned cluster is strictly above 0.5.
    """
    labels = np.argmax(resp.t, axis=1)
    s_assigned = resp.s[np.arange(labels.size), labels]
    return labels, s_assigned <= 0.5


def _with_eta(clusters, eta):
    return [replace(cl, eta=float(e)) for cl, e in zip(clusters, eta)]


def fit(coeffs, K, dims, init: InitState, gram_sqrt, config: FitConfig = FitConfig(), log_det_gram=None) -> FitResult:
    """Run the ECM algorithm from an initial partition.

    One CM1/CM2 pass is made using the initial hard assignment as
    responsibilities, after which E, CM1 and CM2 steps alternate until the
    observed log-likelihood changes by less than ``config.eps`` or
    ``config.max_iter`` iterations have run.

    Parameters
    ----------
    coeffs : array, shape (n, B)
    K : int
    dims : int or sequence of int
        Intrinsic dimension of each cluster (upper bound under the scree test).
    init : InitState
    gram_sqrt : array, shape (B, B)
    config : FitConfig

    Raises
    ------
    DegenerateClusterError
        When a cluster collapses; callers running restarts treat it as a failed start.
    """
    from .selection import aic as _aic, bic as _bic, count_parameters

    coeffs = np.asarray(coeffs, dtype=float)
    n, B = coeffs.shape
    dims = np.broadcast_to(np.asarray(dims, dtype=int), (K,)).copy()
    if np.any(dims < 1) or np.any(dims >= B):
        raise ValueError(f"intrinsic dimensions must lie in [1, {B - 1}], got {dims.tolist()}")
    if init.z.shape != (n, K):
        raise ValueError(f"initial assignment has shape {init.z.shape}, expected {(n, K)}")
    if log_det_gram is None:
        log_det_gram = _log_det_gram(gram_sqrt)
    y = coeffs @ gram_sqrt
    thr = config.cattell_threshold

    resp = Responsibilities(init.z.astype(float), np.asarray(init.v, dtype=float))
    clusters = _cm1_whitened(y, coeffs, resp, np.asarray(init.eta, dtype=float), dims, gram_sqrt, thr)
    # Mahalanobis terms do not depend on eta: shared by CM2 and the following E-step
    maha = _all_mahalanobis(y, clusters, gram_sqrt)
    eta = _cm2_whitened(y, resp, clusters, gram_sqrt, config.eta_min, maha)
    model = MixtureModel(_with_eta(clusters, eta), gram_sqrt, log_det_gram)
    resp, ll = _e_step_whitened(y, model, maha)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        clusters = _cm1_whitened(y, coeffs, resp, model.get("eta"), dims, gram_sqrt, thr)
        maha = _all_mahalanobis(y, clusters, gram_sqrt)
        eta = _cm2_whitened(y, resp, clusters, gram_sqrt, config.eta_min, maha)
        model = MixtureModel(_with_eta(clusters, eta), gram_sqrt, log_det_gram)
        # the E-step for the next iteration also yields the log-likelihood of this model
        resp, ll = _e_step_whitened(y, model, maha)
        trace.append(ll)
        if abs(trace[-1] - trace[-2]) < config.eps:
            converged = True
            break
    else:
        it = config.max_iter

    labels, outlier = map_classify(resp)
    xi = count_parameters(K, B, model.dims).total
    return FitResult(
        model=model,
        resp=resp,
        loglik_trace=trace,
        iterations=it,
        converged=converged,
        labels=labels,
        outlier=outlier,
        n_params=xi,
        bic=_bic(trace[-1], xi, n),
        aic=_aic(trace[-1], xi),
    )
