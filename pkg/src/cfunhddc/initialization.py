"""Starting partitions for the ECM algorithm.

Trimmed k-means is the recommended starter: the fraction ``alpha`` of points
farthest from their centre is left out of every centre update, so a handful
of outlying curves cannot drag a centroid away from its class.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["InitConfig", "InitState", "TrimmedKMeansResult", "kmeans_plusplus", "trimmed_kmeans", "initialize"]

logger = logging.getLogger(__name__)

METHODS = ("trimmed", "kmeans", "random")
NORMAL_WEIGHT = 0.99


@dataclass(frozen=True)
class InitConfig:
    method: str = "trimmed"
    alpha: float = 0.2
    nb_init: int = 10
    max_iter: int = 100
    seed: int | None = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown init method {self.method!r}; expected one of {METHODS}")
        if not 0 <= self.alpha < 1:
            raise ConfigError(f"trim fraction must lie in [0, 1), got {self.alpha}")
        if self.nb_init < 1:
            raise ConfigError("nb_init must be at least 1")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be non-negative")


@dataclass
class InitState:
    """Hard assignment ``z``, normality weights ``v`` and inflation factors ``eta``."""

    z: np.ndarray
    v: np.ndarray
    eta: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return self.z.argmax(axis=1)

    @classmethod
    def from_labels(cls, labels, K):
        labels = np.asarray(labels, dtype=int)
        z = np.zeros((labels.size, K))
        z[np.arange(labels.size), labels] = 1.0
        return cls(z, NORMAL_WEIGHT * z, np.ones(K))


@dataclass
class TrimmedKMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    trimmed: np.ndarray
    objective: list
    n_iter: int


def _sq_dist(x, centers):
    d = (x * x).sum(1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_plusplus(x, K, rng) -> np.ndarray:
    """k-means++ seeding: spread initial centres by D^2 sampling."""
    n = x.shape[0]
    centers = np.empty((K, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dist(x, centers[:1]).ravel()
    for k in range(1, K):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[k] = x[idx]
        closest = np.minimum(closest, _sq_dist(x, centers[k:k + 1]).ravel())
    return centers


def trimmed_kmeans(points, K, alpha=0.2, seed=None, max_iter=100, initial_centers=None) -> TrimmedKMeansResult:
    """Lloyd iterations with the ``ceil(alpha * n)`` worst-fitting points trimmed.

    Each iteration assigns every point to its nearest centre, trims the points
    farthest from their centre, and recomputes centres from the kept members.
    Trimmed points keep their nearest-centre label. With ``alpha = 0`` this is
    plain Lloyd k-means.
    """
    x = np.asarray(points, dtype=float)
    n = x.shape[0]
    if K < 1:
        raise ConfigError("K must be at least 1")
    n_trim = math.ceil(alpha * n - 1e-12) if alpha > 0 else 0
    if n - n_trim < K:
        raise ConfigError(f"only {n - n_trim} untrimmed points for {K} clusters")
    rng = np.random.default_rng(seed)
    if initial_centers is None:
        centers = kmeans_plusplus(x, K, rng)
    else:
        centers = np.array(initial_centers, dtype=float)

    labels = None
    kept = np.ones(n, dtype=bool)
    objective = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dist(x, centers)
        new_labels = d.argmin(axis=1)
        dmin = d[np.arange(n), new_labels]
        kept = np.ones(n, dtype=bool)
        if n_trim:
            # stable sort keeps tie-breaking deterministic
            order = np.argsort(dmin, kind="stable")
            kept[order[n - n_trim:]] = False
        objective.append(float(dmin[kept].sum()))
        if labels is not None and np.array_equal(new_labels, labels) and np.array_equal(kept, prev_kept):
            break
        labels, prev_kept = new_labels, kept
        for k in range(K):
            members = kept & (labels == k)
            if members.any():
                centers[k] = x[members].mean(axis=0)
            else:
                far = np.flatnonzero(kept)[np.argmax(dmin[kept])]
                logger.info("trimmed k-means: cluster %d emptied, reseeding from point %d", k, far)
                centers[k] = x[far]
                dmin[far] = 0.0
    d = _sq_dist(x, centers)
    labels = d.argmin(axis=1)
    return TrimmedKMeansResult(centers, labels, ~kept, objective, it)


def _random_labels(n, K, rng, retries=100):
    for _ in range(retries):
        labels = rng.integers(K, size=n)
        if np.unique(labels).size == K:
            return labels
    raise ConfigError(f"could not draw a random partition with {K} non-empty clusters")


def initialize(coeffs, K, config: InitConfig = InitConfig(), seed=None) -> InitState:
    """Initial ``(z, v, eta)`` for one restart.

    ``seed`` overrides ``config.seed`` so that restarts can use derived seeds.
    """
    x = np.asarray(coeffs, dtype=float)
    n = x.shape[0]
    if K > n:
        raise ConfigError(f"K={K} exceeds the number of observations n={n}")
    if K < 1:
        raise ConfigError("K must be at least 1")
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if config.method == "random":
        labels = _random_labels(n, K, rng)
    else:
        alpha = config.alpha if config.method == "trimmed" else 0.0
        labels = trimmed_kmeans(x, K, alpha, seed=rng, max_iter=config.max_iter).labels
    return InitState.from_labels(labels, K)
