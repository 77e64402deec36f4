"""Parameter counting, information criteria and the model selection sweep."""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CFunHDDCError, ConfigError, SelectionError

__all__ = [
    "ComplexityCount",
    "Candidate",
    "SelectionReport",
    "count_parameters",
    "bic",
    "aic",
    "cattell_select",
    "fit_restarts",
    "select_model",
    "merge_reports",
    "data_fingerprint",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ComplexityCount:
    """Free parameters split into means/proportions (h), orientations (w),
    variances (D) and the contamination pair (beta, eta) per cluster."""

    h: int
    w: int
    D: int
    extra: int

    @property
    def total(self) -> int:
        return self.h + self.w + self.D + self.extra


def count_parameters(K: int, B: int, d) -> ComplexityCount:
    d = [int(x) for x in np.broadcast_to(np.asarray(d), (K,))]
    if K < 1 or B < 1:
        raise ValueError("K and B must be positive")
    for dk in d:
        if not 1 <= dk <= B:
            raise ValueError(f"intrinsic dimension {dk} outside [1, {B}]")
    h = K * B + K - 1
    # d(B - (d+1)/2) = (2dB - d(d+1)) / 2, and d(d+1) is even
    w = sum((2 * dk * B - dk * (dk + 1)) // 2 for dk in d)
    D = K + sum(d)
    return ComplexityCount(h, w, D, 2 * K)


def bic(loglik: float, n_params: int, n: int) -> float:
    """Schwarz criterion in the larger-is-better convention."""
    if n < 1:
        raise ValueError("n must be positive")
    return loglik - 0.5 * n_params * math.log(n)


def aic(loglik: float, n_params: int) -> float:
    return loglik - n_params


def cattell_select(eigenvalues, threshold: float) -> int:
    """Scree-test dimension: the last eigenvalue gap that is at least
    ``threshold`` times the largest gap."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size < 2:
        raise ValueError("the scree test needs at least two eigenvalues")
    diffs = lam[:-1] - lam[1:]
    top = diffs.max()
    if top <= 0:
        logger.info("scree test: flat eigenvalues, dimension set to 1")
        return 1
    passing = np.flatnonzero(diffs >= threshold * top)
    return int(passing[-1]) + 1


def data_fingerprint(coeffs, gram_sqrt) -> str:
    h = hashlib.sha256()
    for arr in (coeffs, gram_sqrt):
        arr = np.ascontiguousarray(arr, dtype=float)
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()[:16]


@dataclass
class Candidate:
    """One cell of the sweep: the best restart for a given K and dimension setting."""

    K: int
    d_setting: tuple
    strategy: str
    restart: int | None
    dims: tuple | None
    loglik: float | None
    n_params: int | None
    bic: float | None
    aic: float | None
    converged: bool
    failed: bool
    n_failed_restarts: int = 0
    result: object = field(default=None, repr=False)

    def sort_key(self):
        # best first: higher BIC, then smaller K, smaller total dimension, earlier restart
        return (-self.bic, self.K, sum(self.dims), self.restart)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "strategy": self.strategy,
            "d_setting": list(self.d_setting),
            "restart": self.restart,
            "dims": None if self.dims is None else list(self.dims),
            "loglik": self.loglik,
            "n_params": self.n_params,
            "bic": self.bic,
            "aic": self.aic,
            "converged": self.converged,
            "failed": self.failed,
            "n_failed_restarts": self.n_failed_restarts,
        }


@dataclass
class SelectionReport:
    candidates: list
    chosen: Candidate
    fingerprint: str
    tie_break: list

    @property
    def best(self):
        return self.chosen.result

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "candidates": [c.to_dict() for c in self.candidates],
            "chosen": self.chosen.to_dict(),
            "tie_break": self.tie_break,
        }


def _restart_seeds(seed, K, d_setting, nb_init):
    ss = np.random.SeedSequence([0 if seed is None else int(seed), int(K)] + [int(x) for x in d_setting])
    return [int(s.generate_state(1)[0]) for s in ss.spawn(nb_init)]


def fit_restarts(coeffs, K, dims, gram_sqrt, init_config, fit_config=None, log_det_gram=None, seeds=None):
    """Run ``nb_init`` initialisations and keep the best converged fit by BIC.

    Returns ``(best_result, best_restart_index, n_failed)``; the result is
    ``None`` when every restart failed. Non-converged fits are used only when
    no restart converged.
    """
    from .ecm import FitConfig, fit
    from .initialization import initialize

    fit_config = fit_config or FitConfig()
    if seeds is None:
        seeds = _restart_seeds(init_config.seed, K, np.atleast_1d(dims), init_config.nb_init)
    best, best_idx, best_key, failed = None, None, None, 0
    for r, seed in enumerate(seeds):
        try:
            state = initialize(coeffs, K, init_config, seed=seed)
            res = fit(coeffs, K, dims, state, gram_sqrt, fit_config, log_det_gram=log_det_gram)
        except CFunHDDCError as exc:
            logger.debug("restart %d (K=%d) failed: %s", r, K, exc)
            failed += 1
            continue
        key = (res.converged, res.bic)
        if best is None or key > best_key:
            best, best_idx, best_key = res, r, key
    return best, best_idx, failed


def _run_cell(args):
    coeffs, K, d_setting, strategy, gram_sqrt, log_det_gram, init_config, fit_config, seeds, B = args
    from .ecm import FitConfig

    if strategy == "cattell":
        cfg = FitConfig(fit_config.eps, fit_config.max_iter, float(d_setting[0]), fit_config.eta_min)
        dims = B - 1
    else:
        cfg = fit_config
        dims = d_setting if len(d_setting) > 1 else d_setting[0]
    res, idx, failed = fit_restarts(coeffs, K, dims, gram_sqrt, init_config, cfg, log_det_gram, seeds)
    if res is None:
        return Candidate(K, tuple(d_setting), strategy, None, None, None, None, None, None, False, True, failed)
    return Candidate(
        K, tuple(d_setting), strategy, idx, tuple(res.model.dims), res.loglik, res.n_params,
        res.bic, res.aic, res.converged, False, failed, res,
    )


def select_model(
    coeffs,
    gram_sqrt,
    K_range,
    d_grid=None,
    cattell_thresholds=None,
    init_config=None,
    fit_config=None,
    per_cluster=False,
    n_jobs=None,
) -> SelectionReport:
    """Sweep cluster counts and intrinsic-dimension settings, choosing by BIC.

    Exactly one of ``d_grid`` (intrinsic dimensions, shared by all clusters
    unless ``per_cluster``) and ``cattell_thresholds`` must be given.
    ``n_jobs`` defaults to the ``CFUNHDDC_THREADS`` environment variable, or 1.
    """
    from .ecm import FitConfig, _log_det_gram
    from .initialization import InitConfig

    init_config = init_config or InitConfig()
    fit_config = fit_config or FitConfig()
    coeffs = np.asarray(coeffs, dtype=float)
    B = coeffs.shape[1]
    K_range = [int(k) for k in K_range]
    if not K_range:
        raise ConfigError("empty K range", module="selection")
    if (d_grid is None) == (cattell_thresholds is None):
        raise ConfigError("give exactly one of d_grid and cattell_thresholds", module="selection")
    if d_grid is not None:
        d_grid = [int(d) for d in d_grid]
        if not d_grid:
            raise ConfigError("empty dimension grid", module="selection")
        if min(d_grid) < 1 or max(d_grid) >= B:
            raise ConfigError(f"dimension grid must lie in [1, {B - 1}]", module="selection")
    elif not list(cattell_thresholds):
        raise ConfigError("empty threshold list", module="selection")

    cells = []
    for K in K_range:
        if d_grid is not None:
            settings = itertools.product(d_grid, repeat=K) if per_cluster else ((d,) for d in d_grid)
            strategy = "grid"
        else:
            settings = ((float(th),) for th in cattell_thresholds)
            strategy = "cattell"
        for setting in settings:
            # thresholds are fractional: scale them so distinct values give distinct seeds
            key = [round(x * 1000) for x in setting] if strategy == "cattell" else list(setting)
            seeds = _restart_seeds(init_config.seed, K, key, init_config.nb_init)
            cells.append((K, tuple(setting), strategy, seeds))

    log_det_gram = _log_det_gram(gram_sqrt)
    jobs = [(coeffs, K, s, strat, gram_sqrt, log_det_gram, init_config, fit_config, seeds, B) for K, s, strat, seeds in cells]
    if n_jobs is None:
        n_jobs = int(os.environ.get("CFUNHDDC_THREADS", "1") or 1)
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            candidates = list(pool.map(_run_cell, jobs))
    else:
        candidates = [_run_cell(j) for j in jobs]

    ok = [c for c in candidates if not c.failed]
    if not ok:
        raise SelectionError("every cell of the selection sweep failed")
    pool_ = [c for c in ok if c.converged] or ok
    ranked = sorted(pool_, key=Candidate.sort_key)
    chosen = ranked[0]
    tie_break = [c.to_dict() for c in ranked[:3]]
    return SelectionReport(candidates, chosen, data_fingerprint(coeffs, gram_sqrt), tie_break)


def merge_reports(*reports) -> SelectionReport:
    """Combine sweeps run on the same coefficients and basis into one report.

    Raises
    ------
    SelectionError
        If the reports were computed on different data or bases, whose
        likelihoods are not comparable.
    """
    if not reports:
        raise SelectionError("nothing to merge")
    fp = reports[0].fingerprint
    for r in reports[1:]:
        if r.fingerprint != fp:
            raise SelectionError("cannot compare BIC across different coefficient matrices or bases")
    candidates = [c for r in reports for c in r.candidates]
    ok = [c for c in candidates if not c.failed]
    pool_ = [c for c in ok if c.converged] or ok
    ranked = sorted(pool_, key=Candidate.sort_key)
    return SelectionReport(candidates, ranked[0], fp, [c.to_dict() for c in ranked[:3]])
