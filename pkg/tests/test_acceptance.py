"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a ``criterion N: PASS|FAIL`` line (also repeated in the
terminal summary). The replicated simulation studies are marked ``slow``;
deselect them with ``-m "not slow"``.
"""

import json
from collections import Counter
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from cfunhddc.ecm import ClusterParams, FitConfig, Responsibilities, cluster_log_density, cm1_step, fit
from cfunhddc.errors import CFunHDDCError
from cfunhddc.funbasis import build_bspline_basis, matrix_sqrt, smooth_curves
from cfunhddc.initialization import InitConfig, initialize
from cfunhddc.metrics import ari, ari_clustering, ari_outlier
from cfunhddc.selection import count_parameters, fit_restarts, select_model
from cfunhddc.simulate import SimSpec, simulate

REPS = 20
RESULTS = Path(__file__).resolve().parent.parent / "acceptance_results.json"


def _save(key, value):
    data = json.loads(RESULTS.read_text()) if RESULTS.exists() else {}
    data[key] = value
    RESULTS.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


@lru_cache(maxsize=None)
def _smoothed(kind, seed):
    sample = simulate(SimSpec(kind, seed=seed))
    basis = build_bspline_basis([25, 25], 3, sample.curves.domain)
    return sample, basis, smooth_curves(sample.curves, basis)


@lru_cache(maxsize=None)
def _benchmark(kind, method):
    """ARI_c and ARI_o of the best of 10 restarts (K = 4, d = 2) for seeds 0..19."""
    ac, ao = [], []
    for seed in range(REPS):
        sample, basis, coeffs = _smoothed(kind, seed)
        res, _, _ = fit_restarts(coeffs, 4, 2, basis.gram_sqrt, InitConfig(method, 0.2, 10, seed=seed), FitConfig())
        if res is None:
            ac.append(float("nan"))
            ao.append(float("nan"))
            continue
        ac.append(ari_clustering(res, sample))
        ao.append(ari_outlier(res, sample))
    return np.array(ac), np.array(ao)


def test_criterion_1_complexity(record_criterion):
    xi = count_parameters(3, 100, [10, 10, 10]).total
    assert record_criterion(1, xi == 3176, f"count_parameters(K=3, B=100, d=10) = {xi} (target 3176)")


def test_criterion_2_likelihood_ascent(record_criterion):
    sample, basis, coeffs = _smoothed("dataset1", 0)
    worst, n_fits, iters = np.inf, 0, []
    seed = 0
    while n_fits < 10:
        try:
            init = initialize(coeffs, 4, InitConfig("trimmed", seed=seed))
            res = fit(coeffs, 4, 2, init, basis.gram_sqrt)
        except CFunHDDCError:
            seed += 1
            continue
        worst = min(worst, float(np.min(np.diff(res.loglik_trace))) if res.iterations else 0.0)
        iters.append(res.iterations)
        n_fits += 1
        seed += 1
    ok = worst >= -1e-8
    _save("criterion_2", {"min_increment": worst, "iterations": iters})
    assert record_criterion(2, ok, f"min log-likelihood increment over 10 fits = {worst:.3e} (>= -1e-8)")


def test_criterion_3_density_oracle(record_criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        B = int(rng.integers(2, 7))
        d = int(rng.integers(1, B))
        g = rng.normal(size=(B, B))
        gram_sqrt = matrix_sqrt(g @ g.T + B * np.eye(B))
        Q, _ = np.linalg.qr(rng.normal(size=(B, B)))
        b = rng.uniform(0.05, 2.0)
        a = np.sort(b + rng.uniform(0.01, 10.0, d))[::-1]
        cl = ClusterParams(0.5, 0.8, rng.uniform(1.0, 30.0), rng.normal(size=B), Q[:, :d], a, b)
        r = np.r_[a, np.full(B - d, b)]
        inv_root = np.linalg.inv(gram_sqrt)
        sigma = inv_root @ (Q * r) @ Q.T @ inv_root
        x = cl.mean + rng.normal(scale=3.0, size=(4, B))
        for inflated, cov in ((False, sigma), (True, cl.eta * sigma)):
            ours = cluster_log_density(x, cl, inflated, gram_sqrt)
            ref = multivariate_normal(cl.mean, cov).logpdf(x)
            worst = max(worst, float(np.max(np.abs(ours - ref) / np.abs(ref))))
    assert record_criterion(3, worst <= 1e-8, f"max relative error over 100 instances = {worst:.2e} (<= 1e-8)")


@pytest.mark.slow
def test_criterion_4_clustering_accuracy(record_criterion):
    lines, ok = [], True
    for kind in ("dataset1", "dataset2"):
        ac, ao = _benchmark(kind, "trimmed")
        med_c, med_o = float(np.nanmedian(ac)), float(np.nanmedian(ao))
        ok &= med_c >= 0.95 and med_o >= 0.80
        lines.append(f"{kind}: median ARI_c={med_c:.3f} ARI_o={med_o:.3f}")
        _save(f"criterion_4_{kind}", {"ari_c": ac.tolist(), "ari_o": ao.tolist()})
    assert record_criterion(4, ok, "; ".join(lines) + " (targets >= 0.95, >= 0.80)")


@pytest.mark.slow
def test_criterion_5_initialization_ordering(record_criterion):
    _, ao_trim = _benchmark("dataset1", "trimmed")
    _, ao_rand = _benchmark("dataset1", "random")
    m_t, m_r = float(np.nanmean(ao_trim)), float(np.nanmean(ao_rand))
    _save("criterion_5", {"ari_o_trimmed": ao_trim.tolist(), "ari_o_random": ao_rand.tolist()})
    assert record_criterion(5, m_t > m_r, f"mean ARI_o trimmed={m_t:.4f} vs random={m_r:.4f} (trimmed must exceed)")


def _modal(values):
    counts = Counter(values)
    top = max(counts.values())
    # conservative: a tie resolves to the smallest K
    return min(k for k, c in counts.items() if c == top), dict(sorted(counts.items()))


@pytest.mark.slow
def test_criterion_6_cluster_count(record_criterion):
    # reduced sweep: K in {4, 5, 6}, common d in {2..5}, 10 restarts per cell
    chosen = {"dataset1": [], "normal_only": []}
    for kind in chosen:
        for run in range(REPS):
            _, basis, coeffs = _smoothed(kind, run)
            rep = select_model(coeffs, basis.gram_sqrt, [4, 5, 6], d_grid=[2, 3, 4, 5],
                               init_config=InitConfig("trimmed", 0.2, 10, seed=run))
            chosen[kind].append((rep.chosen.K, list(rep.chosen.dims)))
    mode_c, counts_c = _modal([k for k, _ in chosen["dataset1"]])
    mode_n, counts_n = _modal([k for k, _ in chosen["normal_only"]])
    _save("criterion_6", {k: [list(map(str, v)) for v in vals] for k, vals in chosen.items()})
    ok_c, ok_n = mode_c >= 5, mode_n == 4
    detail = (f"contaminated modal K={mode_c} {counts_c} (target >= 5, {'ok' if ok_c else 'missed'}); "
              f"normal-only modal K={mode_n} {counts_n} (target 4, {'ok' if ok_n else 'missed'})")
    assert record_criterion(6, ok_c and ok_n, detail)


def _pair_count_ari(a, b):
    n = len(a)
    both = sa = sb = 0
    for i, j in combinations(range(n), 2):
        x, y = a[i] == a[j], b[i] == b[j]
        sa += x
        sb += y
        both += x and y
    pairs = n * (n - 1) // 2
    if pairs == 0:
        return Fraction(1)
    expected = Fraction(sa * sb, pairs)
    top = Fraction(sa + sb, 2)
    return Fraction(1) if top == expected else (both - expected) / (top - expected)


def test_criterion_7_ari_oracle(record_criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 11))
        a = rng.integers(0, int(rng.integers(1, 5)), n).tolist()
        b = rng.integers(0, int(rng.integers(1, 5)), n).tolist()
        worst = max(worst, abs(ari(a, b) - float(_pair_count_ari(a, b))))
    assert record_criterion(7, worst <= 1e-12, f"max |ARI - pair-count oracle| over 200 pairs = {worst:.1e} (<= 1e-12)")


def test_criterion_8_plain_gaussian_reduction(record_criterion):
    rng = np.random.default_rng(8)
    n, B, K, dims = 60, 6, 2, [2, 3]
    x = rng.normal(size=(n, B)) * np.linspace(3.0, 0.5, B)
    x[n // 2:] += 4.0
    t = rng.dirichlet(np.ones(K), size=n)
    g = rng.normal(size=(B, B))
    gram_sqrt = matrix_sqrt(g @ g.T + B * np.eye(B))
    # beta pinned to 1 -> s = 1; eta pinned to 1
    ours = cm1_step(x, Responsibilities(t, np.ones((n, K))), np.ones(K), dims, gram_sqrt)
    err = 0.0
    for k, d in enumerate(dims):
        w = t[:, k]
        gamma = w.sum()
        mu = (w[:, None] * x).sum(0) / gamma
        H = sum(w[i] * np.outer(x[i] - mu, x[i] - mu) for i in range(n)) / gamma
        M = gram_sqrt @ H @ gram_sqrt
        lam, vec = np.linalg.eig(M)  # general solver, independent of the symmetric path
        order = np.argsort(lam.real)[::-1]
        lam, vec = lam.real[order], vec.real[:, order]
        vec /= np.linalg.norm(vec, axis=0)
        a, b = lam[:d], lam[d:].mean()
        proj = vec[:, :d] @ vec[:, :d].T
        cl = ours[k]
        err = max(err, abs(cl.pi - gamma / n), np.max(np.abs(cl.mean - mu)), np.max(np.abs(cl.a - a)),
                  abs(cl.b - b), np.max(np.abs(cl.U @ cl.U.T - proj)), abs(cl.beta - 1.0))
    assert record_criterion(8, err <= 1e-10, f"max deviation from plain weighted-Gaussian eigen update = {err:.1e} (<= 1e-10)")


@pytest.mark.slow
def test_criterion_9_pipeline_on_standin(record_criterion, tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    from cfunhddc.cli import main, report_schema
    from cfunhddc.io import write_curves_csv
    from cfunhddc.metrics import confusion
    from cfunhddc.simulate import irregular_sample

    sample = irregular_sample(seed=0)
    write_curves_csv(sample.curves, tmp_path / "curves.csv")
    out = tmp_path / "out"
    code = main(["run", "--input", str(tmp_path / "curves.csv"), "--normalize-time", "--basis", "25",
                 "--K-range", "2:4", "--d-grid", "2:10", "--nb-init", "10", "--seed", "0", "--out", str(out)])
    ok = code == 0
    detail = f"exit code {code}"
    if ok:
        report = json.loads((out / "report.json").read_text())
        jsonschema.validate(report, report_schema())
        n_cells = len(report["selection"]["candidates"])
        ok = n_cells == 27 and len(report["curves"]) == sample.curves.n
        flags = np.array([c["outlier"] for c in report["curves"]])
        cm = confusion(type("R", (), {"outlier": flags})(), sample)
        detail += (f", schema valid, {n_cells} cells, chosen K={report['model']['K']} d={report['model']['dims']}, "
                   f"confusion tn/fp/fn/tp={cm.tn}/{cm.fp}/{cm.fn}/{cm.tp} (informational)")
        _save("criterion_9", {"K": report["model"]["K"], "dims": report["model"]["dims"], "confusion": cm.to_dict()})
    assert record_criterion(9, ok, detail)
