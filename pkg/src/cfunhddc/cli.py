"""Command line pipeline: ingest or simulate curves, smooth, select, fit and report.

Examples
--------
::

    cfunhddc run --simulate dataset1 --K 4 --d 2 --init trimmed --seed 7 --out results/
    cfunhddc run --input curves.csv --normalize-time --K-range 2:4 --d-grid 2:10 --out results/
    cfunhddc simulate --kind dataset2 --seed 3 --out curves.csv --truth truth.csv
    cfunhddc benchmark --kind dataset1 --reps 20 --out bench.csv
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shutil
import sys
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ecm import FitConfig
from .errors import CFunHDDCError, ConfigError
from .funbasis import build_bspline_basis, smooth_curves
from .initialization import InitConfig
from .io import ingest_csv, normalize_time, write_curves_csv
from .metrics import ari_clustering, ari_outlier, confusion
from .selection import fit_restarts, select_model
from .simulate import SimSpec, simulate

__all__ = ["RunConfig", "run", "main", "parse_range", "REPORT_SCHEMA_VERSION", "report_schema"]

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = "1.0"
ASSIGNMENT_COLUMNS = ("curve_id", "cluster", "outlier", "t_max", "s")
PLOT_COLUMNS = ("curve_id", "component", "t", "value", "cluster", "outlier")


def report_schema() -> dict:
    path = Path(__file__).with_name("schemas") / "report.schema.json"
    return json.loads(path.read_text())


def parse_range(text) -> list:
    """``"2:4"`` -> [2, 3, 4]; ``"2,3,5"`` -> [2, 3, 5]; ``"4"`` -> [4]."""
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            values = list(range(lo, hi + 1))
        else:
            values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse integer range {text!r}", module="cli") from None
    if not values:
        raise ConfigError(f"empty range {text!r}", module="cli")
    return values


def _parse_floats(text) -> list:
    try:
        values = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse threshold list {text!r}", module="cli") from None
    if not values:
        raise ConfigError(f"empty threshold list {text!r}", module="cli")
    return values


@dataclass
class RunConfig:
    """Everything needed to reproduce one pipeline run."""

    out_dir: str
    input_path: str | None = None
    simulate: str | None = None
    per_class: int = 250
    n_basis: int = 25
    degree: int = 3
    K_range: list = field(default_factory=lambda: [4])
    d_grid: list | None = field(default_factory=lambda: [2])
    cattell_thresholds: list | None = None
    per_cluster_d: bool = False
    init: str = "trimmed"
    alpha: float = 0.2
    nb_init: int = 10
    eps: float = 1e-4
    max_iter: int = 200
    eta_min: float = 1.001
    seed: int = 0
    normalize_time: bool = False
    plot_points: int = 200
    n_jobs: int | None = None

    def __post_init__(self):
        if (self.input_path is None) == (self.simulate is None):
            raise ConfigError("give exactly one of an input file and a simulation kind", module="cli")
        if not self.K_range:
            raise ConfigError("empty K range", module="cli")
        if (self.d_grid is None) == (self.cattell_thresholds is None):
            raise ConfigError("give exactly one of a dimension grid and Cattell thresholds", module="cli")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.pop("out_dir")
        d.pop("n_jobs")
        return d


def _json_float(x):
    return None if x is None else float(x)


def _build_report(cfg, curves, basis, report, result, truth):
    model = result.model
    labels = result.labels
    rows = np.arange(labels.size)
    t_max = result.resp.t[rows, labels]
    s_assigned = result.resp.s[rows, labels]
    clusters = []
    for k, cl in enumerate(model.clusters):
        clusters.append(
            {
                "cluster": k + 1,
                "size": int(np.sum(labels == k)),
                "n_outliers": int(np.sum(result.outlier & (labels == k))),
                "pi": float(cl.pi),
                "beta": float(cl.beta),
                "eta": float(cl.eta),
                "d": int(cl.d),
                "a": [float(x) for x in cl.a],
                "b": float(cl.b),
                "trace_R": cl.trace_R(),
            }
        )
    records = [
        {
            "id": str(cid),
            "cluster": int(labels[i]) + 1,
            "outlier": bool(result.outlier[i]),
            "t_max": float(t_max[i]),
            "s": float(s_assigned[i]),
        }
        for i, cid in enumerate(curves.ids)
    ]
    out = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "package_version": __version__,
        "config": cfg.to_dict(),
        "data": {
            "source": cfg.input_path if cfg.input_path else f"simulate:{cfg.simulate}",
            "n": curves.n,
            "p": curves.p,
            "B": basis.total_size,
            "domain": [float(x) for x in curves.domain],
        },
        "selection": report.to_dict(),
        "model": {
            "K": model.K,
            "dims": [int(x) for x in model.dims],
            "loglik": float(result.loglik),
            "n_params": int(result.n_params),
            "bic": float(result.bic),
            "aic": float(result.aic),
            "iterations": int(result.iterations),
            "converged": bool(result.converged),
            "clusters": clusters,
        },
        "summary": {
            "n_outliers": int(result.outlier.sum()),
            "cluster_sizes": [c["size"] for c in clusters],
        },
        "curves": records,
    }
    if truth is not None:
        out["evaluation"] = {
            "ari_c": float(ari_clustering(result, truth)),
            "ari_o": float(ari_outlier(result, truth)),
            "confusion": confusion(result, truth).to_dict(),
        }
    return out


def _write_outputs(tmp, cfg, curves, basis, coeffs, result, report_dict):
    (tmp / "report.json").write_text(json.dumps(report_dict, indent=2) + "\n")
    with (tmp / "assignments.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ASSIGNMENT_COLUMNS)
        for rec in report_dict["curves"]:
            w.writerow((rec["id"], rec["cluster"], int(rec["outlier"]), repr(rec["t_max"]), repr(rec["s"])))
    grid = np.linspace(curves.domain[0], curves.domain[1], cfg.plot_points)
    recon = basis.reconstruct(coeffs, grid)
    with (tmp / "plotdata.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PLOT_COLUMNS)
        tg = [f"{x:.10g}" for x in grid]
        for i, cid in enumerate(curves.ids):
            cluster = int(result.labels[i]) + 1
            flag = int(result.outlier[i])
            for j in range(curves.p):
                for tv, v in zip(tg, recon[i, j]):
                    w.writerow((cid, j + 1, tv, f"{v:.10g}", cluster, flag))


def run(cfg: RunConfig) -> dict:
    """Execute the pipeline and write ``report.json``, ``assignments.csv``,
    ``plotdata.csv`` and ``timing.json`` into ``cfg.out_dir``.

    Outputs appear only if the whole run succeeds. Returns the report dict.
    """
    started = time.perf_counter()
    timing = {}
    truth = None
    if cfg.simulate:
        truth = simulate(SimSpec(kind=cfg.simulate, per_class=cfg.per_class, seed=cfg.seed))
        curves = truth.curves
    else:
        curves = ingest_csv(cfg.input_path)
    if cfg.normalize_time:
        curves = normalize_time(curves)
    timing["ingest"] = time.perf_counter() - started

    t0 = time.perf_counter()
    basis = build_bspline_basis([cfg.n_basis] * curves.p, cfg.degree, curves.domain)
    coeffs = smooth_curves(curves, basis)
    timing["smooth"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    init_cfg = InitConfig(cfg.init, cfg.alpha, cfg.nb_init, seed=cfg.seed)
    fit_cfg = FitConfig(cfg.eps, cfg.max_iter, eta_min=cfg.eta_min)
    report = select_model(
        coeffs,
        basis.gram_sqrt,
        cfg.K_range,
        d_grid=cfg.d_grid,
        cattell_thresholds=cfg.cattell_thresholds,
        init_config=init_cfg,
        fit_config=fit_cfg,
        per_cluster=cfg.per_cluster_d,
        n_jobs=cfg.n_jobs,
    )
    result = report.best
    timing["select"] = time.perf_counter() - t0

    report_dict = _build_report(cfg, curves, basis, report, result, truth)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    try:
        _write_outputs(tmp, cfg, curves, basis, coeffs, result, report_dict)
        timing["total"] = time.perf_counter() - started
        (tmp / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
        for f in tmp.iterdir():
            os.replace(f, out_dir / f.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return report_dict


def _benchmark(args) -> int:
    basis = None
    rows = []
    for rep in range(args.reps):
        seed = args.seed + rep
        truth = simulate(SimSpec(kind=args.kind, per_class=args.per_class, seed=seed,
                                 noise_sd=float(np.sqrt(args.noise_var))))
        if basis is None:
            basis = build_bspline_basis([args.basis, args.basis], args.degree, truth.curves.domain)
        coeffs = smooth_curves(truth.curves, basis)
        res, _, _ = fit_restarts(
            coeffs, args.K, args.d, basis.gram_sqrt,
            InitConfig(args.init, args.alpha, args.nb_init, seed=seed),
            FitConfig(args.eps, args.max_iter, eta_min=args.eta_min),
        )
        if res is None:
            rows.append((seed, "nan", "nan", "nan", 0))
            print(f"rep {rep} seed {seed}: all restarts failed", file=sys.stderr)
            continue
        ac, ao = ari_clustering(res, truth), ari_outlier(res, truth)
        rows.append((seed, f"{ac:.6f}", f"{ao:.6f}", f"{res.loglik:.6f}", int(res.outlier.sum())))
        print(f"rep {rep} seed {seed}: ARI_c={ac:.4f} ARI_o={ao:.4f} outliers={int(res.outlier.sum())}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("seed", "ari_c", "ari_o", "loglik", "n_outliers"))
            w.writerows(rows)
    return 0


def _add_fit_args(p):
    p.add_argument("--basis", type=int, default=25, help="basis functions per component")
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--init", choices=("trimmed", "kmeans", "random"), default="trimmed")
    p.add_argument("--alpha", type=float, default=0.2, help="trim fraction of the trimmed initialiser")
    p.add_argument("--nb-init", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--eta-min", type=float, default=1.001)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfunhddc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="fit a model and write reports")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="long-format CSV: curve_id,component,time,value")
    src.add_argument("--simulate", choices=("dataset1", "dataset2", "normal_only"))
    p.add_argument("--per-class", type=int, default=250)
    ks = p.add_mutually_exclusive_group()
    ks.add_argument("--K", type=int)
    ks.add_argument("--K-range", dest="K_range")
    ds = p.add_mutually_exclusive_group()
    ds.add_argument("--d", type=int)
    ds.add_argument("--d-grid", dest="d_grid")
    ds.add_argument("--d-cattell", dest="d_cattell", help="comma-separated scree-test thresholds")
    p.add_argument("--per-cluster-d", action="store_true", help="exhaustive per-cluster dimension grid")
    p.add_argument("--normalize-time", action="store_true")
    p.add_argument("--plot-points", type=int, default=200)
    p.add_argument("--out", required=True, help="output directory")
    _add_fit_args(p)

    p = sub.add_parser("simulate", help="write a simulated sample as CSV")
    p.add_argument("--kind", choices=("dataset1", "dataset2", "normal_only"), default="dataset1")
    p.add_argument("--per-class", type=int, default=250)
    p.add_argument("--n-outlier1", type=int, default=3)
    p.add_argument("--n-outlier2", type=int, default=2)
    p.add_argument("--noise-var", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="optional CSV of true labels and outlier flags")

    p = sub.add_parser("benchmark", help="repeat simulate+fit and print ARI scores")
    p.add_argument("--kind", choices=("dataset1", "dataset2"), default="dataset1")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--per-class", type=int, default=250)
    p.add_argument("--noise-var", type=float, default=0.25)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--out")
    _add_fit_args(p)
    return parser


def _run_from_args(args) -> int:
    K_range = [args.K] if args.K is not None else parse_range(args.K_range or "4")
    cattell = _parse_floats(args.d_cattell) if args.d_cattell else None
    if cattell is None:
        d_grid = [args.d] if args.d is not None else parse_range(args.d_grid or "2")
    else:
        d_grid = None
    threads = os.environ.get("CFUNHDDC_THREADS")
    cfg = RunConfig(
        out_dir=args.out,
        input_path=args.input,
        simulate=args.simulate,
        per_class=args.per_class,
        n_basis=args.basis,
        degree=args.degree,
        K_range=K_range,
        d_grid=d_grid,
        cattell_thresholds=cattell,
        per_cluster_d=args.per_cluster_d,
        init=args.init,
        alpha=args.alpha,
        nb_init=args.nb_init,
        eps=args.eps,
        max_iter=args.max_iter,
        eta_min=args.eta_min,
        seed=args.seed,
        normalize_time=args.normalize_time,
        plot_points=args.plot_points,
        n_jobs=int(threads) if threads else None,
    )
    report = run(cfg)
    m = report["model"]
    print(f"K={m['K']} d={m['dims']} BIC={m['bic']:.2f} outliers={report['summary']['n_outliers']}")
    if "evaluation" in report:
        ev = report["evaluation"]
        print(f"ARI_c={ev['ari_c']:.4f} ARI_o={ev['ari_o']:.4f}")
    return 0


def _simulate_from_args(args) -> int:
    spec = SimSpec(kind=args.kind, per_class=args.per_class, n_outlier1=args.n_outlier1,
                   n_outlier2=args.n_outlier2, noise_sd=float(np.sqrt(args.noise_var)), seed=args.seed)
    sample = simulate(spec)
    write_curves_csv(sample.curves, args.out)
    if args.truth:
        with open(args.truth, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("curve_id", "label", "outlier", "outlier_type"))
            for cid, lab, flag, kind in zip(sample.curves.ids, sample.labels, sample.outlier, sample.outlier_type):
                w.writerow((cid, int(lab), int(flag), kind))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _run_from_args, "simulate": _simulate_from_args, "benchmark": _benchmark}
    try:
        return handlers[args.command](args)
    except (CFunHDDCError, OSError, ValueError, ArithmeticError) as exc:
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 2


def _error_record(exc) -> dict:
    module = getattr(exc, "module", None)
    if module is None:
        # deepest frame inside the package names the failing stage
        module = "cli"
        for frame in traceback.extract_tb(exc.__traceback__):
            path = Path(frame.filename)
            if path.parent.name == "cfunhddc":
                module = path.stem
    record = {"error": type(exc).__name__, "module": module, "message": str(exc)}
    for attr in ("row", "curve", "component", "cluster"):
        value = getattr(exc, attr, None)
        if value is not None:
            record[attr] = value
    return record


if __name__ == "__main__":
    sys.exit(main())
