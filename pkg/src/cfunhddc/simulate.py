"""Synthetic bivariate functional benchmarks built on shifted triangular waveforms.

Four classes of normal curves are mixed with two families of abnormal curves.
In ``dataset1`` both components of an abnormal curve deviate from the normal
models; in ``dataset2`` only one component does.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SpecError
from .funbasis import CurveSet

__all__ = [
    "SimSpec",
    "LabeledCurves",
    "waveform",
    "simulate",
    "contamination_sweep",
    "noise_sweep",
    "irregular_sample",
]

DATASETS = ("dataset1", "dataset2", "normal_only")
OUTLIER_NONE, OUTLIER_1, OUTLIER_2 = "none", "outlier1", "outlier2"


def waveform(kind: str, t):
    """Shifted triangular waveform ``H1``, ``H2`` or ``H3`` evaluated at ``t``."""
    t = np.asarray(t, dtype=float)
    if kind == "H1":
        return np.maximum(6.0 - np.abs(t - 7.0), 0.0)
    if kind == "H2":
        return np.maximum(6.0 - np.abs(t - 15.0), 0.0)
    if kind == "H3":
        return np.maximum(6.0 - np.abs(t * (t < 7.0) - 7.0), 0.0)
    raise ValueError(f"unknown waveform {kind!r}")


@dataclass(frozen=True)
class SimSpec:
    """Parameters of one simulated sample.

    ``noise_sd`` is the standard deviation of the i.i.d. noise added to every
    normal component; ``outlier_noise_sd`` that of the noise carried by the
    first outlier family. ``fixed_u`` replaces the per-curve uniform draw and
    exists for testing.
    """

    kind: str = "dataset1"
    per_class: int = 250
    n_outlier1: int = 3
    n_outlier2: int = 2
    noise_sd: float = 0.5
    outlier_noise_sd: float = 1.0
    grid_size: int = 101
    domain: tuple = (1.0, 21.0)
    seed: int | None = 0
    fixed_u: float | None = None

    def __post_init__(self):
        if self.kind not in DATASETS:
            raise SpecError(f"unknown dataset kind {self.kind!r}; expected one of {DATASETS}")
        if min(self.per_class, self.n_outlier1, self.n_outlier2) < 0:
            raise SpecError("curve counts must be non-negative")
        if self.noise_sd < 0 or self.outlier_noise_sd < 0:
            raise SpecError("noise standard deviations must be non-negative")
        if self.grid_size < 2:
            raise SpecError("grid_size must be at least 2")
        if self.domain[1] <= self.domain[0]:
            raise SpecError(f"degenerate domain {self.domain}")

    @property
    def outlier_counts(self):
        if self.kind == "normal_only":
            return 0, 0
        return self.n_outlier1, self.n_outlier2

    @property
    def n_normal(self) -> int:
        return 4 * self.per_class

    @property
    def n(self) -> int:
        return self.n_normal + sum(self.outlier_counts)


@dataclass
class LabeledCurves:
    """Simulated curves with their ground truth.

    ``labels`` holds the class (1-4) of normal curves and 0 for abnormal ones.
    """

    curves: CurveSet
    labels: np.ndarray
    outlier: np.ndarray
    outlier_type: np.ndarray
    grid: np.ndarray
    spec: SimSpec

    @property
    def data(self) -> np.ndarray:
        """Observations as an (n, 2, T) array."""
        return np.stack([np.stack(v) for v in self.curves.values])


def _normal_class(k, u, h1, h2):
    if k == 1:
        return u + (1 - u) * h1, u + (0.5 - u) * h1
    if k == 2:
        return u + (1 - u) * h2, u + (0.5 - u) * h2
    if k == 3:
        return u + (0.5 - u) * h1, u + (1 - u) * h2
    return u + (0.5 - u) * h2, u + (1 - u) * h1


def simulate(spec: SimSpec) -> LabeledCurves:
    """Draw one sample according to ``spec``; deterministic given ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    t = np.linspace(spec.domain[0], spec.domain[1], spec.grid_size)
    h1, h2, h3 = waveform("H1", t), waveform("H2", t), waveform("H3", t)
    wave = np.sin(np.pi * t / 2.0)
    n1, n2 = spec.outlier_counts
    n = spec.n
    T = spec.grid_size

    # draw order is fixed so equal seeds give bitwise-equal samples
    u = rng.uniform(0.0, 1.0, size=n)
    if spec.fixed_u is not None:
        u[:] = spec.fixed_u
    eps = rng.normal(0.0, 1.0, size=(n, 2, T)) * spec.noise_sd
    eps2 = rng.normal(0.0, 1.0, size=(n, 2, T)) * spec.outlier_noise_sd

    data = np.empty((n, 2, T))
    labels = np.zeros(n, dtype=int)
    otype = np.full(n, OUTLIER_NONE, dtype=object)
    i = 0
    for k in (1, 2, 3, 4):
        for _ in range(spec.per_class):
            x1, x2 = _normal_class(k, u[i], h1, h2)
            data[i, 0] = x1 + eps[i, 0]
            data[i, 1] = x2 + eps[i, 1]
            labels[i] = k
            i += 1
    for _ in range(n1):
        ui = u[i]
        if spec.kind == "dataset1":
            data[i, 0] = (0.5 - ui) * h1 + wave + eps2[i, 0]
            data[i, 1] = (1 - ui) * h2 + wave + eps2[i, 1]
        else:
            data[i, 0] = ui + (0.5 - ui) * h1 + eps[i, 0]
            data[i, 1] = (1 - ui) * h2 + wave + eps2[i, 1]
        otype[i] = OUTLIER_1
        i += 1
    for _ in range(n2):
        ui = u[i]
        data[i, 0] = ui + (1 - ui) * h3 + eps[i, 0]
        if spec.kind == "dataset1":
            data[i, 1] = ui + (0.5 - ui) * h3 + eps[i, 1]
        else:
            data[i, 1] = ui + (0.5 - ui) * h1 + eps[i, 1]
        otype[i] = OUTLIER_2
        i += 1

    curves = CurveSet.from_grid(t, data, domain=spec.domain)
    outlier = otype != OUTLIER_NONE
    return LabeledCurves(curves, labels, outlier, otype.astype(str), t, spec)


def contamination_sweep(base: SimSpec, per_mille_levels) -> list:
    """Samples whose outlier-to-normal ratio matches each level (in per mille).

    The first outlier family keeps its base count; the second family is grown
    to reach the level. Level 0 yields a sample without outliers.
    """
    out = []
    for level in per_mille_levels:
        total = level * base.n_normal / 1000.0
        if total != int(total) or total < 0:
            raise SpecError(f"{level} per mille of {base.n_normal} normal curves is not a whole number of curves")
        total = int(total)
        if total == 0:
            spec = replace(base, n_outlier1=0, n_outlier2=0)
        else:
            if base.kind == "normal_only":
                raise SpecError("a normal_only sample cannot carry contamination")
            if total < base.n_outlier1:
                raise SpecError(f"level {level} per mille needs {total} outliers, fewer than the {base.n_outlier1} of the first family")
            spec = replace(base, n_outlier2=total - base.n_outlier1)
        out.append(simulate(spec))
    return out


def noise_sweep(base: SimSpec, variances) -> list:
    """Samples with the normal-curve noise variance set to each value."""
    out = []
    for var in variances:
        if var < 0:
            raise SpecError(f"negative noise variance {var}")
        out.append(simulate(replace(base, noise_sd=float(np.sqrt(var)))))
    return out


def _profile(k, j, x):
    # smooth class/component shape on [0, 1]; classes differ in phase and frequency
    return np.sin((j + 1) * np.pi * x + k * np.pi / 3) + 0.5 * np.cos((k + 1) * np.pi * x)


def irregular_sample(class_sizes=(200, 180, 144), n_outliers=45, p=4, length_range=(2199, 10675),
                     noise_sd=0.1, seed=0) -> LabeledCurves:
    """Multivariate curves observed on irregular, curve-specific time spans.

    Each curve has its own start time, duration and number of sorted random
    observation times (drawn from ``length_range``), shared by its ``p``
    components. Normal curves are amplitude-scaled class profiles; abnormal
    ones carry a localized bump on one component and a sign flip on another.
    Used to exercise ingestion, time normalisation and model selection on data
    shaped like long industrial sensor records.
    """
    rng = np.random.default_rng(seed)
    n_normal = int(sum(class_sizes))
    n = n_normal + n_outliers
    labels = np.concatenate([np.full(c, k + 1) for k, c in enumerate(class_sizes)] + [np.zeros(n_outliers, int)])
    otype = np.where(labels == 0, OUTLIER_1, OUTLIER_NONE)
    outlier_class = rng.integers(len(class_sizes), size=n_outliers)
    width = len(str(n))
    ids, times, values = [], [], []
    lo_all, hi_all = np.inf, -np.inf
    for i in range(n):
        start = rng.uniform(0.0, 1000.0)
        duration = rng.uniform(3000.0, 9000.0)
        length = int(rng.integers(length_range[0], length_range[1] + 1))
        x = np.sort(rng.uniform(0.0, 1.0, length))
        x[0], x[-1] = 0.0, 1.0
        t = start + duration * x
        amp = rng.uniform(0.8, 1.2)
        k = labels[i] - 1 if labels[i] > 0 else outlier_class[i - n_normal]
        comps = [amp * _profile(k, j, x) for j in range(p)]
        if labels[i] == 0:
            j1, j2 = rng.choice(p, size=2, replace=False)
            centre = rng.uniform(0.2, 0.8)
            comps[j1] = comps[j1] + 2.0 * np.exp(-0.5 * ((x - centre) / 0.05) ** 2)
            comps[j2] = -comps[j2]
        ids.append(f"s{i:0{width}d}")
        times.append([t] * p)
        values.append([c + rng.normal(0.0, noise_sd, length) for c in comps])
        lo_all, hi_all = min(lo_all, t[0]), max(hi_all, t[-1])
    curves = CurveSet(ids, times, values, (float(lo_all), float(hi_all)))
    spec = SimSpec(kind="normal_only", per_class=0, noise_sd=noise_sd, seed=seed)
    return LabeledCurves(curves, labels, labels == 0, otype.astype(str), np.empty(0), spec)
