"""B-spline bases, curve smoothing and the Gram metric on coefficients.

A multivariate curve with ``p`` components is represented by the concatenation
of its per-component spline coefficients. The inner products between basis
functions form the block-diagonal Gram matrix ``W``; its symmetric square root
maps coefficients into the space where functional PCA reduces to an ordinary
eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import block_diag, eigh

from .errors import InvalidBasisError, InvalidDomainError, NumericalError, SmoothingError

__all__ = [
    "CurveSet",
    "BasisSystem",
    "build_bspline_basis",
    "clamped_knots",
    "gram_matrix",
    "matrix_sqrt",
    "smooth_curves",
]


@dataclass
class CurveSet:
    """Discretely observed ``p``-variate curves.

    ``times[i][j]`` and ``values[i][j]`` hold the observation grid and values
    of component ``j`` of curve ``i``. Grids may differ between curves.
    """

    ids: list
    times: list
    values: list
    domain: tuple

    def __post_init__(self):
        if len(self.ids) == 0:
            raise ValueError("a CurveSet needs at least one curve")
        if not (len(self.ids) == len(self.times) == len(self.values)):
            raise ValueError("ids, times and values must have the same length")
        p = len(self.times[0])
        if p < 1:
            raise ValueError("curves need at least one component")
        lo, hi = self.domain
        for cid, ts, vs in zip(self.ids, self.times, self.values):
            if len(ts) != p or len(vs) != p:
                raise ValueError(f"curve {cid!r} does not have {p} components")
            for j, (t, v) in enumerate(zip(ts, vs)):
                if len(t) != len(v):
                    raise ValueError(f"curve {cid!r} component {j + 1}: times and values differ in length")
                if len(t) < 2:
                    raise ValueError(f"curve {cid!r} component {j + 1}: fewer than 2 observations")
                if np.min(t) < lo or np.max(t) > hi:
                    raise ValueError(f"curve {cid!r} component {j + 1}: times outside domain {self.domain}")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def p(self) -> int:
        return len(self.times[0])

    @classmethod
    def from_grid(cls, t, data, ids=None, domain=None):
        """Build a CurveSet from an array ``data`` of shape (n, p, T) on a shared grid."""
        t = np.asarray(t, dtype=float)
        data = np.asarray(data, dtype=float)
        n, p, _ = data.shape
        if ids is None:
            width = len(str(n))
            ids = [f"c{i:0{width}d}" for i in range(n)]
        if domain is None:
            domain = (float(t[0]), float(t[-1]))
        times = [[t.copy() for _ in range(p)] for _ in range(n)]
        values = [[data[i, j].copy() for j in range(p)] for i in range(n)]
        return cls(list(ids), times, values, tuple(domain))

    def equals(self, other) -> bool:
        """Exact equality of ids, domains and every observation."""
        if self.ids != other.ids or tuple(self.domain) != tuple(other.domain):
            return False
        for a_t, a_v, b_t, b_v in zip(self.times, self.values, other.times, other.values):
            if len(a_t) != len(b_t):
                return False
            for x, y in zip(a_t, b_t):
                if not np.array_equal(x, y):
                    return False
            for x, y in zip(a_v, b_v):
                if not np.array_equal(x, y):
                    return False
        return True


def clamped_knots(num_basis: int, degree: int, domain) -> np.ndarray:
    """Equally spaced knot vector with ``degree + 1`` repeated knots at each end."""
    a, b = domain
    n_interior = num_basis - degree - 1
    inner = np.linspace(a, b, n_interior + 2)
    return np.concatenate([np.full(degree, a), inner, np.full(degree, b)])


def _check_domain(domain):
    try:
        a, b = (float(x) for x in domain)
    except (TypeError, ValueError) as exc:
        raise InvalidDomainError(f"domain must be a pair of numbers, got {domain!r}") from exc
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise InvalidDomainError(f"degenerate domain [{a}, {b}]")
    return a, b


@dataclass
class BasisSystem:
    """Per-component clamped B-spline bases sharing one domain.

    Attributes
    ----------
    sizes : tuple of int
        Number of basis functions ``B_j`` for each component.
    degree : int
        Spline degree (3 for cubic).
    domain : tuple of float
        Interval ``[a1, a2]`` on which every component is defined.
    knots : list of ndarray
        Full knot vector of each component.
    gram : ndarray, shape (B, B)
        Block-diagonal matrix of basis inner products.
    gram_sqrt : ndarray, shape (B, B)
        Symmetric square root of ``gram``.
    """

    sizes: tuple
    degree: int
    domain: tuple
    knots: list
    gram: np.ndarray = field(repr=False)
    gram_sqrt: np.ndarray = field(repr=False)

    @property
    def p(self) -> int:
        return len(self.sizes)

    @property
    def total_size(self) -> int:
        return int(sum(self.sizes))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def log_det_gram(self) -> float:
        sign, logdet = np.linalg.slogdet(self.gram)
        if sign <= 0:
            raise NumericalError("Gram matrix is not positive definite")
        return float(logdet)

    def evaluate(self, t, component: int = 0) -> np.ndarray:
        """Design matrix of the basis of one component at points ``t``, shape (len(t), B_j)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.domain
        if t.size and (t.min() < a or t.max() > b):
            raise InvalidDomainError(f"evaluation points outside [{a}, {b}]")
        knots = self.knots[component]
        dm = BSpline.design_matrix(t, knots, self.degree)
        return dm.toarray()

    def reconstruct(self, coeffs, t) -> np.ndarray:
        """Evaluate curves from coefficients on a grid; returns shape (n, p, len(t))."""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        off = self.offsets
        out = np.empty((coeffs.shape[0], self.p, len(t)))
        for j in range(self.p):
            out[:, j, :] = coeffs[:, off[j]:off[j + 1]] @ self.evaluate(t, j).T
        return out


def gram_matrix(sizes: Sequence[int], degree: int, domain, knots=None) -> np.ndarray:
    """Inner products of B-spline basis functions, per component, assembled block-diagonally.

    Each knot span is integrated with ``degree + 1`` Gauss-Legendre nodes, which
    is exact for the piecewise polynomial products of degree ``2 * degree``.
    """
    a, b = _check_domain(domain)
    if knots is None:
        knots = [clamped_knots(s, degree, (a, b)) for s in sizes]
    nodes, weights = np.polynomial.legendre.leggauss(degree + 1)
    blocks = []
    for s, kv in zip(sizes, knots):
        breaks = np.unique(kv)
        lo, hi = breaks[:-1], breaks[1:]
        half = 0.5 * (hi - lo)
        pts = (0.5 * (hi + lo))[:, None] + half[:, None] * nodes[None, :]
        wts = half[:, None] * weights[None, :]
        pts = np.clip(pts.ravel(), a, b)
        dm = BSpline.design_matrix(pts, kv, degree).toarray()
        if dm.shape[1] != s:
            raise InvalidBasisError(f"knot vector yields {dm.shape[1]} functions, expected {s}")
        block = (dm * wts.ravel()[:, None]).T @ dm
        blocks.append(0.5 * (block + block.T))
    gram = block_diag(*blocks)
    if not np.all(np.isfinite(gram)):
        raise NumericalError("non-finite entries in Gram matrix quadrature")
    return gram


def matrix_sqrt(m) -> np.ndarray:
    """Symmetric square root of a symmetric positive-definite matrix.

    Uses the eigendecomposition ``m = V diag(w) V'`` and returns
    ``V diag(sqrt(w)) V'``.

    Raises
    ------
    NumericalError
        If ``m`` is not symmetric or has a non-positive eigenvalue.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericalError(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    if np.abs(m - m.T).max() > 1e-10 * scale:
        raise NumericalError("matrix is not symmetric")
    w, v = eigh(0.5 * (m + m.T))
    if w[0] <= 0:
        raise NumericalError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def build_bspline_basis(num_basis_per_component, degree: int = 3, domain=(0.0, 1.0)) -> BasisSystem:
    """Clamped, uniformly knotted B-spline bases for every component.

    Parameters
    ----------
    num_basis_per_component : sequence of int
        ``B_j`` for each of the ``p`` components. A single int is treated as
        a one-component basis.
    degree : int
        Spline degree; each ``B_j`` must be at least ``degree + 1``.
    domain : pair of float
        Common interval of definition.
    """
    sizes = tuple(int(s) for s in np.atleast_1d(num_basis_per_component))
    if degree < 1 or int(degree) != degree:
        raise InvalidBasisError(f"degree must be a positive integer, got {degree!r}")
    degree = int(degree)
    if len(sizes) == 0:
        raise InvalidBasisError("at least one component is required")
    for s in sizes:
        if s < degree + 1:
            raise InvalidBasisError(f"basis size {s} is smaller than degree + 1 = {degree + 1}")
    a, b = _check_domain(domain)
    knots = [clamped_knots(s, degree, (a, b)) for s in sizes]
    gram = gram_matrix(sizes, degree, (a, b), knots)
    return BasisSystem(sizes, degree, (a, b), knots, gram, matrix_sqrt(gram))


def _ols_solver(design):
    """Pseudo-inverse from one thin SVD, or None when the design is rank deficient."""
    u, sv, vt = np.linalg.svd(design, full_matrices=False)
    tol = sv[0] * max(design.shape) * np.finfo(float).eps if sv.size else 0.0
    if sv.size < design.shape[1] or sv[-1] <= tol:
        return None
    return (vt.T / sv) @ u.T


def smooth_curves(curves: CurveSet, basis: BasisSystem) -> np.ndarray:
    """Least-squares basis coefficients for every curve, shape (n, B).

    Observation grids shared between curves or components (with the same
    knots) reuse one factorization of the design matrix.
    """
    if curves.p != basis.p:
        raise SmoothingError(f"curves have {curves.p} components but basis has {basis.p}")
    off = basis.offsets
    coeffs = np.empty((curves.n, basis.total_size))
    cache = {}
    for i in range(curves.n):
        for j in range(basis.p):
            t = np.asarray(curves.times[i][j], dtype=float)
            key = (basis.knots[j].tobytes(), t.size, t.tobytes())
            if key not in cache:
                cache[key] = _ols_solver(basis.evaluate(t, j))
            solver = cache[key]
            if solver is None:
                raise SmoothingError(
                    f"curve {curves.ids[i]!r} component {j + 1}: design matrix is rank deficient "
                    f"({len(np.unique(t))} distinct times for {basis.sizes[j]} basis functions)",
                    curve=curves.ids[i],
                    component=j + 1,
                )
            coeffs[i, off[j]:off[j + 1]] = solver @ np.asarray(curves.values[i][j], dtype=float)
        if len(cache) > 64:
            # grids of long irregular records are rarely reused; bound memory
            cache.clear()
    if not np.all(np.isfinite(coeffs)):
        raise SmoothingError("non-finite coefficients after smoothing")
    return coeffs
