"""Canonical triangular factorization ``C = V^T V`` along a nest.

``V = Phi* sqrt(C)``, where ``Phi*`` is the partial isometry in the polar
decomposition of the adjoint of the diagonal of ``sqrt(C)``. Functions on a
grid are identified with coefficient vectors under a uniform quadrature
weight, so adjoints are plain transposes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._csv import csv_writer
from ._parallel import ordered_map
from .diagonal import DiagonalResult, Partition, opnorm, partition_diagonal
from .errors import DiagonalCollapse, DimensionMismatch, NotPositiveDefinite, RankDeficientDiagonal
from .linops import as_mat, default_tol, polar_adjoint, spectral_norm, sqrt_psd, sym_eig
from .nest import Nest, coordinate_nest, image_nest

COLLAPSE_FACTOR = 0.5


@dataclass
class FactorizationResult:
    v: np.ndarray
    phi_star: np.ndarray
    residual: float
    tri_defect: float
    sign_convention: bool
    diagonal: DiagonalResult | None = None


@dataclass(frozen=True)
class CorrectedDiagonalSpec:
    derivative: np.ndarray
    description: str = ""

    def __post_init__(self):
        d = as_mat(self.derivative, "derivative")
        if d.shape[0] != d.shape[1]:
            raise DimensionMismatch("derivative must be square")
        if d.shape[0] > 2:
            inner = d[1:-1]
            scale = float(np.max(np.abs(inner))) or 1.0
            if np.max(np.abs(inner.sum(axis=1))) > 1e-8 * scale:
                raise ValueError("derivative does not annihilate constants on interior rows")
        object.__setattr__(self, "derivative", d)


def central_difference(n: int, h: float) -> CorrectedDiagonalSpec:
    """``d/dt``: central differences inside, one-sided second order at the ends."""
    if n < 3:
        raise ValueError("central_difference needs n >= 3")
    d = np.zeros((n, n))
    i = np.arange(1, n - 1)
    d[i, i - 1] = -0.5 / h
    d[i, i + 1] = 0.5 / h
    d[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    d[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return CorrectedDiagonalSpec(d, "central differences, one-sided second order at ends")


def tri_defect(v: np.ndarray, f: Nest, idx: Sequence[int] | None = None) -> float:
    """``max_s ||(I - X_s) V X_s||`` over grid indices ``idx`` (default: all)."""
    idx = range(f.params.size) if idx is None else idx
    worst = 0.0
    if f.coords is not None:
        for k in idx:
            r = f.ranks[k]
            worst = max(worst, opnorm(v[np.ix_(f.coords[r:], f.coords[:r])]))
        return worst
    for k in idx:
        b = f.step_basis(k)
        vb = v @ b
        worst = max(worst, opnorm(vb - b @ (b.T @ vb)))
    return worst


def _rank_one_steps(f: Nest, idx: np.ndarray) -> bool:
    return f.basis.shape[1] == f.ambient_dim and bool(np.all(np.diff(f.ranks[idx]) == 1))


def normalize_signs(v: np.ndarray, f: Nest) -> np.ndarray:
    """Flip nest-coordinate rows so that the diagonal of ``Q^T V Q`` is positive."""
    q = f.basis
    diag = np.einsum("ij,ij->j", q, v @ q)
    s = np.where(diag < 0, -1.0, 1.0)
    return q @ (s[:, None] * (q.T @ v))


def _residual(v: np.ndarray, c: np.ndarray) -> float:
    nc = spectral_norm(c)
    return spectral_norm(v.T @ v - c) / nc if nc > 0 else spectral_norm(v.T @ v)


def _finish(c, s, dres, f, idx, polar_tol=0.0, require_full=False) -> FactorizationResult:
    polar = polar_adjoint(dres.d, polar_tol)
    if require_full and polar.rank < c.shape[0]:
        raise RankDeficientDiagonal(f"diagonal has rank {polar.rank} < {c.shape[0]}")
    v = polar.phi @ s
    signed = _rank_one_steps(f, idx)
    if signed:
        v = normalize_signs(v, f)
    return FactorizationResult(
        v=v,
        phi_star=polar.phi,
        residual=_residual(v, c),
        tri_defect=tri_defect(v, f, idx),
        sign_convention=signed,
        diagonal=dres,
    )


def _check(c, f: Nest) -> np.ndarray:
    c = as_mat(c, "c")
    if c.shape != (f.ambient_dim, f.ambient_dim):
        raise DimensionMismatch(f"c is {c.shape}, nest lives in dimension {f.ambient_dim}")
    return c


def factor_finite(c, f: Nest) -> FactorizationResult:
    """Factor a positive-definite matrix along a full chain."""
    c = _check(c, f)
    ep = sym_eig(c)
    if ep.values.size and ep.values[-1] <= default_tol(c, float(ep.values[0])):
        raise NotPositiveDefinite(f"smallest eigenvalue {ep.values[-1]:.3e}")
    s = sqrt_psd(c)
    h = image_nest(s, f)
    xi = Partition.full(f.params)
    dres = partition_diagonal(s, f, h, xi)
    return _finish(c, s, dres, f, xi.indices, require_full=True)


def collapse_threshold(s: np.ndarray, xi: Partition, T: float) -> float:
    """Default compactness threshold ``0.5 sqrt(range / T) ||sqrt(C)||``.

    The diagonal of a rank-one operator is at most ``sqrt(range)`` times its
    norm, while a bounded-below part keeps a norm of order one.
    """
    return COLLAPSE_FACTOR * np.sqrt(xi.range / T) * spectral_norm(s)


def factor_continual(c, f: Nest, xi: Partition, tol: float | None = None) -> FactorizationResult:
    """Factor along ``f`` using the integral sum over ``xi``.

    Raises :class:`DiagonalCollapse` when ``||D|| < tol``; the default tol
    is :func:`collapse_threshold`.
    """
    c = _check(c, f)
    s = sqrt_psd(c)
    h = image_nest(s, f)
    dres = partition_diagonal(s, f, h, xi)
    cut = collapse_threshold(s, xi, f.T - f.params[0]) if tol is None else tol
    if dres.norm_d < cut:
        raise DiagonalCollapse(f"||D|| = {dres.norm_d:.3e} below {cut:.3e}; use corrected_factor")
    return _finish(c, s, dres, f, xi.indices)


def corrected_factor(c, f: Nest, spec: CorrectedDiagonalSpec, xi: Partition, tol: float = 0.0) -> FactorizationResult:
    """Factor with ``D' = sum dP~ sqrt(C) d dX`` where ``d`` is a derivative.

    The image nest stays that of ``sqrt(C)``; only the summand changes.
    """
    c = _check(c, f)
    if spec.derivative.shape != c.shape:
        raise DimensionMismatch("derivative and c differ in shape")
    s = sqrt_psd(c)
    h = image_nest(s, f)
    dres = partition_diagonal(s, f, h, xi, middle=s @ spec.derivative)
    cut = tol if tol > 0 else default_tol(dres.w, dres.norm_w)
    if dres.norm_d <= cut:
        raise DiagonalCollapse(f"corrected diagonal vanished (||D'|| = {dres.norm_d:.3e})")
    return _finish(c, s, dres, f, xi.indices)


def min_kernel(n: int) -> np.ndarray:
    """``C_ij = h min(t_i, t_j)`` on ``t_i = i h``, ``h = 1/n``."""
    h = 1.0 / n
    t = np.arange(1, n + 1) * h
    return h * np.minimum.outer(t, t)


def volterra_exact(n: int) -> np.ndarray:
    """``V_ij = h 1{j >= i}``, the grid kernel of ``(Vf)(t) = int_t^1 f``."""
    return np.triu(np.ones((n, n))) / n


@dataclass(frozen=True)
class VolterraReport:
    n: int
    kernel_error: float
    residual: float
    tri_defect: float


def volterra_demo(n: int) -> VolterraReport:
    if n < 16:
        raise ValueError("volterra_demo needs n >= 16")
    f = coordinate_nest(n)
    res = corrected_factor(min_kernel(n), f, central_difference(n, 1.0 / n), Partition.full(f.params))
    exact = volterra_exact(n)
    err = float(np.linalg.norm(res.v - exact) / np.linalg.norm(exact))
    return VolterraReport(n=n, kernel_error=err, residual=res.residual, tri_defect=res.tri_defect)


def volterra_study(ns: Sequence[int] = (50, 100, 200)) -> list[VolterraReport]:
    return ordered_map(volterra_demo, ns)


def write_volterra_csv(path, reports: Sequence[VolterraReport], seed: int | None = None) -> None:
    with csv_writer(path, seed) as out:
        out.writerow(["n", "kernel_error", "residual", "tri_defect"])
        for r in reports:
            out.writerow([r.n, f"{r.kernel_error:.17g}", f"{r.residual:.17g}", f"{r.tri_defect:.17g}"])
