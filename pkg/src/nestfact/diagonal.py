"""Two-nest diagonals ``D = sum dP W dX``, refinement sweeps, orthogonalizers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._csv import csv_writer
from ._parallel import ordered_map
from .errors import DimensionMismatch, GridMismatch, PartitionNotOnGrid, ZeroOperator
from .linops import as_mat, default_tol, polar_adjoint, spectral_norm, sqrt_psd, sym_eig
from .nest import Nest, ProjectionNest, image_nest

ISOMETRY_ATOL = 1e-8


def opnorm(a: np.ndarray) -> float:
    """Spectral norm through the Gram matrix on the smaller side."""
    if a.size == 0:
        return 0.0
    g = a @ a.T if a.shape[0] <= a.shape[1] else a.T @ a
    top = float(np.linalg.eigvalsh(g)[-1])
    return float(np.sqrt(max(top, 0.0)))


@dataclass(frozen=True)
class Partition:
    """Partition ``0 = s_0 < ... < s_n = T`` drawn from a host grid."""

    indices: np.ndarray
    points: np.ndarray

    @property
    def range(self) -> float:
        return float(np.max(np.diff(self.points)))

    @property
    def size(self) -> int:
        return self.indices.size - 1

    @classmethod
    def on_grid(cls, params, points: Sequence[float], atol: float = 1e-12) -> "Partition":
        params = np.asarray(params, dtype=float)
        pts = np.asarray(points, dtype=float)
        if pts.size < 2 or np.any(np.diff(pts) <= 0):
            raise PartitionNotOnGrid("partition points must be strictly increasing")
        idx = np.searchsorted(params, pts)
        idx = np.clip(idx, 0, params.size - 1)
        lower = np.clip(idx - 1, 0, params.size - 1)
        pick = np.where(np.abs(params[lower] - pts) < np.abs(params[idx] - pts), lower, idx)
        scale = atol * max(1.0, float(np.max(np.abs(params))))
        if np.any(np.abs(params[pick] - pts) > scale):
            bad = pts[np.abs(params[pick] - pts) > scale][0]
            raise PartitionNotOnGrid(f"point {bad!r} is not on the nest grid")
        if pick[0] != 0 or pick[-1] != params.size - 1:
            raise PartitionNotOnGrid("partition must start at s_0 and end at T")
        return cls(indices=pick, points=params[pick].copy())

    @classmethod
    def full(cls, params) -> "Partition":
        params = np.asarray(params, dtype=float)
        return cls(indices=np.arange(params.size), points=params.copy())

    @classmethod
    def every(cls, params, stride: int) -> "Partition":
        """Every ``stride``-th grid point, always keeping the endpoint."""
        params = np.asarray(params, dtype=float)
        if stride < 1:
            raise ValueError("stride must be >= 1")
        idx = list(range(0, params.size - 1, stride)) + [params.size - 1]
        idx = np.array(sorted(set(idx)))
        return cls(indices=idx, points=params[idx].copy())


@dataclass
class DiagonalResult:
    d: np.ndarray
    partition: Partition
    intertwine_defect: float
    norm_ratio: float
    norm_d: float
    norm_w: float
    source: Nest
    image: Nest
    w: np.ndarray
    isometric_adjoint: bool = False
    diff_to_previous: float | None = None

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.d))


def _block_sum(middle: np.ndarray, f: Nest, h: Nest, idx: np.ndarray) -> np.ndarray:
    """``sum_k dP_k M dX_k`` evaluated in the flag bases of both nests."""
    qf, qh = f.basis, h.basis
    m = qh.T @ middle @ qf
    blocks = np.zeros_like(m)
    for a, b in zip(idx[:-1], idx[1:]):
        rows = slice(h.ranks[a], h.ranks[b])
        cols = slice(f.ranks[a], f.ranks[b])
        blocks[rows, cols] = m[rows, cols]
    return qh @ blocks @ qf.T


def _complete(q: np.ndarray) -> np.ndarray:
    """``q`` followed by an orthonormal basis of its complement."""
    n, r = q.shape
    if r == n:
        return q
    full, _ = np.linalg.qr(np.hstack([q, np.zeros((n, n - r))]) if r else np.eye(n), mode="complete")
    return np.hstack([q, full[:, r:]])


def nest_intertwine_defect(d: np.ndarray, f: Nest, h: Nest, idx: Sequence[int]) -> float:
    """Upper bound on ``max_s ||P_s D - D X_s||`` over the grid indices ``idx``.

    ``P D - D X = P D (I - X) - (I - P) D X``; the two pieces have
    orthogonal domains and ranges, so the norm is the larger of the two.
    In completed flag coordinates they are the corner blocks
    ``M[:a, b:]`` and ``M[a:, :b]`` of ``M = Q_h^T D Q_f``, and their
    Frobenius norms (which dominate the operator norms) come from
    cumulative sums of ``M**2`` without cancellation.
    """
    m = _complete(h.basis).T @ d @ _complete(f.basis)
    sq = m * m
    # upper[a, b] = sum over rows < a, cols >= b; lower[a, b] = rows >= a, cols < b
    upper = np.zeros((sq.shape[0] + 1, sq.shape[1] + 1))
    upper[1:, :-1] = np.cumsum(np.cumsum(sq[:, ::-1], axis=1)[:, ::-1], axis=0)
    lower = np.zeros_like(upper)
    lower[:-1, 1:] = np.cumsum(np.cumsum(sq[::-1], axis=0)[::-1], axis=1)
    a = h.ranks[np.asarray(idx)]
    b = f.ranks[np.asarray(idx)]
    worst = max(float(np.max(upper[a, b])), float(np.max(lower[a, b])))
    return float(np.sqrt(worst))


def _check_nests(w: np.ndarray, f: Nest, h: Nest) -> None:
    if w.shape != (h.ambient_dim, f.ambient_dim):
        raise DimensionMismatch(
            f"W is {w.shape}, nests live in dimensions ({h.ambient_dim}, {f.ambient_dim})"
        )
    if f.params.shape != h.params.shape or np.max(np.abs(f.params - h.params)) > 1e-12:
        raise GridMismatch("source and image nests must share a parameter grid")


def _isometric_adjoint(d: np.ndarray) -> bool:
    dtd = d.T @ d
    ddt = d @ d.T
    return (
        spectral_norm(dtd @ dtd - dtd) <= ISOMETRY_ATOL
        and spectral_norm(ddt - np.eye(d.shape[0])) <= ISOMETRY_ATOL
    )


def partition_diagonal(w, f: Nest, h: Nest, xi: Partition, middle=None) -> DiagonalResult:
    """Integral sum ``D^Xi = sum_k dP_{s_k} W dX_{s_k}``.

    ``middle`` replaces ``W`` inside the sum while ``h`` stays the nest it
    was built from; the corrected diagonal uses this with ``W @ d/dt``.
    """
    w = as_mat(w)
    _check_nests(w, f, h)
    if xi.indices[-1] >= f.params.size or np.any(np.abs(f.params[xi.indices] - xi.points) > 1e-12):
        raise PartitionNotOnGrid("partition does not lie on the nest grid")
    mid = w if middle is None else as_mat(middle)
    if mid.shape != w.shape:
        raise DimensionMismatch("middle operator must have the shape of W")
    d = _block_sum(mid, f, h, xi.indices)
    norm_w = spectral_norm(mid)
    norm_d = spectral_norm(d)
    return DiagonalResult(
        d=d,
        partition=xi,
        intertwine_defect=nest_intertwine_defect(d, f, h, xi.indices),
        norm_ratio=norm_d / norm_w if norm_w > 0 else 0.0,
        norm_d=norm_d,
        norm_w=norm_w,
        source=f,
        image=h,
        w=mid,
        isometric_adjoint=_isometric_adjoint(d),
    )


def finite_diagonal(w, f: Nest, tol: float = 0.0) -> DiagonalResult:
    """``D_W`` over the full grid with ``h = image_nest(w, f)``."""
    w = as_mat(w)
    h = image_nest(w, f, tol)
    return partition_diagonal(w, f, h, Partition.full(f.params))


def refinement_sweep(w, f: Nest, schedule: Sequence[Partition], h: Nest | None = None) -> list[DiagonalResult]:
    """One diagonal per partition; ``diff_to_previous`` holds max-entry changes."""
    w = as_mat(w)
    ranges = [xi.range for xi in schedule]
    if any(b > a + 1e-12 for a, b in zip(ranges, ranges[1:])):
        raise ValueError("schedule must be ordered by decreasing range")
    if h is None:
        h = image_nest(w, f)
    results = ordered_map(lambda xi: partition_diagonal(w, f, h, xi), schedule)
    for prev, cur in zip(results, results[1:]):
        cur.diff_to_previous = float(np.max(np.abs(cur.d - prev.d)))
    return results


def write_convergence_csv(path, results: Sequence[DiagonalResult], seed: int | None = None) -> None:
    with csv_writer(path, seed) as out:
        out.writerow(["range", "norm_D", "intertwine_defect", "diff_to_previous"])
        for r in results:
            diff = "" if r.diff_to_previous is None else f"{r.diff_to_previous:.17g}"
            out.writerow([f"{r.partition.range:.17g}", f"{r.norm_d:.17g}", f"{r.intertwine_defect:.17g}", diff])


@dataclass(frozen=True)
class Orthogonalizer:
    psi: np.ndarray
    weight: np.ndarray
    nu: np.ndarray  # per partition step; nan where the step is not rank one


def orthogonalizer(dres: DiagonalResult, tol: float = 0.0) -> Orthogonalizer:
    """``Psi = N D`` with ``N = |D*|^{-1}`` on the range of ``D``."""
    d = dres.d
    modulus = sqrt_psd(d @ d.T)
    ep = sym_eig(modulus)
    cut = tol if tol > 0 else default_tol(d, float(ep.values[0]) if ep.values.size else 0.0)
    keep = ep.values > cut
    if not np.any(keep):
        raise ZeroOperator("diagonal has no numerical range")
    vecs = ep.vectors[:, keep]
    weight = (vecs / ep.values[keep]) @ vecs.T
    psi = weight @ d

    f, h, idx = dres.source, dres.image, dres.partition.indices
    nu = np.full(idx.size - 1, np.nan)
    for k, (a, b) in enumerate(zip(idx[:-1], idx[1:])):
        gf = f.increment(a, b)
        gh = h.increment(a, b)
        if gf.shape[1] == 1 and gh.shape[1] == 1:
            val = abs(float(gh[:, 0] @ dres.w @ gf[:, 0]))
            if val > 0:
                nu[k] = 1.0 / val
    return Orthogonalizer(psi=psi, weight=weight, nu=nu)


def intertwining_check(d, f_proj: ProjectionNest, h_proj: ProjectionNest) -> float:
    """``max_s ||P_s D - D X_s||`` with explicit projection matrices."""
    d = as_mat(d)
    if len(f_proj) != len(h_proj):
        raise DimensionMismatch("projection nests have different grids")
    if d.shape != (h_proj.dim, f_proj.dim):
        raise DimensionMismatch(f"D is {d.shape}, nests are ({h_proj.dim}, {f_proj.dim})")
    return max(spectral_norm(h_proj[k] @ d - d @ f_proj[k]) for k in range(len(f_proj)))


def derived_commutation_defect(d, f_proj: ProjectionNest, h_proj: ProjectionNest) -> float:
    """Max defect of ``X|D| = |D|X``, ``P|D*| = |D*|P`` and ``X Phi* = Phi* P``."""
    d = as_mat(d)
    mod = sqrt_psd(d.T @ d)
    mod_adj = sqrt_psd(d @ d.T)
    phi = polar_adjoint(d).phi
    worst = 0.0
    for k in range(len(f_proj)):
        x, p = f_proj[k], h_proj[k]
        worst = max(
            worst,
            spectral_norm(x @ mod - mod @ x),
            spectral_norm(p @ mod_adj - mod_adj @ p),
            spectral_norm(x @ phi - phi @ p),
        )
    return worst
