"""Nests of subspaces on a parameter grid, image nests, and break scans.

A :class:`Nest` is stored as a *flag*: one matrix ``basis`` with orthonormal
columns plus a nondecreasing ``ranks`` array, so that the subspace at grid
point ``k`` is spanned by ``basis[:, :ranks[k]]``. Every finite chain of
nested subspaces admits such a representation, and nesting then holds by
construction. Queries between grid points round down to the nearest grid
point, which matches left-continuity of image nests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NestFactError, ZeroDimension
from .linops import as_mat, default_tol, spectral_norm

NEST_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class Nest:
    params: np.ndarray
    basis: np.ndarray
    ranks: np.ndarray
    coords: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        ranks = np.asarray(self.ranks, dtype=int)
        if params.ndim != 1 or params.size < 2:
            raise ZeroDimension("a nest needs at least two grid points")
        if np.any(np.diff(params) <= 0):
            raise NestFactError("nest params must be strictly increasing")
        if ranks.shape != params.shape:
            raise DimensionMismatch("ranks and params differ in length")
        if np.any(np.diff(ranks) < 0) or ranks[0] < 0:
            raise NestFactError("nest ranks must be nondecreasing")
        if ranks[-1] != self.basis.shape[1]:
            raise DimensionMismatch("final rank must equal the number of basis columns")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "ranks", ranks)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def steps(self) -> int:
        return self.params.size - 1

    @property
    def bordered(self) -> bool:
        return self.ranks[0] == 0 and self.ranks[-1] == self.ambient_dim

    @property
    def T(self) -> float:
        return float(self.params[-1])

    def step_basis(self, k: int) -> np.ndarray:
        return self.basis[:, : self.ranks[k]]

    @property
    def bases(self) -> list[np.ndarray]:
        return [self.step_basis(k) for k in range(self.params.size)]

    def increment(self, i: int, j: int) -> np.ndarray:
        """Orthonormal basis of ``F_{s_j} (-) F_{s_i}`` for ``i <= j``."""
        return self.basis[:, self.ranks[i] : self.ranks[j]]

    def index_of(self, s: float) -> int:
        """Grid index of ``s``, rounding down between grid points."""
        k = int(np.searchsorted(self.params, s + 1e-12 * max(1.0, abs(s)), side="right")) - 1
        return min(max(k, 0), self.steps)

    def projection(self, k: int) -> np.ndarray:
        b = self.step_basis(k)
        return b @ b.T

    def projections(self) -> "ProjectionNest":
        return ProjectionNest.from_nest(self)

    @classmethod
    def from_bases(cls, params: Sequence[float], bases: Sequence[np.ndarray], ambient_dim: int | None = None) -> "Nest":
        """Build a flag from arbitrary per-step orthonormal bases.

        Raises if a basis is not orthonormal or a step is not contained in
        the next one (both within ``1e-10``).
        """
        if not bases:
            raise ZeroDimension("no bases given")
        n = ambient_dim if ambient_dim is not None else as_mat(bases[0]).shape[0]
        cols: list[np.ndarray] = []
        ranks = []
        prev = np.zeros((n, 0))
        for k, b in enumerate(bases):
            b = as_mat(b, f"basis[{k}]") if np.size(b) else np.zeros((n, 0))
            if b.shape[0] != n:
                raise DimensionMismatch(f"basis[{k}] has {b.shape[0]} rows, expected {n}")
            if b.shape[1] and np.max(np.abs(b.T @ b - np.eye(b.shape[1]))) > NEST_ATOL:
                raise NestFactError(f"basis[{k}] is not orthonormal")
            if prev.shape[1] and b.shape[1] < prev.shape[1]:
                raise NestFactError(f"rank decreases at step {k}")
            if prev.shape[1]:
                leak = prev - b @ (b.T @ prev) if b.shape[1] else prev
                if np.max(np.abs(leak)) > NEST_ATOL:
                    raise NestFactError(f"step {k - 1} is not contained in step {k}")
            q = np.hstack(cols) if cols else np.zeros((n, 0))
            extra = b.shape[1] - q.shape[1]
            if extra > 0:
                resid = b - q @ (q.T @ b)
                u, _, _ = np.linalg.svd(resid, full_matrices=False)
                cols.append(u[:, :extra])
            ranks.append(b.shape[1])
            prev = b
        basis = np.hstack(cols) if cols else np.zeros((n, 0))
        return cls(params=np.asarray(params, dtype=float), basis=basis, ranks=np.array(ranks))


class ProjectionNest:
    """Projection family ``X_s`` on a grid.

    Projections are materialized lazily when the family comes from a
    :class:`Nest`, so large grids do not cost ``m * n**2`` memory.
    """

    def __init__(self, params, projections: Sequence[np.ndarray] | None = None, nest: Nest | None = None):
        self.params = np.asarray(params, dtype=float)
        self._explicit = None if projections is None else [as_mat(p) for p in projections]
        self.nest = nest
        if self._explicit is None and nest is None:
            raise ValueError("need projections or a nest")
        if self._explicit is not None and len(self._explicit) != self.params.size:
            raise DimensionMismatch("one projection per grid point required")

    @classmethod
    def from_nest(cls, nest: Nest) -> "ProjectionNest":
        return cls(nest.params, nest=nest)

    def __len__(self) -> int:
        return self.params.size

    def __getitem__(self, k: int) -> np.ndarray:
        if self._explicit is not None:
            return self._explicit[k]
        return self.nest.projection(k)

    @property
    def dim(self) -> int:
        return self.nest.ambient_dim if self.nest is not None else self._explicit[0].shape[0]

    @property
    def ranks(self) -> np.ndarray:
        if self.nest is not None:
            return self.nest.ranks.copy()
        return np.array([int(round(np.trace(p))) for p in self._explicit])

    def jump(self, k: int) -> float:
        """``||X_{s_k} - X_{s_{k-1}}||``."""
        if self.nest is not None:
            inc = self.nest.increment(k - 1, k)
            return spectral_norm(inc) ** 2
        return spectral_norm(self[k] - self[k - 1])


def coordinate_nest(n: int, orientation: str = "forward", T: float = 1.0) -> Nest:
    """Bordered chain on ``s_k = k T / n``.

    ``forward`` spans the first ``k`` coordinates (supports in ``[0, s]``),
    ``delayed`` the last ``k`` (supports in ``[T - s, T]``).
    """
    if n < 1:
        raise ZeroDimension("coordinate nest needs n >= 1")
    if orientation == "forward":
        order = np.arange(n)
    elif orientation == "delayed":
        order = np.arange(n)[::-1].copy()
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    basis = np.eye(n)[:, order]
    return Nest(params=np.linspace(0.0, T, n + 1), basis=basis, ranks=np.arange(n + 1), coords=order)


def image_nest(w, f: Nest, tol: float = 0.0) -> Nest:
    """Nest ``H_s = closure(W F_s)`` with numerical column spaces.

    Built by block Gram-Schmidt over the increments of ``f`` with one
    re-orthogonalization pass; residual directions with singular value at
    most ``tol`` (default: ``max(shape) * eps * ||W||``) are dropped.
    """
    w = as_mat(w)
    if w.shape[1] != f.ambient_dim:
        raise DimensionMismatch(f"W has {w.shape[1]} columns, nest lives in dimension {f.ambient_dim}")
    cut = tol if tol > 0 else default_tol(w)
    rows = w.shape[0]
    q = np.zeros((rows, min(rows, f.basis.shape[1])))
    r = 0
    ranks = np.zeros(f.params.size, dtype=int)
    for k in range(1, f.params.size):
        inc = f.increment(k - 1, k)
        if inc.shape[1] and r < rows:
            new = w @ inc
            qr = q[:, :r]
            for _ in range(2):
                new = new - qr @ (qr.T @ new)
            u, s, _ = np.linalg.svd(new, full_matrices=False)
            keep = min(int(np.count_nonzero(s > cut)), rows - r)
            if keep:
                vecs = u[:, :keep]
                vecs = vecs - qr @ (qr.T @ vecs)
                vecs, _ = np.linalg.qr(vecs)
                q[:, r : r + keep] = vecs
                r += keep
        ranks[k] = r
    return Nest(params=f.params.copy(), basis=q[:, :r].copy(), ranks=ranks)


@dataclass
class BreakReport:
    params: np.ndarray
    rank_increments: np.ndarray
    source_increments: np.ndarray
    left_jump: np.ndarray
    right_jump: np.ndarray
    right_breaks: list[float]
    left_breaks: list[float]

    @property
    def detected_sigma(self) -> float | None:
        return self.right_breaks[0] if self.right_breaks else None


def continuity_scan(p: ProjectionNest, source: Nest | ProjectionNest | None = None) -> BreakReport:
    """Grid diagnosis of breaks in a projection nest.

    A rank jump at ``s_k`` that follows a step where the image stayed flat
    although the source grew is reported as a right-break at ``s_{k-1}``.
    Growth faster than the source is reported as a left-break at ``s_k``.
    Without ``source`` the source is assumed to grow at every step. A jump
    at the first step cannot be told apart from ordinary growth and is
    never flagged.
    """
    m = len(p)
    ranks = p.ranks
    b = np.diff(ranks)
    if source is None:
        a = np.maximum(b, 1)
    else:
        a = np.diff(np.asarray(source.ranks))
        if a.size != b.size:
            raise DimensionMismatch("source and image grids differ")
    left = np.zeros(m)
    right = np.zeros(m)
    right_breaks: list[float] = []
    left_breaks: list[float] = []
    for k in range(1, m):
        if b[k - 1] <= 0:
            continue
        jump = p.jump(k)
        stalled = k >= 2 and b[k - 2] == 0 and a[k - 2] > 0
        if stalled:
            right[k - 1] = jump
            right_breaks.append(float(p.params[k - 1]))
        elif b[k - 1] > a[k - 1]:
            left[k] = jump
            left_breaks.append(float(p.params[k]))
    return BreakReport(
        params=p.params.copy(),
        rank_increments=b,
        source_increments=a,
        left_jump=left,
        right_jump=right,
        right_breaks=right_breaks,
        left_breaks=left_breaks,
    )


def monotonicity_defect(p: ProjectionNest) -> float:
    """``max_{i <= j} ||X_i X_j - X_i||``."""
    worst = 0.0
    mats = [p[k] for k in range(len(p))]
    for i, xi in enumerate(mats):
        for xj in mats[i:]:
            worst = max(worst, spectral_norm(xi @ xj - xi))
    return worst


def nest_to_json(nest: Nest) -> dict:
    return {
        "ambient_dim": nest.ambient_dim,
        "params": nest.params.tolist(),
        "bordered": bool(nest.bordered),
        "bases": [{"cols": int(b.shape[1]), "data": b.ravel().tolist()} for b in nest.bases],
    }


def nest_from_json(doc: dict) -> Nest:
    n = int(doc["ambient_dim"])
    bases = []
    for k, entry in enumerate(doc["bases"]):
        cols = int(entry["cols"])
        data = np.asarray(entry["data"], dtype=float)
        if data.size != n * cols:
            raise DimensionMismatch(f"bases[{k}]: expected {n * cols} entries, got {data.size}")
        bases.append(data.reshape(n, cols))
    nest = Nest.from_bases(doc["params"], bases, ambient_dim=n)
    if doc.get("bordered") and not nest.bordered:
        raise NestFactError("nest declared bordered but ranks do not run from 0 to ambient_dim")
    return nest


def save_nest(path, nest: Nest) -> None:
    Path(path).write_text(json.dumps(nest_to_json(nest)))


def load_nest(path) -> Nest:
    return nest_from_json(json.loads(Path(path).read_text()))
