"""Dense real linear algebra kernel.

Matrices are plain 2-D ``float64`` numpy arrays; :func:`as_mat` is the
validating constructor. Eigen- and singular-value work is delegated to
LAPACK through numpy, while :func:`cholesky_upper` is written out by hand
so that it can serve as an independent oracle for the nest factorization.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetricInput,
    ConvergenceFailure,
    DimensionMismatch,
    NonFinite,
    NonSquare,
    NotPositiveDefinite,
    NotPSD,
    ZeroOperator,
)

EPS = np.finfo(float).eps

SYMMETRY_RTOL = 1e-10
PSD_CLAMP_RTOL = 1e-10


def as_mat(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float array, rejecting NaN/Inf."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFinite(f"{name} has non-finite entries")
    return m


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise NonSquare(f"{name} must be square, got {a.shape}")


def spectral_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def symmetry_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.T))) if a.size else 0.0


def default_tol(a: np.ndarray, smax: float | None = None) -> float:
    """Numerical-rank cutoff ``max(rows, cols) * eps * sigma_max``."""
    if smax is None:
        smax = spectral_norm(a)
    return max(a.shape) * EPS * smax


@dataclass(frozen=True)
class EigenPair:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns, orthonormal

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


@dataclass(frozen=True)
class SvdParts:
    u: np.ndarray
    s: np.ndarray  # descending
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        k = len(self.s)
        return (self.u[:, :k] * self.s) @ self.vt[:k]


@dataclass(frozen=True)
class PolarParts:
    """Polar decomposition ``d.T = phi @ modulus`` of the adjoint of ``d``.

    ``phi`` is the partial isometry ``Phi*`` (shape ``d.cols x d.rows``) and
    ``modulus`` is ``|D*| = sqrt(d d.T)``.
    """

    phi: np.ndarray
    modulus: np.ndarray
    rank: int
    tol: float


def sym_eig(a) -> EigenPair:
    a = as_mat(a)
    _require_square(a, "sym_eig input")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if symmetry_defect(a) > SYMMETRY_RTOL * scale:
        raise AsymmetricInput(
            f"symmetry defect {symmetry_defect(a):.3e} exceeds "
            f"{SYMMETRY_RTOL:g} * max|a| = {SYMMETRY_RTOL * scale:.3e}"
        )
    try:
        w, q = np.linalg.eigh(0.5 * (a + a.T))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return EigenPair(values=w[::-1].copy(), vectors=q[:, ::-1].copy())


def svd(a) -> SvdParts:
    a = as_mat(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return SvdParts(u=u, s=s, vt=vt)


def sqrt_psd(c) -> np.ndarray:
    """Symmetric PSD square root via the eigendecomposition.

    Eigenvalues in ``[-1e-10 * lambda_max, 0)`` are treated as rounding noise
    and clamped to zero; anything more negative raises :class:`NotPSD`.
    """
    ep = sym_eig(c)
    lam = ep.values
    if lam.size == 0:
        return np.zeros((0, 0))
    top = max(float(lam[0]), 0.0)
    if lam[-1] < -PSD_CLAMP_RTOL * top or (top == 0.0 and lam[-1] < 0.0):
        raise NotPSD(f"eigenvalue {lam[-1]:.3e} below -{PSD_CLAMP_RTOL:g} * {top:.3e}")
    root = np.sqrt(np.clip(lam, 0.0, None))
    s = (ep.vectors * root) @ ep.vectors.T
    return 0.5 * (s + s.T)


def polar_adjoint(d, tol: float = 0.0) -> PolarParts:
    """Polar decomposition of ``d.T``: ``d.T = Phi* |D*|``.

    Only singular triplets with ``sigma > tol`` enter ``Phi*``; ``tol == 0``
    selects :func:`default_tol`.
    """
    d = as_mat(d)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    parts = svd(d)
    smax = float(parts.s[0]) if parts.s.size else 0.0
    cut = tol if tol > 0 else default_tol(d, smax)
    r = int(np.count_nonzero(parts.s > cut))
    if r == 0:
        raise ZeroOperator(f"all singular values <= {cut:.3e}")
    ur = parts.u[:, :r]
    vr = parts.vt[:r].T
    phi = vr @ ur.T
    modulus = (ur * parts.s[:r]) @ ur.T
    return PolarParts(phi=phi, modulus=0.5 * (modulus + modulus.T), rank=r, tol=cut)


def cholesky_upper(c) -> np.ndarray:
    """Upper-triangular ``R`` with positive diagonal and ``R.T @ R = c``.

    Row-oriented outer-product elimination, kept independent of LAPACK.
    """
    c = as_mat(c)
    _require_square(c, "cholesky input")
    n = c.shape[0]
    r = np.zeros_like(c)
    for k in range(n):
        col = r[:k, k]
        pivot = c[k, k] - col @ col
        if not pivot > 0.0:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at row {k}")
        rkk = np.sqrt(pivot)
        r[k, k] = rkk
        if k + 1 < n:
            r[k, k + 1 :] = (c[k, k + 1 :] - col @ r[:k, k + 1 :]) / rkk
    return r


def write_matrix(path, a) -> None:
    """Write ``a`` as ``rows cols`` followed by rows of 17-digit decimals."""
    a = as_mat(a)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in a]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise DimensionMismatch(f"{path}: missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    values = tokens[2:]
    if len(values) != rows * cols:
        raise DimensionMismatch(
            f"{path}: header says {rows}x{cols} but found {len(values)} entries"
        )
    return as_mat(np.array(values, dtype=float).reshape(rows, cols), str(path))
