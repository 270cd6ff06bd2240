"""Functional model built from a factorization of the connecting operator.

``C = V^T V`` along the delayed-control nest; the graph pairs
``(g, h) = (V f, -V f'')`` for smooth test controls define the model
operator ``-d^2/dt^2 + q~``, and ``q~`` is read off pointwise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..diagonal import Partition
from ..errors import DimensionMismatch, EmptyMask, RankDeficient
from ..factor import FactorizationResult, factor_continual
from ..linops import default_tol, spectral_norm, svd
from ..nest import coordinate_nest
from .system import bump, bump_dd

DEFAULT_WIDTH = 0.2
DEFAULT_CONTROLS = 15
DEFAULT_FLOOR = 0.05
MIN_VOTES = 3


@dataclass
class ModelOperator:
    t: np.ndarray  # control grid t_1..t_N
    v: np.ndarray
    f: np.ndarray  # (K, N) test controls
    f_dd: np.ndarray  # exact second derivatives
    g: np.ndarray  # V f, row per control
    h: np.ndarray  # -V f''
    centers: np.ndarray
    width: float
    factorization: FactorizationResult | None = None

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def T(self) -> float:
        return float(self.t[-1])


def control_bank(t: np.ndarray, count: int = DEFAULT_CONTROLS, width: float = DEFAULT_WIDTH):
    """Bumps with staggered centers whose supports stay inside ``(0, T)``."""
    dt = float(t[1] - t[0])
    T = float(t[-1])
    lo, hi = width + dt, T - width - dt
    if hi < lo:
        raise ValueError(f"bump width {width} does not fit in [0, {T}]")
    centers = np.linspace(lo, hi, count)
    f = np.stack([bump(t, c, width) for c in centers])
    f_dd = np.stack([bump_dd(t, c, width) for c in centers])
    return centers, f, f_dd


def build_model(v: np.ndarray, t: np.ndarray, count: int = DEFAULT_CONTROLS, width: float = DEFAULT_WIDTH) -> ModelOperator:
    v = np.asarray(v, dtype=float)
    if v.shape != (t.size, t.size):
        raise DimensionMismatch(f"V is {v.shape}, grid has {t.size} points")
    centers, f, f_dd = control_bank(t, count, width)
    return ModelOperator(
        t=t, v=v, f=f, f_dd=f_dd, g=f @ v.T, h=-(f_dd @ v.T), centers=centers, width=width
    )


def model_from_factorization(
    c: np.ndarray, T: float, count: int = DEFAULT_CONTROLS, width: float = DEFAULT_WIDTH, tol: float | None = None
) -> ModelOperator:
    """Factor ``c`` along the delayed nest on ``t_a = a T / N`` and build the graph pairs."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    nest = coordinate_nest(n, "delayed", T)
    fac = factor_continual(c, nest, Partition.full(nest.params), tol)
    t = np.arange(1, n + 1) * (T / n)
    model = build_model(fac.v, t, count, width)
    model.factorization = fac
    return model


@dataclass(frozen=True)
class PotentialEstimate:
    t: np.ndarray
    q: np.ndarray  # nan outside the mask
    mask: np.ndarray
    votes: np.ndarray
    floor: float


def extract_potential(m: ModelOperator, floor: float = DEFAULT_FLOOR, min_votes: int = MIN_VOTES) -> PotentialEstimate:
    """``q~ = (h + g'')/g`` per control, masked median across controls.

    A control votes at ``t`` when ``|g(t)| >= floor * max|g|``. ``g''`` is
    the five-point fourth-order second difference, so two points at each
    end are excluded.
    """
    dt = m.dt
    k, n = m.g.shape
    vals = np.full((k, n), np.nan)
    for i in range(k):
        g = m.g[i]
        top = float(np.max(np.abs(g)))
        if top == 0.0:
            continue
        ok = np.abs(g) >= floor * top
        ok[:2] = ok[-2:] = False
        gdd = np.zeros(n)
        gdd[2:-2] = (-g[4:] + 16.0 * g[3:-1] - 30.0 * g[2:-2] + 16.0 * g[1:-3] - g[:-4]) / (12.0 * dt**2)
        vals[i, ok] = (m.h[i, ok] + gdd[ok]) / g[ok]
    votes = np.sum(~np.isnan(vals), axis=0)
    mask = votes >= min_votes
    if not np.any(mask):
        raise EmptyMask(f"no grid point has {min_votes} controls above the floor {floor}")
    q = np.full(n, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q[mask] = np.nanmedian(vals[:, mask], axis=0)
    return PotentialEstimate(t=m.t.copy(), q=q, mask=mask, votes=votes, floor=floor)


@dataclass(frozen=True)
class Equivalence:
    defect: float  # ||W - U V|| / ||W||
    unitarity: float  # ||U^T U - I||
    u: np.ndarray


def _left_polar(a: np.ndarray, name: str) -> np.ndarray:
    parts = svd(a)
    cut = default_tol(a, float(parts.s[0]) if parts.s.size else 0.0)
    r = int(np.count_nonzero(parts.s > cut))
    if r < a.shape[1]:
        raise RankDeficient(f"{name} has numerical rank {r} < {a.shape[1]}")
    return parts.u[:, :r] @ parts.vt[:r]


def unitary_equivalence_check(w: np.ndarray, v: np.ndarray) -> Equivalence:
    """``U = Phi_W Phi_V^T`` from the two left polar factors; ``W = U V`` when ``W^T W = V^T V``."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    if w.shape[1] != v.shape[1]:
        raise DimensionMismatch("w and v act on different spaces")
    u = _left_polar(w, "W") @ _left_polar(v, "V").T
    nw = spectral_norm(w)
    return Equivalence(
        defect=spectral_norm(w - u @ v) / nw if nw > 0 else 0.0,
        unitarity=spectral_norm(u.T @ u - np.eye(u.shape[1])),
        u=u,
    )
