"""1D Schrodinger wave system ``u_tt = u_xx - q u`` with Dirichlet boundary control.

Grids: ``t_n = n dt`` on ``[0, T]`` and ``x_j = j dx`` on ``[0, X]`` with
``X >= T`` so the far end is never reached by time ``T``. ``u(X, t) = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CflViolation, GridMismatch, NonFinite

KINDS = ("zero", "const", "bump", "table")
PARAM_KEYS = {"zero": set(), "const": {"value"}, "bump": {"height", "center", "width"}, "table": {"x", "q"}}


@dataclass(frozen=True)
class Potential:
    """``zero``; ``const`` {value}; ``bump`` {height, center, width} (Gaussian);
    ``table`` {x, q} linearly interpolated, constant beyond the ends."""

    kind: str = "zero"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        extra = set(self.params) - PARAM_KEYS[self.kind]
        if extra:
            raise ValueError(f"unknown {self.kind} potential parameters: {sorted(extra)}")
        if self.kind == "table":
            x = np.asarray(self.params.get("x", []), dtype=float)
            q = np.asarray(self.params.get("q", []), dtype=float)
            if x.size < 2 or x.shape != q.shape or np.any(np.diff(x) <= 0):
                raise ValueError("table potential needs increasing x and matching q")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "const":
            return np.full_like(x, float(p.get("value", 1.0)))
        if self.kind == "bump":
            h, c, w = float(p.get("height", 1.0)), float(p.get("center", 0.4)), float(p.get("width", 0.1))
            return h * np.exp(-(((x - c) / w) ** 2))
        return np.interp(x, np.asarray(p["x"], dtype=float), np.asarray(p["q"], dtype=float))

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_json(cls, doc: dict) -> "Potential":
        """Accepts ``{kind, **params}`` or ``{kind, params: {...}}``."""
        doc = dict(doc)
        kind = doc.pop("kind", "zero")
        nested = doc.pop("params", None)
        if isinstance(nested, dict):
            doc = {**nested, **doc}
        elif nested is not None:
            raise ValueError("potential 'params' must be an object")
        return cls(kind=kind, params=doc)


@dataclass(frozen=True)
class WaveSystem:
    T: float
    nt: int
    nx: int
    X: float
    q: np.ndarray
    potential: Potential | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (self.nx + 1,):
            raise GridMismatch(f"q has {q.size} samples, x-grid has {self.nx + 1}")
        if not np.all(np.isfinite(q)):
            raise NonFinite("potential samples are not finite")
        if self.T <= 0 or self.nt < 1 or self.nx < 1:
            raise ValueError("T, nt and nx must be positive")
        if self.X < self.T - 1e-12:
            raise ValueError(f"X = {self.X} must be at least T = {self.T}")
        if self.cfl > 1.0 + 1e-12:
            raise CflViolation(f"dt/dx = {self.cfl:.6g} exceeds 1")
        object.__setattr__(self, "q", q)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def dx(self) -> float:
        return self.X / self.nx

    @property
    def cfl(self) -> float:
        return self.dt / self.dx

    @property
    def matched(self) -> bool:
        return abs(self.cfl - 1.0) < 1e-12

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.dx

    @classmethod
    def build(cls, T: float, n: int, potential: Potential, cfl: float = 1.0, X: float | None = None) -> "WaveSystem":
        """``n`` time steps on ``[0, T]``; ``X`` defaults to ``T`` plus two cells."""
        if not 0 < cfl <= 1.0 + 1e-12:
            raise CflViolation(f"cfl = {cfl} must lie in (0, 1]")
        dt = T / n
        dx = dt / cfl
        nx = int(np.ceil((T if X is None else X) / dx - 1e-9)) + (2 if X is None else 0)
        x_end = nx * dx
        return cls(T=T, nt=n, nx=nx, X=x_end, q=potential(np.arange(nx + 1) * dx), potential=potential)

    def extended(self, length: float) -> "WaveSystem":
        """Same grids on a longer space interval ``[0, >= length]``."""
        nx = max(self.nx, int(np.ceil(length / self.dx - 1e-9)))
        x = np.arange(nx + 1) * self.dx
        if self.potential is not None:
            q = self.potential(x)
        else:
            q = np.concatenate([self.q, np.full(nx - self.nx, self.q[-1])])
        return WaveSystem(T=self.T, nt=self.nt, nx=nx, X=nx * self.dx, q=q, potential=self.potential)


def _bump_core(t, c, w):
    r = (np.asarray(t, dtype=float) - c) / w
    inside = np.abs(r) < 1
    return r, inside


def bump(t, c: float, w: float) -> np.ndarray:
    """C-infinity bump ``exp(1 - 1/(1 - r^2))``, ``r = (t - c)/w``, peak 1."""
    r, inside = _bump_core(t, c, w)
    out = np.zeros(r.shape)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def bump_dd(t, c: float, w: float) -> np.ndarray:
    """Exact second derivative of :func:`bump` in ``t``."""
    r, inside = _bump_core(t, c, w)
    out = np.zeros(r.shape)
    rr = r[inside]
    g = 1.0 / (1.0 - rr**2)
    gp = 2.0 * rr * g**2
    gpp = 2.0 * g**2 + 8.0 * rr**2 * g**3
    out[inside] = np.exp(1.0 - g) * (gp**2 - gpp) / w**2
    return out


@dataclass(frozen=True)
class Control:
    """Boundary control sampled on ``t_n = n dt``; ``samples[0]`` must vanish."""

    samples: np.ndarray
    dt: float
    smooth: bool = False

    def __post_init__(self):
        f = np.asarray(self.samples, dtype=float)
        if f.ndim != 1 or f.size < 2:
            raise GridMismatch("control must be a 1-D sample vector")
        if not np.all(np.isfinite(f)):
            raise NonFinite("control samples are not finite")
        if abs(f[0]) > 1e-14 * max(1.0, float(np.max(np.abs(f)))):
            raise ValueError("control must vanish at t = 0")
        object.__setattr__(self, "samples", f)

    @property
    def steps(self) -> int:
        return self.samples.size - 1

    @classmethod
    def spike(cls, sys: WaveSystem, a: int, steps: int | None = None) -> "Control":
        f = np.zeros((sys.nt if steps is None else steps) + 1)
        f[a] = 1.0
        return cls(f, sys.dt)

    @classmethod
    def smooth_bump(cls, sys: WaveSystem, c: float, w: float) -> "Control":
        if c - w < 0:
            raise ValueError("smooth controls must vanish near t = 0")
        return cls(bump(sys.t, c, w), sys.dt, smooth=True)


@dataclass(frozen=True)
class WaveField:
    u: np.ndarray  # (steps + 1, nx + 1), row n is time t_n
    dt: float
    dx: float

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.u.shape[0]) * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.u.shape[1]) * self.dx

    def at_time(self, n: int) -> np.ndarray:
        return self.u[n]


def leapfrog(q: np.ndarray, dt: float, dx: float, f: np.ndarray) -> np.ndarray:
    """Explicit leapfrog for ``u_tt = u_xx - q u``, ``u(0, t_n) = f[n]``, ``u(X) = 0``.

    Zero initial data; the first step uses ``u^{-1} = u^{1}`` (zero velocity).
    """
    lam2 = (dt / dx) ** 2
    steps = f.size - 1
    nx = q.size - 1
    out = np.zeros((steps + 1, nx + 1))
    prev = np.zeros(nx + 1)
    cur = np.zeros(nx + 1)
    cur[0] = f[0]
    out[0] = cur
    inner_q = dt * dt * q[1:-1]
    for n in range(steps):
        nxt = np.empty(nx + 1)
        c = cur[1:-1]
        lap = cur[2:] - 2.0 * c + cur[:-2]
        if n == 0:
            nxt[1:-1] = c + 0.5 * (lam2 * lap - inner_q * c)
        else:
            nxt[1:-1] = 2.0 * c - prev[1:-1] + lam2 * lap - inner_q * c
        nxt[0] = f[n + 1]
        nxt[-1] = 0.0
        prev, cur = cur, nxt
        out[n + 1] = cur
    return out


def solve_wave(sys: WaveSystem, f: Control) -> WaveField:
    """Trajectory ``u^f`` on ``sys``'s grids for ``f.steps`` time steps."""
    if abs(f.dt - sys.dt) > 1e-12 * sys.dt:
        raise GridMismatch(f"control dt {f.dt:.6g} differs from system dt {sys.dt:.6g}")
    if sys.cfl > 1.0 + 1e-12:
        raise CflViolation(f"dt/dx = {sys.cfl:.6g} exceeds 1")
    return WaveField(u=leapfrog(sys.q, sys.dt, sys.dx, f.samples), dt=sys.dt, dx=sys.dx)
