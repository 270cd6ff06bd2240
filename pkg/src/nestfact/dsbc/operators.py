"""Control, response and connecting operators of the wave system.

The control basis is the spike family ``e_a`` (unit value at ``t_a``,
``a = 1..N``). The system is time invariant, so the trajectory for ``e_a``
is the one for ``e_1`` delayed by ``a - 1`` steps and a single forward
solve yields every column.

Functions on the grids are identified with sample vectors under a uniform
quadrature weight; since ``dx = dt`` for these operators the weights cancel
and ``C = W^T W``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GridMismatch, HorizonTooShort
from .system import WaveSystem, leapfrog


def _require_matched(sys: WaveSystem) -> None:
    if not sys.matched:
        raise GridMismatch(f"operators need dx = dt (cfl = 1), got cfl = {sys.cfl:.6g}")


def control_operator(sys: WaveSystem) -> np.ndarray:
    """``W[:, a-1] = u^{e_a}(x_j, T)`` for ``j = 0..N-1``, ``a = 1..N``."""
    _require_matched(sys)
    n = sys.nt
    f = np.zeros(n + 1)
    f[1] = 1.0
    u = leapfrog(sys.q, sys.dt, sys.dx, f)
    # u^{e_a}(T) = u^{e_1}(t_{N-a+1})
    rows = n - np.arange(1, n + 1) + 1
    return u[rows, :n].T.copy()


@dataclass(frozen=True)
class Connecting:
    c: np.ndarray
    asymmetry: float


def connecting_direct(w: np.ndarray) -> Connecting:
    """``C = W^T W``, symmetrized; the removed asymmetry is recorded."""
    c = w.T @ w
    asym = float(np.max(np.abs(c - c.T))) if c.size else 0.0
    return Connecting(c=0.5 * (c + c.T), asymmetry=asym)


@dataclass(frozen=True)
class Response:
    """Boundary traces for the spike controls on ``t_0..t_M``.

    ``neumann`` is the one-sided second-order ``u_x(0, t)``; ``first_node``
    is ``(u_1 - u_0)/dx``, the trace that pairs exactly with the scheme.
    Row ``n`` is time ``t_n``, column ``a - 1`` is control ``e_a``.
    """

    t: np.ndarray
    controls: np.ndarray
    neumann: np.ndarray
    first_node: np.ndarray
    dt: float

    @property
    def steps(self) -> int:
        return self.t.size - 1

    def apply(self, f) -> np.ndarray:
        """``(R f)(t_n)`` for a control sampled on ``t_0..t_N`` (``f[0] = 0``)."""
        f = np.asarray(f, dtype=float)
        n = self.controls.shape[1]
        if f.size != n + 1:
            raise GridMismatch(f"control has {f.size} samples, expected {n + 1}")
        return self.neumann @ f[1:]


def _shifted(trace: np.ndarray, n_controls: int) -> np.ndarray:
    steps = trace.size - 1
    out = np.zeros((steps + 1, n_controls))
    for a in range(1, n_controls + 1):
        out[a:, a - 1] = trace[1 : steps + 2 - a]
    return out


def response_operator(sys: WaveSystem, horizon: float | None = None) -> Response:
    """Responses up to ``horizon`` (default ``2T``) for the spike basis on ``[0, T]``.

    The space interval is extended so that reflections from the far end
    never return to ``x = 0`` before the horizon.
    """
    horizon = 2.0 * sys.T if horizon is None else horizon
    if horizon < sys.T - 1e-12:
        raise HorizonTooShort(f"horizon {horizon} is shorter than T = {sys.T}")
    steps = int(round(horizon / sys.dt))
    ext = sys.extended(0.5 * horizon + 3 * sys.dx)
    f = np.zeros(steps + 1)
    f[1] = 1.0
    u = leapfrog(ext.q, ext.dt, ext.dx, f)
    first = (u[:, 1] - u[:, 0]) / ext.dx
    neumann = (-3.0 * u[:, 0] + 4.0 * u[:, 1] - u[:, 2]) / (2.0 * ext.dx)
    n = sys.nt
    controls = np.zeros((steps + 1, n))
    controls[np.arange(1, n + 1), np.arange(n)] = 1.0
    return Response(
        t=np.arange(steps + 1) * sys.dt,
        controls=controls,
        neumann=_shifted(neumann, n),
        first_node=_shifted(first, n),
        dt=sys.dt,
    )


def connecting_from_response(resp: Response) -> Connecting:
    """``C`` from boundary data only, through the scheme's discrete Green identity.

    ``w[n, m] = (u^f(t_n), u^g(t_m))`` obeys a discrete 1+1 wave equation
    whose source is ``dt (f^n r_g^m - r_f^n g^m)``; summing the source over
    the backward characteristic cone of ``(N, N)`` gives ``w[N, N]``. The
    control value at ``t_N`` sits on the boundary node and enters once more
    through ``f^N g^N``. Needs responses on ``[0, 2T - 2 dt]``.
    """
    f = resp.controls
    r = resp.first_node
    n = f.shape[1]
    if resp.steps < 2 * n - 2:
        raise HorizonTooShort(f"need {2 * n - 2} response steps, have {resp.steps}")
    h = resp.dt
    c = np.zeros((n, n))
    for step in range(1, n):
        k = n - step
        ms = np.arange(n - k + 1, n + k, 2)
        c += h * (np.outer(f[step], r[ms].sum(axis=0)) - np.outer(r[step], f[ms].sum(axis=0)))
    c += np.outer(f[n], f[n])
    asym = float(np.max(np.abs(c - c.T)))
    return Connecting(c=0.5 * (c + c.T), asymmetry=asym)
