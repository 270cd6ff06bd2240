"""Scenario files and the forward / inverse pipelines built on them."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .._csv import csv_writer
from ..linops import spectral_norm
from .model import DEFAULT_CONTROLS, DEFAULT_FLOOR, DEFAULT_WIDTH, PotentialEstimate, extract_potential, model_from_factorization, unitary_equivalence_check
from .operators import connecting_direct, connecting_from_response, control_operator, response_operator
from .system import Potential, WaveSystem


@dataclass(frozen=True)
class Scenario:
    T: float = 1.0
    nt: int = 200
    nx: int | None = None
    cfl: float = 1.0
    potential: Potential = field(default_factory=Potential)
    horizon: float | None = None
    connecting: str = "direct"  # or "response"
    bound: float = 0.1
    zero_bound: float = 0.05
    controls: int = DEFAULT_CONTROLS
    width: float = DEFAULT_WIDTH
    floor: float = DEFAULT_FLOOR
    locality_T: float | None = None

    def __post_init__(self):
        if self.connecting not in ("direct", "response"):
            raise ValueError(f"connecting must be 'direct' or 'response', got {self.connecting!r}")
        if self.locality_T is not None and not 0 < self.locality_T < self.T:
            raise ValueError("locality_T must lie in (0, T)")

    def system(self, T: float | None = None) -> WaveSystem:
        T = self.T if T is None else T
        n = int(round(self.nt * T / self.T))
        X = None if self.nx is None else self.nx * (self.T / self.nt) / self.cfl
        return WaveSystem.build(T, n, self.potential, self.cfl, X)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["potential"] = self.potential.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Scenario":
        doc = dict(doc)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        if "potential" in doc:
            doc["potential"] = Potential.from_json(doc["potential"])
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.bound)

    def line(self) -> str:
        return f"{self.name}: {self.value:.6e} <= {self.bound:.3e} {'PASS' if self.passed else 'FAIL'}"


@dataclass
class ForwardReport:
    system: WaveSystem
    w: np.ndarray
    c: np.ndarray
    c_response: np.ndarray | None
    checks: list[Check]


def run_forward(scn: Scenario, T: float | None = None) -> ForwardReport:
    """Build ``W`` and ``C`` (plus ``C`` from responses) and check their consistency."""
    sys = scn.system(T)
    w = control_operator(sys)
    direct = connecting_direct(w)
    c = direct.c
    nc = spectral_norm(c)
    lam_min = float(np.linalg.eigvalsh(c)[0])
    checks = [
        Check("connecting_asymmetry", direct.asymmetry, 1e-8 * nc),
        Check("connecting_negativity", max(-lam_min, 0.0), 1e-8 * nc),
    ]
    c_resp = None
    if scn.connecting == "response" or T is None:
        resp = response_operator(sys, scn.horizon)
        c_resp = connecting_from_response(resp).c
        checks.append(Check("response_vs_direct", spectral_norm(c_resp - c) / nc, 0.05))
    return ForwardReport(system=sys, w=w, c=c, c_response=c_resp, checks=checks)


@dataclass
class InverseReport:
    t: np.ndarray
    q_true_mapped: np.ndarray
    estimate: PotentialEstimate
    error: float
    error_kind: str
    checks: list[Check]
    forward: ForwardReport

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def recovery_error(est: PotentialEstimate, q_true: np.ndarray) -> tuple[float, str]:
    m = est.mask
    scale = float(np.sqrt(np.sum(q_true[m] ** 2)))
    diff = est.q[m] - q_true[m]
    if scale == 0.0:
        return float(np.max(np.abs(diff))), "max_abs"
    return float(np.sqrt(np.sum(diff**2)) / scale), "relative_l2"


def run_inverse(scn: Scenario, T: float | None = None, with_locality: bool = True) -> InverseReport:
    fwd = run_forward(scn, T)
    sys = fwd.system
    c = fwd.c_response if scn.connecting == "response" else fwd.c
    model = model_from_factorization(c, sys.T, scn.controls, scn.width)
    est = extract_potential(model, scn.floor)
    q_true = scn.potential(sys.T - est.t)
    err, kind = recovery_error(est, q_true)
    fac = model.factorization
    eq = unitary_equivalence_check(fwd.w, model.v)
    checks = list(fwd.checks) + [
        Check("factor_residual", fac.residual, 1e-8),
        Check("factor_tri_defect", fac.tri_defect, 1e-6),
        Check("unitary_defect", eq.defect, 1e-4),
        Check("unitary_isometry", eq.unitarity, 1e-6),
        Check(f"recovery_{kind}", err, scn.zero_bound if kind == "max_abs" else scn.bound),
    ]
    report = InverseReport(t=est.t, q_true_mapped=q_true, estimate=est, error=err, error_kind=kind, checks=checks, forward=fwd)
    if with_locality and T is None and scn.locality_T is not None:
        diff = locality_defect(report, run_inverse(scn, scn.locality_T, with_locality=False))
        report.checks.append(Check("locality_overlap", diff, 2 * scn.bound))
    return report


def locality_defect(long: InverseReport, short: InverseReport) -> float:
    """Relative L2 gap of two recoveries on their common travel-time window ``x = T - t``."""
    dt = long.forward.system.dt
    x_long = np.rint((long.forward.system.T - long.t) / dt).astype(int)
    x_short = np.rint((short.forward.system.T - short.t) / dt).astype(int)
    where_long = {x: i for i, x in enumerate(x_long)}
    idx_long, idx_short = [], []
    for j, x in enumerate(x_short):
        i = where_long.get(int(x))
        if i is not None and long.estimate.mask[i] and short.estimate.mask[j]:
            idx_long.append(i)
            idx_short.append(j)
    if not idx_long:
        return float("inf")
    a = long.estimate.q[idx_long]
    b = short.estimate.q[idx_short]
    scale = float(np.linalg.norm(long.q_true_mapped[idx_long]))
    gap = float(np.linalg.norm(a - b))
    return gap / scale if scale > 0 else gap


def write_potential_csv(path, report: InverseReport, seed: int | None = None) -> None:
    est = report.estimate
    with csv_writer(path, seed) as out:
        out.writerow(["t", "q_true_mapped", "q_recovered", "mask"])
        for t, qt, qr, m in zip(report.t, report.q_true_mapped, est.q, est.mask):
            out.writerow([f"{t:.17g}", f"{qt:.17g}", "" if np.isnan(qr) else f"{qr:.17g}", int(m)])


def write_spectrum_csv(path, c: np.ndarray, seed: int | None = None) -> None:
    lam = np.linalg.eigvalsh(c)[::-1]
    with csv_writer(path, seed) as out:
        out.writerow(["index", "eigenvalue"])
        for i, v in enumerate(lam):
            out.writerow([i, f"{v:.17g}"])


def summary(checks: list[Check], **extra) -> dict:
    doc = dict(extra)
    doc["checks"] = [{"name": c.name, "value": c.value, "bound": c.bound, "pass": c.passed} for c in checks]
    doc["pass"] = all(c.passed for c in checks)
    return doc
