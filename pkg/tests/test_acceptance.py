"""Acceptance criteria 1-11: one PASS/FAIL line each.

Run with pytest (lines are repeated in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import ACCEPTANCE_LINES, random_spd  # noqa: E402
from nestfact.diagonal import Partition, finite_diagonal, intertwining_check, orthogonalizer, partition_diagonal  # noqa: E402
from nestfact.dsbc.model import extract_potential, model_from_factorization, unitary_equivalence_check  # noqa: E402
from nestfact.dsbc.operators import connecting_direct, control_operator  # noqa: E402
from nestfact.dsbc.scenario import Scenario, run_inverse  # noqa: E402
from nestfact.dsbc.system import Potential, WaveSystem  # noqa: E402
from nestfact.factor import factor_continual, factor_finite, volterra_study  # noqa: E402
from nestfact.linops import cholesky_upper, polar_adjoint  # noqa: E402
from nestfact.nest import Nest, continuity_scan, coordinate_nest, image_nest  # noqa: E402

SEED = 20261017
BUMP = Potential("bump", {"height": 1.0, "center": 0.4, "width": 0.1})


def measure(value: float, bound: float, label: str) -> tuple[bool, str]:
    ok = bool(np.isfinite(value) and value <= bound)
    return ok, f"{label} {value:.3e} <= {bound:.1e}"


def report(number: int, name: str, parts: list[tuple[bool, str]]) -> bool:
    ok = all(p for p, _ in parts)
    line = f"criterion {number}: {name}: " + "; ".join(s for _, s in parts) + (" PASS" if ok else " FAIL")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def random_flag(rng, n: int) -> Nest:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Nest(params=np.linspace(0, 1, n + 1), basis=q, ranks=np.arange(n + 1))


def smooth_perturbation(n: int) -> np.ndarray:
    t = np.arange(1, n + 1) / n
    return (0.8 * np.outer(np.sin(np.pi * t), np.sin(np.pi * t)) + 0.5 * np.outer(t, t)) / n


def criterion_1() -> bool:
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 51))
        c = random_spd(rng, n)
        v = factor_finite(c, coordinate_nest(n)).v
        worst = max(worst, float(np.max(np.abs(v - cholesky_upper(c)))))
    elapsed = time.perf_counter() - start
    return report(1, "cholesky equivalence (100 SPD, n in 2..50)", [
        measure(worst, 1e-8, "max entry gap"),
        measure(elapsed, 10.0, "runtime s"),
    ])


def criterion_2() -> bool:
    rng = np.random.default_rng(SEED + 2)
    res = tri = 0.0
    for _ in range(40):
        n = int(rng.integers(2, 31))
        c = random_spd(rng, n)
        for f in (coordinate_nest(n), coordinate_nest(n, "delayed"), random_flag(rng, n)):
            r = factor_finite(c, f)
            res, tri = max(res, r.residual), max(tri, r.tri_defect)
    c_res = c_tri = 0.0
    for n, stride in ((64, 1), (200, 1), (200, 5)):
        f = coordinate_nest(n)
        r = factor_continual(np.eye(n) + smooth_perturbation(n), f, Partition.every(f.params, stride))
        c_res, c_tri = max(c_res, r.residual), max(c_tri, r.tri_defect)
    return report(2, "factorization identity and triangularity", [
        measure(res, 1e-8, "finite residual"),
        measure(tri, 1e-8, "finite tri_defect"),
        measure(c_res, 1e-6, "continual residual"),
        measure(c_tri, 1e-6, "continual tri_defect"),
    ])


def criterion_3() -> bool:
    rng = np.random.default_rng(SEED + 3)
    worst = -np.inf
    for _ in range(500):
        n = int(rng.integers(2, 17))
        w = rng.standard_normal((n, n)) * rng.uniform(0.1, 10)
        f = random_flag(rng, n)
        r = partition_diagonal(w, f, image_nest(w, f), Partition.every(f.params, int(rng.integers(1, n + 1))))
        worst = max(worst, r.norm_d - float(np.linalg.norm(w, 2)))
    return report(3, "diagonal norm bound (500 trials)", [measure(worst, 1e-9, "max ||D|| - ||W||")])


def criterion_4() -> bool:
    rng = np.random.default_rng(SEED + 4)
    worst = -np.inf
    for _ in range(500):
        n = int(rng.integers(2, 17))
        phi, psi = rng.standard_normal(n), rng.standard_normal(n)
        f = random_flag(rng, n)
        xi = Partition.every(f.params, int(rng.integers(1, n + 1)))
        w = np.outer(psi, phi)
        r = partition_diagonal(w, f, image_nest(w, f), xi)
        delta = max(float(np.sum((f.increment(a, b).T @ phi) ** 2)) for a, b in zip(xi.indices[:-1], xi.indices[1:]))
        worst = max(worst, r.norm_d - np.sqrt(delta) * float(np.linalg.norm(psi)))
    # continuum-normalized rank-one operator on a fine grid, meshes halved
    n = 512
    t = np.arange(1, n + 1) / n
    w = np.outer(np.cos(3 * t), np.exp(-t)) / n
    f = coordinate_nest(n)
    h = image_nest(w, f)
    strides = np.array([256, 128, 64, 32, 16, 8, 4, 2, 1])
    norms = [partition_diagonal(w, f, h, Partition.every(f.params, int(s))).norm_d for s in strides]
    steps = [b / a for a, b in zip(norms, norms[1:])]
    # ||D|| ~ sqrt(range): exponent 1/2 in the partition range
    rate = float(np.polyfit(np.log(strides / n), np.log(norms), 1)[0])
    return report(4, "rank-one decay bound", [
        measure(worst, 1e-12, "max ||D|| - sqrt(delta)||psi|| (500 trials)"),
        measure(max(steps), 1.0 - 1e-3, "largest halving ratio"),
        measure(abs(rate - 0.5), 0.1, "|decay exponent - 1/2|"),
        measure(norms[-1] / norms[0], 0.1, "final/initial"),
    ])


def criterion_5() -> bool:
    rng = np.random.default_rng(SEED + 5)
    inter = iso = proj = adj = 0.0
    for _ in range(30):
        n = int(rng.integers(2, 13))
        w = rng.standard_normal((n, n))
        f = random_flag(rng, n) if rng.random() < 0.5 else coordinate_nest(n)
        r = finite_diagonal(w, f)
        inter = max(inter, intertwining_check(r.d, f.projections(), r.image.projections()), r.intertwine_defect)
        o = orthogonalizer(r)
        iso = max(iso, float(np.max(np.abs(o.psi.T @ o.psi - np.eye(n)))))
        proj = max(proj, float(np.max(np.abs(o.psi @ o.psi.T - r.image.projection(r.image.steps)))))
        adj = max(adj, float(np.max(np.abs(o.psi.T - polar_adjoint(r.d).phi))))
    return report(5, "intertwining and orthogonalizer identities", [
        measure(inter, 1e-9, "max ||P D - D X||"),
        measure(iso, 1e-8, "Psi^T Psi - I"),
        measure(proj, 1e-8, "Psi Psi^T - P_T"),
        measure(adj, 1e-8, "Psi^T - Phi*"),
    ])


def criterion_6() -> bool:
    rng = np.random.default_rng(SEED + 6)
    n = 200
    t = np.arange(1, n + 1) / n
    f = coordinate_nest(n)
    w = np.outer(rng.standard_normal(n), (t > 0.5).astype(float))
    rep = continuity_scan(image_nest(w, f).projections(), f)
    sigma = rep.detected_sigma
    miss = abs(sigma - 0.5) if sigma is not None else np.inf
    left = 0
    for smooth in (np.eye(n) + smooth_perturbation(n), np.triu(np.ones((n, n))) / n + np.eye(n)):
        left += len(continuity_scan(image_nest(smooth, f).projections(), f).left_breaks)
    return report(6, "break detection", [
        measure(miss, 1.0 / n, "|sigma - 0.5|"),
        measure(float(left), 0.0, "left-break flags on injective smooth W"),
    ])


def criterion_7() -> bool:
    start = time.perf_counter()
    reports = volterra_study([50, 100, 200])
    elapsed = time.perf_counter() - start
    last = reports[-1]
    rise = max(max(b.kernel_error - a.kernel_error, b.residual - a.residual) for a, b in zip(reports, reports[1:]))
    return report(7, "Volterra demo", [
        measure(last.kernel_error, 0.1, "kernel error n=200"),
        measure(last.residual, 0.05, "residual n=200"),
        measure(rise, 0.0, "largest increase over n=50,100,200"),
        measure(elapsed, 60.0, "runtime s"),
    ])


def criterion_8() -> bool:
    sys_ = WaveSystem.build(1.0, 200, Potential("zero"))
    c = connecting_direct(control_operator(sys_)).c
    m = model_from_factorization(c, 1.0)
    est = extract_potential(m)
    n = c.shape[0]
    return report(8, "DSBC q = 0 (n=200)", [
        measure(float(np.linalg.norm(c - np.eye(n), 2)), 0.05, "||C - I||"),
        measure(float(np.linalg.norm(m.v - np.eye(n), 2)), 0.05, "||V - I||"),
        measure(float(np.max(np.abs(est.q[est.mask]))), 0.05, "max |q~| on mask"),
    ])


_BUMP_400: dict = {}


def bump_400():
    if not _BUMP_400:
        start = time.perf_counter()
        rep = run_inverse(Scenario(T=1.0, nt=400, potential=BUMP, bound=0.1, locality_T=0.7))
        _BUMP_400["report"] = rep
        _BUMP_400["elapsed"] = time.perf_counter() - start
    return _BUMP_400["report"], _BUMP_400["elapsed"]


def criterion_9() -> bool:
    rep, elapsed = bump_400()
    checks = {c.name: c for c in rep.checks}
    return report(9, "DSBC bump recovery (n=400, height 1)", [
        measure(rep.error, 0.1, "relative L2 on mask"),
        measure(checks["locality_overlap"].value, 0.2, "locality gap"),
        measure(elapsed, 120.0, "runtime s"),
    ])


def criterion_10() -> bool:
    rep, _ = bump_400()
    value = {c.name: c for c in rep.checks}["response_vs_direct"].value
    return report(10, "response-path consistency (bump, n=400)", [measure(value, 0.05, "||C_R - C|| / ||C||")])


def criterion_11() -> bool:
    sys_ = WaveSystem.build(1.0, 200, BUMP)
    w = control_operator(sys_)
    m = model_from_factorization(connecting_direct(w).c, 1.0)
    eq = unitary_equivalence_check(w, m.v)
    return report(11, "unitary equivalence (bump, n=200)", [
        measure(eq.defect, 1e-4, "||W - UV|| / ||W||"),
        measure(eq.unitarity, 1e-6, "||U^T U - I||"),
    ])


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 12)])
def test_acceptance(criterion):
    assert criterion()


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
