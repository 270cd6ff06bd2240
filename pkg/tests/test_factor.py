from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_spd
from nestfact.diagonal import Partition
from nestfact.errors import DiagonalCollapse, NotPositiveDefinite
from nestfact.factor import (
    CorrectedDiagonalSpec,
    central_difference,
    corrected_factor,
    factor_continual,
    factor_finite,
    min_kernel,
    volterra_demo,
    volterra_exact,
    volterra_study,
    write_volterra_csv,
)
from nestfact.linops import cholesky_upper
from nestfact.nest import Nest, coordinate_nest


def smooth_perturbation(n: int) -> np.ndarray:
    t = np.arange(1, n + 1) / n
    return (0.8 * np.outer(np.sin(np.pi * t), np.sin(np.pi * t)) + 0.5 * np.outer(t, t)) / n


def random_flag(rng, n: int) -> Nest:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Nest(params=np.linspace(0, 1, n + 1), basis=q, ranks=np.arange(n + 1))


def test_identity_and_diagonal():
    assert np.allclose(factor_finite(np.eye(4), coordinate_nest(4)).v, np.eye(4))
    assert np.allclose(factor_finite(np.diag([4.0, 9.0]), coordinate_nest(2)).v, np.diag([2.0, 3.0]))


def test_random_50_matches_cholesky(rng):
    c = random_spd(rng, 50)
    r = factor_finite(c, coordinate_nest(50))
    assert np.max(np.abs(r.v - cholesky_upper(c))) <= 1e-8
    assert r.sign_convention


@given(st.integers(2, 14), st.integers(0, 2**31 - 1))
def test_arbitrary_flag_matches_cholesky_in_nest_coordinates(n, seed):
    rng = np.random.default_rng(seed)
    c = random_spd(rng, n)
    f = random_flag(rng, n)
    r = factor_finite(c, f)
    q = f.basis
    assert np.max(np.abs(q.T @ r.v @ q - cholesky_upper(q.T @ c @ q))) <= 1e-8
    assert np.all(np.diag(q.T @ r.v @ q) > 0)
    assert r.residual <= 1e-8 and r.tri_defect <= 1e-8
    assert np.max(np.abs(r.phi_star.T @ r.phi_star - np.eye(n))) <= 1e-8


def test_delayed_nest_is_lower_triangular_cholesky(rng):
    c = random_spd(rng, 9)
    r = factor_finite(c, coordinate_nest(9, "delayed"))
    j = np.eye(9)[::-1]
    assert np.allclose(r.v, j @ cholesky_upper(j @ c @ j) @ j, atol=1e-10)
    assert np.allclose(np.triu(r.v, 1), 0.0, atol=1e-12)


def test_gauge_covariance(rng):
    c = random_spd(rng, 8)
    r = factor_finite(c, coordinate_nest(8))
    for _ in range(5):
        signs = np.diag(rng.choice([-1.0, 1.0], 8))
        v2 = signs @ r.v
        assert np.linalg.norm(v2.T @ v2 - c, 2) <= 1e-10 * np.linalg.norm(c, 2)
        assert np.allclose(np.tril(v2, -1), 0.0, atol=1e-12)


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        factor_finite(np.diag([1.0, 0.0]), coordinate_nest(2))


def test_continual_identity():
    f = coordinate_nest(10)
    r = factor_continual(np.eye(10), f, Partition.full(f.params))
    assert np.allclose(r.v, np.eye(10))


@pytest.mark.parametrize("n, stride", [(16, 1), (64, 1), (64, 4), (200, 1), (200, 5)])
def test_continual_identity_plus_low_rank(n, stride):
    c = np.eye(n) + smooth_perturbation(n)
    f = coordinate_nest(n)
    r = factor_continual(c, f, Partition.every(f.params, stride))
    assert r.residual <= 1e-6 and r.tri_defect <= 1e-6
    assert r.sign_convention == (stride == 1)


def test_continual_isometry_onto_range():
    n = 40
    c = np.eye(n) + smooth_perturbation(n)
    f = coordinate_nest(n)
    r = factor_continual(c, f, Partition.full(f.params))
    assert np.max(np.abs(r.phi_star.T @ r.phi_star - np.eye(n))) <= 1e-8


@pytest.mark.parametrize("n", [16, 64, 200])
def test_min_kernel_collapses(n):
    f = coordinate_nest(n)
    with pytest.raises(DiagonalCollapse):
        factor_continual(min_kernel(n), f, Partition.full(f.params))


def test_explicit_tolerance_overrides_collapse():
    f = coordinate_nest(32)
    r = factor_continual(min_kernel(32), f, Partition.full(f.params), tol=0.0)
    assert r.residual <= 1e-8


def test_central_difference_rows():
    spec = central_difference(8, 0.125)
    x = np.linspace(0.125, 1, 8)
    assert np.allclose(spec.derivative @ np.ones(8), 0.0)
    assert np.allclose(spec.derivative @ x, 1.0)
    assert np.allclose(spec.derivative @ x**2, 2 * x)


def test_spec_rejects_bad_derivative():
    with pytest.raises(ValueError):
        CorrectedDiagonalSpec(np.eye(4))


def test_corrected_identity_contracts():
    n = 32
    f = coordinate_nest(n)
    r = corrected_factor(np.eye(n), f, central_difference(n, 1 / n), Partition.full(f.params))
    assert r.residual >= 0 and r.tri_defect >= 0
    assert r.tri_defect <= 1e-8


def test_exact_volterra_factor_sanity():
    for n in (20, 40, 80):
        v = volterra_exact(n)
        assert np.max(np.abs(v.T @ v - min_kernel(n))) <= 1e-14


def test_corrected_min_kernel_n100():
    n = 100
    f = coordinate_nest(n)
    r = corrected_factor(min_kernel(n), f, central_difference(n, 1 / n), Partition.full(f.params))
    assert r.residual <= 0.05


def test_volterra_trend():
    reps = volterra_study((50, 100, 200))
    errs = [r.kernel_error for r in reps]
    res = [r.residual for r in reps]
    assert errs[-1] <= 0.1 and res[-1] <= 0.05
    assert errs[0] > errs[1] > errs[2] and res[0] > res[1] > res[2]
    # first order: doubling n roughly halves the error
    for a, b in zip(errs, errs[1:]):
        assert 1.7 <= a / b <= 2.3


def test_volterra_small_n_rejected():
    with pytest.raises(ValueError):
        volterra_demo(8)


def test_volterra_csv(tmp_path):
    reps = volterra_study((16, 32))
    write_volterra_csv(tmp_path / "v.csv", reps)
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "n,kernel_error,residual,tri_defect"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["16", "32"]
