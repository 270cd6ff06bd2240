"""Command-line front end.

Exit status: 0 when every check passes, 1 on any FAIL, 2 on a configuration
error, 3 on a numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagonal import Partition, refinement_sweep, write_convergence_csv
from .dsbc.scenario import Check, Scenario, run_forward, run_inverse, summary, write_potential_csv, write_spectrum_csv
from .errors import NestFactError, NumericalError
from .factor import factor_finite, volterra_study, write_volterra_csv
from .linops import cholesky_upper, read_matrix, spectral_norm, write_matrix
from .nest import Nest, coordinate_nest, image_nest, load_nest

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    out: Path
    seed: int = 0
    matrix: Path | None = None
    nest: str = "coordinate"
    scenario: Path | None = None
    n: int | None = None
    tol: float | None = None
    checks: list[Check] = field(default_factory=list)


def _random_spd(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def _load_nest(spec: str, n: int) -> Nest:
    if spec in ("coordinate", "forward"):
        return coordinate_nest(n)
    if spec == "delayed":
        return coordinate_nest(n, "delayed")
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"--nest must be 'coordinate', 'delayed' or a nest JSON file, got {spec!r}")
    nest = load_nest(path)
    if nest.ambient_dim != n:
        raise ConfigError(f"nest dimension {nest.ambient_dim} does not match matrix dimension {n}")
    return nest


def _matrix(cfg: RunConfig, default_n: int) -> np.ndarray:
    if cfg.matrix is not None:
        if not cfg.matrix.is_file():
            raise ConfigError(f"matrix file not found: {cfg.matrix}")
        return read_matrix(cfg.matrix)
    return _random_spd(cfg.n or default_n, cfg.seed)


def cmd_factorize(cfg: RunConfig) -> dict:
    c = _matrix(cfg, 50)
    nest = _load_nest(cfg.nest, c.shape[0])
    res = factor_finite(c, nest)
    q = nest.basis
    oracle = cholesky_upper(q.T @ c @ q)
    gap = float(np.max(np.abs(q.T @ res.v @ q - oracle)))
    tol = cfg.tol if cfg.tol is not None else 1e-8
    cfg.checks += [
        Check("residual", res.residual, tol),
        Check("tri_defect", res.tri_defect, tol),
        Check("cholesky_gap", gap, tol),
    ]
    write_matrix(cfg.out / "V.txt", res.v)
    return {"dim": c.shape[0], "sign_convention": res.sign_convention}


def cmd_diagonal_sweep(cfg: RunConfig) -> dict:
    if cfg.matrix is not None:
        w = _matrix(cfg, 0)
    else:
        n = cfg.n or 64
        w = np.random.default_rng(cfg.seed).standard_normal((n, n))
    nest = _load_nest(cfg.nest, w.shape[1])
    strides, s = [], 1
    while s < nest.steps:
        strides.append(s)
        s *= 2
    schedule = [Partition.every(nest.params, k) for k in reversed(strides)]
    results = refinement_sweep(w, nest, schedule, image_nest(w, nest))
    norm_w = spectral_norm(w)
    tol = cfg.tol if cfg.tol is not None else 1e-9
    cfg.checks += [
        Check("norm_excess", max(r.norm_d for r in results) - norm_w, tol),
        Check("intertwine_defect", max(r.intertwine_defect for r in results), tol),
    ]
    write_convergence_csv(cfg.out / "convergence.csv", results, cfg.seed)
    return {"partitions": len(results), "norm_W": norm_w}


def cmd_volterra(cfg: RunConfig) -> dict:
    n = cfg.n or 200
    ns = sorted({m for m in (n // 4, n // 2, n) if m >= 16})
    if not ns:
        raise ConfigError("--n must be at least 16")
    reports = volterra_study(ns)
    last = reports[-1]
    worst_step = 0.0
    for a, b in zip(reports, reports[1:]):
        worst_step = max(worst_step, b.kernel_error - a.kernel_error, b.residual - a.residual)
    cfg.checks += [
        Check("residual", last.residual, cfg.tol if cfg.tol is not None else 0.05),
        Check("kernel_error", last.kernel_error, 0.1),
        Check("monotone_increase", worst_step, 0.0),
    ]
    write_volterra_csv(cfg.out / "volterra.csv", reports, cfg.seed)
    return {"n": ns}


def _scenario(cfg: RunConfig) -> Scenario:
    if cfg.scenario is None:
        raise ConfigError("--scenario is required")
    if not cfg.scenario.is_file():
        raise ConfigError(f"scenario file not found: {cfg.scenario}")
    try:
        scn = Scenario.load(cfg.scenario)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ConfigError(f"bad scenario {cfg.scenario}: {exc}") from exc
    if cfg.n is not None:
        scn = Scenario.from_json({**scn.to_json(), "nt": cfg.n})
    if cfg.tol is not None:
        scn = Scenario.from_json({**scn.to_json(), "bound": cfg.tol})
    return scn


def cmd_dsbc_forward(cfg: RunConfig) -> dict:
    scn = _scenario(cfg)
    fwd = run_forward(scn)
    cfg.checks += fwd.checks
    write_spectrum_csv(cfg.out / "connecting_spectrum.csv", fwd.c, cfg.seed)
    return {"scenario": scn.to_json()}


def cmd_dsbc_invert(cfg: RunConfig) -> dict:
    scn = _scenario(cfg)
    rep = run_inverse(scn)
    cfg.checks += rep.checks
    write_potential_csv(cfg.out / "potential.csv", rep, cfg.seed)
    return {"scenario": scn.to_json(), "error": rep.error, "error_kind": rep.error_kind}


COMMANDS = {
    "factorize": cmd_factorize,
    "diagonal-sweep": cmd_diagonal_sweep,
    "volterra": cmd_volterra,
    "dsbc-forward": cmd_dsbc_forward,
    "dsbc-invert": cmd_dsbc_invert,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nestfact", description="Nest-relative triangular factorization experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--scenario", type=Path, help="scenario JSON (dsbc-*)")
    p.add_argument("--matrix", type=Path, help="matrix text file: 'rows cols' header then rows")
    p.add_argument("--nest", default="coordinate", help="'coordinate', 'delayed' or a nest JSON file")
    p.add_argument("--n", type=int, help="problem size")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--tol", type=float, help="override the main check bound")
    p.add_argument("--seed", type=int, default=0, help="seed for generated inputs")
    return p


def run(cfg: RunConfig) -> int:
    stage = "setup"
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        stage = cfg.command
        extra = COMMANDS[cfg.command](cfg)
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"config error [{stage}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure [{stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NestFactError, ValueError) as exc:
        print(f"config error [{stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for check in cfg.checks:
        print(check.line())
    doc = summary(cfg.checks, command=cfg.command, seed=cfg.seed, **extra)
    (cfg.out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if doc["pass"] else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        out=args.out,
        seed=args.seed,
        matrix=args.matrix,
        nest=args.nest,
        scenario=args.scenario,
        n=args.n,
        tol=args.tol,
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
