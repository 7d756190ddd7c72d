"""Mesh-series convergence studies for the built-in problems."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .assembly import assemble
from .error_analysis import (ConvergenceReport, ErrorRecord, error_h1w, error_l2, error_linf,
                             error_superclose)
from .mesh import DEFAULT_DIAGONAL, DIAGONALS, Mesh, mesh_series
from .problems import PROBLEMS, ProblemSpec, get_problem
from .solver import DEFAULT_TOL, solve
from .space import SUPPORTED_K, WeakFunction, WeakSpace, project_boundary
from .weak_gradient import build_operators

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "table1"
    k: int = 0
    n: int = 4
    levels: int = 5
    tol: float = DEFAULT_TOL
    max_iter: int = 20000
    format: str = "table"
    out: str | None = None
    threads: int = 1
    diagonal: str = DEFAULT_DIAGONAL

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.k not in SUPPORTED_K:
            raise ConfigError(f"k must be one of {SUPPORTED_K}")
        if self.n < 1 or self.levels < 1:
            raise ConfigError("n and levels must be >= 1")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("tol must be positive and max_iter >= 1")
        if self.format not in ("table", "csv"):
            raise ConfigError("format must be 'table' or 'csv'")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.diagonal not in DIAGONALS:
            raise ConfigError(f"diagonal must be one of {DIAGONALS}")
        return self


@dataclass
class LevelSolution:
    mesh: Mesh
    space: WeakSpace
    ops: object
    uh: WeakFunction
    report: object


def solve_level(problem: ProblemSpec, mesh: Mesh, k: int, tol: float = DEFAULT_TOL,
                max_iter: int = 20000) -> LevelSolution:
    space = WeakSpace(mesh, k)
    ops = build_operators(space)
    system = assemble(space, ops, problem.coeffs, project_boundary(space, problem.coeffs.g))
    x, report = solve(system, tol=tol, max_iter=max_iter)
    return LevelSolution(mesh, space, ops, WeakFunction(space, system.expand(x)), report)


def measure(problem: ProblemSpec, sol: LevelSolution) -> ErrorRecord:
    uh = sol.uh
    return ErrorRecord(
        level=sol.mesh.level, h=sol.mesh.h,
        err_h1w=error_h1w(problem.grad_u, uh, sol.ops),
        err_l2=error_l2(problem.u, uh),
        err_linf=error_linf(problem.u, uh),
        err_superclose=error_superclose(problem.u, uh),
        n=sol.mesh.n,
    )


def run_convergence(config: RunConfig) -> ConvergenceReport:
    """Solve on n, 2n, ... and collect errors; SolverError propagates on any failed level."""
    config.validate()
    problem = get_problem(config.problem)
    if problem.u is None or problem.grad_u is None:
        raise ConfigError(f"problem {problem.name!r} has no exact solution")
    report = ConvergenceReport(problem=problem.name, k=config.k)
    for mesh in mesh_series(config.n, config.levels, problem.domain, config.diagonal):
        sol = solve_level(problem, mesh, config.k, config.tol, config.max_iter)
        rec = measure(problem, sol)
        log.info("level %d n=%s dofs=%d %s it=%d res=%.2e", mesh.level, mesh.n,
                 sol.space.num_dofs, sol.report.method, sol.report.iterations, sol.report.residual)
        report.records.append(rec)
    return report
