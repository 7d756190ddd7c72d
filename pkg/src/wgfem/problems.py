"""Built-in manufactured problems on the unit square."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .assembly import CoefficientSet
from .mesh import UNIT_SQUARE, Rectangle

PI = np.pi


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    coeffs: CoefficientSet
    u: Callable | None = None
    grad_u: Callable | None = None
    domain: Rectangle = UNIT_SQUARE
    description: str = ""
    # Hessian of u, only used to spot-check f against the strong form
    hess_u: Callable | None = None
    grad_A: Callable | None = None  # (..., 2, 2, 2): d A_ij / d x_l

    def pde_residual(self, x) -> np.ndarray:
        """f - (-div(A grad u) + b . grad u + c u) at points x; needs hess_u."""
        x = np.asarray(x, dtype=float)
        c = self.coeffs
        A = np.broadcast_to(c.A(x), x.shape[:-1] + (2, 2))
        gu = self.grad_u(x)
        H = self.hess_u(x)
        div_Agu = np.einsum("...ij,...ij->...", A, H)
        if self.grad_A is not None:
            # sum_i sum_j d_i A_ij d_j u
            div_Agu = div_Agu + np.einsum("...iji,...j->...", self.grad_A(x), gu)
        lhs = -div_Agu + np.einsum("...i,...i->...", np.broadcast_to(c.b(x), x.shape), gu) + c.c(x) * self.u(x)
        return c.f(x) - lhs


def _u(x):
    return np.sin(PI * x[..., 0]) * np.sin(PI * x[..., 1])


def _grad_u(x):
    s1, s2 = np.sin(PI * x[..., 0]), np.sin(PI * x[..., 1])
    c1, c2 = np.cos(PI * x[..., 0]), np.cos(PI * x[..., 1])
    return np.stack((PI * c1 * s2, PI * s1 * c2), axis=-1)


def _hess_u(x):
    s1, s2 = np.sin(PI * x[..., 0]), np.sin(PI * x[..., 1])
    c1, c2 = np.cos(PI * x[..., 0]), np.cos(PI * x[..., 1])
    uxx = -PI**2 * s1 * s2
    uxy = PI**2 * c1 * c2
    return np.stack((np.stack((uxx, uxy), -1), np.stack((uxy, uxx), -1)), -2)


def _A_table(x):
    a = 1.0 + x[..., 0] * x[..., 1]
    return a[..., None, None] * np.eye(2)


def _grad_A_table(x):
    out = np.zeros(x.shape[:-1] + (2, 2, 2))
    for i in range(2):
        out[..., i, i, 0] = x[..., 1]
        out[..., i, i, 1] = x[..., 0]
    return out


def _f_table1(x):
    x1, x2 = x[..., 0], x[..., 1]
    u = _u(x)
    g = _grad_u(x)
    ux1, ux2 = g[..., 0], g[..., 1]
    return (2 * PI**2 * (1 + x1 * x2) * u - (x2 * ux1 + x1 * ux2)
            + (ux1 + 2 * ux2) + np.sin(x1 * x2) * u)


def _f_table2(x):
    x1, x2 = x[..., 0], x[..., 1]
    g = _grad_u(x)
    return 2 * PI**2 * (1 + x1 * x2) * _u(x) - (x2 * g[..., 0] + x1 * g[..., 1])


def _zero(x):
    return np.zeros(x.shape[:-1])


TABLE1 = ProblemSpec(
    name="table1",
    coeffs=CoefficientSet(
        A=_A_table,
        b=lambda x: np.broadcast_to(np.array([1.0, 2.0]), x.shape),
        div_b=_zero,
        c=lambda x: np.sin(x[..., 0] * x[..., 1]),
        f=_f_table1,
        g=_zero,
    ),
    u=_u, grad_u=_grad_u, hess_u=_hess_u, grad_A=_grad_A_table,
    description="A=(1+x1 x2)I, b=(1,2), c=sin(x1 x2), u=sin(pi x1) sin(pi x2)",
)

TABLE2 = ProblemSpec(
    name="table2",
    coeffs=CoefficientSet(A=_A_table, f=_f_table2, g=_zero, convection=False),
    u=_u, grad_u=_grad_u, hess_u=_hess_u, grad_A=_grad_A_table,
    description="as table1 with b=0, c=0",
)


def _u_lin(x):
    return x[..., 0] + 2 * x[..., 1] - 3


POLY_EXACT = ProblemSpec(
    name="poly-exact",
    coeffs=CoefficientSet(f=_zero, g=_u_lin, convection=False),
    u=_u_lin,
    grad_u=lambda x: np.broadcast_to(np.array([1.0, 2.0]), x.shape).copy(),
    hess_u=lambda x: np.zeros(x.shape[:-1] + (2, 2)),
    description="A=I, b=0, c=0, u=x1 + 2 x2 - 3",
)

PROBLEMS = {p.name: p for p in (TABLE1, TABLE2, POLY_EXACT)}


def builtin_problems() -> list[ProblemSpec]:
    return list(PROBLEMS.values())


def get_problem(name: str) -> ProblemSpec:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def with_coeffs(problem: ProblemSpec, **changes) -> ProblemSpec:
    return replace(problem, coeffs=replace(problem.coeffs, **changes))
