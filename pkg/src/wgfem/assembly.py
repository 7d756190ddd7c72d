"""Global system for the skew-symmetrized weak Galerkin scheme.

The bilinear form assembled here is

    a_h(u, v) = (A grad_w u, grad_w v) + 1/2 (b . grad_w u, v0)
                - 1/2 (u0, b . grad_w v) + (c_b u0, v0),   c_b = c - div(b) / 2,

tested against the load ``(f, v0)``. Boundary trace dofs are eliminated with
the projected Dirichlet data.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .polyquad import default_quad_degree, element_points, element_weights, tri_quadrature
from .space import DirichletData, WeakSpace
from .weak_gradient import WeakGradientOperator

Field = Callable[[np.ndarray], np.ndarray]


class CoefficientError(ValueError):
    pass


def _zero(x):
    return np.zeros(x.shape[:-1])


def _zero_vec(x):
    return np.zeros(x.shape)


def _identity(x):
    return np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))


@dataclass(frozen=True)
class CoefficientSet:
    """Closed-form coefficient fields; each maps points (..., 2) to values.

    A -> (..., 2, 2), b -> (..., 2), div_b/c/f/g -> (...).
    """

    A: Field = _identity
    b: Field = _zero_vec
    div_b: Field = _zero
    c: Field = _zero
    f: Field = _zero
    g: Field = _zero
    convection: bool = True  # False means b is known to vanish identically

    def c_b(self, x):
        return self.c(x) - 0.5 * self.div_b(x)

    def check(self, x) -> float:
        """Validate ellipticity of A and c_b >= 0 at points x; return the observed a0."""
        Ax = np.asarray(self.A(x))
        sym_err = np.abs(Ax - np.swapaxes(Ax, -1, -2)).max(initial=0.0)
        if sym_err > 1e-12 * max(1.0, np.abs(Ax).max()):
            raise CoefficientError(f"diffusion tensor is not symmetric (max asymmetry {sym_err:.3e})")
        a0 = float(np.linalg.eigvalsh(Ax).min())
        if not a0 > 0:
            raise CoefficientError(f"diffusion tensor is not positive definite (min eigenvalue {a0:.3e})")
        cb = float(np.min(self.c_b(x)))
        if cb < -1e-12:
            raise CoefficientError(f"c - div(b)/2 is negative (min {cb:.3e})")
        return a0


@dataclass(eq=False)
class DiscreteSystem:
    matrix: sp.csr_matrix  # over free dofs
    rhs: np.ndarray
    space: WeakSpace
    free: np.ndarray  # global ids of the unknowns
    boundary_values: np.ndarray  # full-length vector holding the eliminated data
    a0: float
    full_matrix: sp.csr_matrix | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expand(self, x) -> np.ndarray:
        """Full coefficient vector from unknowns plus boundary data."""
        out = self.boundary_values.copy()
        out[self.free] = x
        return out

    def restrict(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs)[self.free]

    def export_coo(self, path) -> None:
        """Write ``row col value`` lines for the reduced matrix."""
        coo = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {self.dim} {self.dim} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {float(v)!r}\n")


def local_matrices(ops: WeakGradientOperator, coeffs: CoefficientSet,
                   quad_degree: int | None = None):
    """Element matrices (F, n_local, n_local) [test, trial], load vectors and observed a0."""
    space = ops.space
    mesh = space.mesh
    rule = tri_quadrature(quad_degree or default_quad_degree(space.k))
    x = element_points(mesh, rule, ops.elements)
    w = element_weights(mesh, rule, ops.elements)
    a0 = coeffs.check(x)

    G = ops.values_at(x)  # (F, q, 2, n)
    F, q, _, n = G.shape
    V0 = np.zeros((F, q, n))
    V0[..., :space.n_interior] = space.interior_basis.eval(x, ops.elements)

    AG = np.einsum("fqij,fqjn->fqin", coeffs.A(x), G)
    K = np.einsum("fq,fqim,fqin->fmn", w, G, AG)
    if coeffs.convection:
        bG = np.einsum("fqi,fqin->fqn", np.broadcast_to(coeffs.b(x), x.shape), G)
        half = 0.5 * np.einsum("fq,fqm,fqn->fmn", w, V0, bG)
        K += half - half.transpose(0, 2, 1)
    K += np.einsum("fq,fqm,fqn->fmn", w * coeffs.c_b(x), V0, V0)
    load = np.einsum("fq,fqm->fm", w * coeffs.f(x), V0)
    return K, load, a0


def assemble(space: WeakSpace, ops: WeakGradientOperator, coeffs: CoefficientSet,
             dirichlet: DirichletData, quad_degree: int | None = None,
             keep_full: bool = False) -> DiscreteSystem:
    if ops.space is not space:
        raise ValueError("operators were built for a different space")
    if len(ops.elements) != space.mesh.num_elements:
        raise ValueError("operators must cover every element")
    if not np.array_equal(np.sort(dirichlet.edges), space.mesh.boundary_edges):
        raise ValueError("Dirichlet data must cover exactly the boundary edges")
    K, load, a0 = local_matrices(ops, coeffs, quad_degree)
    l2g = space.local_to_global
    n = space.num_dofs
    rows = np.repeat(l2g, l2g.shape[1], axis=1).ravel()
    cols = np.tile(l2g, (1, l2g.shape[1])).ravel()
    full = sp.csr_matrix((K.ravel(), (rows, cols)), shape=(n, n))
    full.sum_duplicates()
    full.sort_indices()
    b_full = np.bincount(l2g.ravel(), weights=load.ravel(), minlength=n)

    g = dirichlet.scatter(space)
    free = space.free_dofs
    A_ff = full[free][:, free].tocsr()
    A_ff.sort_indices()
    rhs = b_full[free] - full[free][:, space.boundary_dofs] @ g[space.boundary_dofs]
    return DiscreteSystem(A_ff, rhs, space, free, g, a0, full if keep_full else None)


def quadratic_form(system: DiscreteSystem, v) -> float:
    v = np.asarray(v, dtype=float)
    if v.shape != (system.dim,):
        raise ValueError(f"expected a vector of length {system.dim}, got shape {v.shape}")
    return float(v @ (system.matrix @ v))


def weak_gradient_norm_sq(ops: WeakGradientOperator, coeffs_full) -> float:
    """||grad_w v||_h^2 from the local mass matrices (exact, no quadrature)."""
    from .weak_gradient import apply

    V = apply(ops, ops.space.local(coeffs_full))
    return float(np.einsum("fi,fij,fj->", V, ops.M, V))


def interior_norm_sq(space: WeakSpace, coeffs_full) -> float:
    """||v0||^2 via per-element Gram matrices of the interior basis."""
    mesh = space.mesh
    rule = tri_quadrature(2 * space.k)
    x = element_points(mesh, rule)
    w = element_weights(mesh, rule)
    phi = space.interior_basis.eval(x)
    G = np.einsum("fq,fqi,fqj->fij", w, phi, phi)
    c = np.asarray(coeffs_full)[space.element_dofs]
    return float(np.einsum("fi,fij,fj->", c, G, c))
