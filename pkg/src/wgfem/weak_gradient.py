"""Discrete weak gradient into [P_{k+1}(K)]^2, one small SPD solve per element.

For each element the local matrices are

    M[i, j] = (phi_j, phi_i)_K                    vector mass, 2 N_r x 2 N_r
    A[i, j] = -(v0_j, div phi_i)_K                interior coupling
    B_l[i, j] = (psi_j, phi_i . n_K)_{e_l}        trace coupling per local edge

and the coefficient vector of the weak gradient is ``M^{-1}(A V0 + sum_l B_l V_l)``.
Vector basis function i < N_r is ``(phi_i, 0)``, the rest are ``(0, phi_{i-N_r})``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyquad import (DegenerateElementError, edge_basis, edge_quadrature, element_points,
                       element_weights, tri_quadrature)
from .space import WeakSpace


@dataclass(frozen=True, eq=False)
class WeakGradientOperator:
    """Batched local operators for the elements listed in ``elements``."""

    space: WeakSpace
    elements: np.ndarray
    M: np.ndarray  # (F, 2Nr, 2Nr)
    A: np.ndarray  # (F, 2Nr, Nk)
    B: np.ndarray  # (F, 3, 2Nr, k+2)
    D: np.ndarray  # (F, 2Nr, n_local), the solved map local dofs -> gradient coefficients

    @property
    def n_grad(self) -> int:
        return self.space.gradient_basis.dim

    def stacked(self) -> np.ndarray:
        """[A | B_0 | B_1 | B_2] per element, shape (F, 2Nr, n_local)."""
        F = len(self.elements)
        return np.concatenate((self.A, self.B.transpose(0, 2, 1, 3).reshape(F, self.M.shape[1], -1)),
                              axis=2)

    def values_at(self, x) -> np.ndarray:
        """Gradient of each local basis weak function at points x of shape (F, q, 2).

        Returns (F, q, 2, n_local).
        """
        phi = self.space.gradient_basis.eval(x, self.elements)  # (F, q, Nr)
        nr = self.n_grad
        gx = np.einsum("fqi,fij->fqj", phi, self.D[:, :nr])
        gy = np.einsum("fqi,fij->fqj", phi, self.D[:, nr:])
        return np.stack((gx, gy), axis=2)


def build_operators(space: WeakSpace, elements=None, signs=None) -> WeakGradientOperator:
    """Assemble and solve the local weak-gradient systems.

    ``signs`` overrides the mesh's per-element edge signs (debug hook for
    mutation checks); by default ``mesh.element_edge_signs`` is used.
    """
    mesh = space.mesh
    elements = np.arange(mesh.num_elements) if elements is None else np.atleast_1d(elements)
    if signs is None:
        signs = mesh.element_edge_signs
    signs = np.asarray(signs)[elements]
    r, k = space.r, space.k
    gb, ib = space.gradient_basis, space.interior_basis
    nr, nk, ne = gb.dim, ib.dim, space.n_edge
    F = len(elements)

    rule = tri_quadrature(2 * r)
    x = element_points(mesh, rule, elements)
    w = element_weights(mesh, rule, elements)
    phi = gb.eval(x, elements)
    dphi = gb.grad(x, elements)
    v0 = ib.eval(x, elements)

    G = np.einsum("fq,fqi,fqj->fij", w, phi, phi)
    M = np.zeros((F, 2 * nr, 2 * nr))
    M[:, :nr, :nr] = G
    M[:, nr:, nr:] = G
    A = -np.concatenate((np.einsum("fq,fqi,fqj->fij", w, dphi[..., 0], v0),
                         np.einsum("fq,fqi,fqj->fij", w, dphi[..., 1], v0)), axis=1)

    erule = edge_quadrature(2 * r)
    psi = edge_basis(r, erule.points)  # (q, k+2)
    B = np.empty((F, 3, 2 * nr, ne))
    for l in range(3):
        e = mesh.element_edges[elements, l]
        a = mesh.vertices[mesh.edges[e, 0]]
        b = mesh.vertices[mesh.edges[e, 1]]
        xe = a[:, None, :] + erule.points[None, :, None] * (b - a)[:, None, :]
        we = mesh.edge_lengths[e][:, None] * erule.weights[None, :]
        n = signs[:, l, None] * mesh.edge_normals[e]
        phie = gb.eval(xe, elements)  # (F, q, Nr)
        base = np.einsum("fq,fqi,qj->fij", we, phie, psi)
        B[:, l, :nr] = base * n[:, 0, None, None]
        B[:, l, nr:] = base * n[:, 1, None, None]

    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise DegenerateElementError("weak-gradient mass matrix is not SPD") from exc
    rhs = np.concatenate((A, B.transpose(0, 2, 1, 3).reshape(F, 2 * nr, 3 * ne)), axis=2)
    D = np.linalg.solve(M, rhs)
    for arr in (M, A, B, D):
        arr.setflags(write=False)
    return WeakGradientOperator(space, elements, M, A, B, D)


def build_operator(space: WeakSpace, element: int) -> WeakGradientOperator:
    return build_operators(space, elements=[element])


def apply(op: WeakGradientOperator, v_local) -> np.ndarray:
    """Gradient coefficients from local dof blocks of shape (F, n_local) or (n_local,)."""
    v_local = np.asarray(v_local, dtype=float)
    if v_local.shape[-1] != op.D.shape[2]:
        raise ValueError(f"expected {op.D.shape[2]} local coefficients, got {v_local.shape[-1]}")
    if v_local.ndim == 1:
        if len(op.elements) != 1:
            raise ValueError("1-D input needs a single-element operator")
        return op.D[0] @ v_local
    return np.einsum("fij,fj->fi", op.D, v_local)


def weak_gradient_at(op: WeakGradientOperator, v_local, x) -> np.ndarray:
    """Evaluate the weak gradient of local data at points x (F, q, 2); returns (F, q, 2)."""
    V = apply(op, v_local).reshape(len(op.elements), -1)
    phi = op.space.gradient_basis.eval(x, op.elements)
    nr = op.n_grad
    return np.stack((np.einsum("fqi,fi->fq", phi, V[:, :nr]),
                     np.einsum("fqi,fi->fq", phi, V[:, nr:])), axis=-1)


def kernel_check(op: WeakGradientOperator, v_local, tol: float = 1e-12) -> bool:
    """True iff the weak gradient of ``v_local`` vanishes on every element of ``op``."""
    V = apply(op, v_local).reshape(len(op.elements), -1)
    # coefficient size measured in the element's mass norm
    norms = np.sqrt(np.abs(np.einsum("fi,fij,fj->f", V, op.M, V)) / op.space.mesh.areas[op.elements])
    return bool(np.all(norms <= tol))


def local_rank(op: WeakGradientOperator, rtol: float = 1e-10) -> np.ndarray:
    """Numerical rank of M^{-1}[A | B] per element."""
    s = np.linalg.svd(op.D, compute_uv=False)
    return (s > rtol * s[:, :1]).sum(axis=1)
