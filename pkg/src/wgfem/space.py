"""Global degrees of freedom for the weak space with (P_k, P_{k+1}) pairs.

Interior blocks come first (``N_k`` per element, element-major), then one
block of ``k + 2`` trace coefficients per global edge. Sharing the edge block
between neighbours makes every weak function single-valued on interior edges.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .polyquad import TriBasis, dim_p, l2_project_edge, l2_project_tri

SUPPORTED_K = (0, 1, 2)


class DofCount(NamedTuple):
    interior: int
    edge: int
    constrained_boundary: int

    @property
    def unknowns(self) -> int:
        return self.interior + self.edge - self.constrained_boundary


class WeakSpace:
    """S_h on ``mesh`` with interior degree ``k`` and trace degree ``r = k + 1``."""

    def __init__(self, mesh, k: int, basis_scale: float = 1.0):
        if k not in SUPPORTED_K:
            raise ValueError(f"k must be one of {SUPPORTED_K}, got {k!r}")
        self.mesh = mesh
        self.k = k
        self.r = k + 1
        self.n_interior = dim_p(k)
        self.n_edge = k + 2
        self.n_local = self.n_interior + 3 * self.n_edge
        self.basis_scale = basis_scale
        self.interior_basis = TriBasis.for_mesh(mesh, k, basis_scale)
        self.gradient_basis = TriBasis.for_mesh(mesh, self.r, basis_scale)

    def __repr__(self):
        return f"WeakSpace(k={self.k}, {self.mesh!r})"

    @property
    def num_interior_dofs(self) -> int:
        return self.mesh.num_elements * self.n_interior

    @property
    def num_dofs(self) -> int:
        return self.num_interior_dofs + self.mesh.num_edges * self.n_edge

    @cached_property
    def element_dofs(self) -> np.ndarray:
        """(F, N_k) interior dof ids."""
        F = self.mesh.num_elements
        return np.arange(F * self.n_interior).reshape(F, self.n_interior)

    @cached_property
    def edge_dofs(self) -> np.ndarray:
        """(E, k+2) trace dof ids."""
        E = self.mesh.num_edges
        return self.num_interior_dofs + np.arange(E * self.n_edge).reshape(E, self.n_edge)

    @cached_property
    def local_to_global(self) -> np.ndarray:
        """(F, n_local): interior block, then the three local edges in order."""
        edges = self.edge_dofs[self.mesh.element_edges].reshape(self.mesh.num_elements, -1)
        return np.hstack((self.element_dofs, edges))

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        return self.edge_dofs[self.mesh.boundary_edges].ravel()

    @cached_property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.num_dofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    def local(self, coeffs) -> np.ndarray:
        """Gather a global coefficient vector into (F, n_local) blocks."""
        return np.asarray(coeffs)[self.local_to_global]

    def zero(self) -> "WeakFunction":
        return WeakFunction(self, np.zeros(self.num_dofs))


def dof_count(space: WeakSpace) -> DofCount:
    return DofCount(space.num_interior_dofs,
                    space.mesh.num_edges * space.n_edge,
                    len(space.boundary_dofs))


@dataclass
class WeakFunction:
    space: WeakSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.num_dofs,):
            raise ValueError(f"expected {self.space.num_dofs} coefficients, got {self.coeffs.shape}")

    @property
    def interior(self) -> np.ndarray:
        """(F, N_k) interior coefficients."""
        return self.coeffs[self.space.element_dofs]

    @property
    def traces(self) -> np.ndarray:
        """(E, k+2) edge coefficients."""
        return self.coeffs[self.space.edge_dofs]

    def local(self) -> np.ndarray:
        return self.space.local(self.coeffs)

    def eval_interior(self, x, elements=None) -> np.ndarray:
        """v0 at points ``x`` of shape (F, ..., 2)."""
        phi = self.space.interior_basis.eval(x, elements)
        c = self.interior if elements is None else self.interior[elements]
        c = c.reshape(c.shape[:1] + (1,) * (phi.ndim - 2) + c.shape[1:])
        return (phi * c).sum(axis=-1)

    def __add__(self, other):
        return WeakFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return WeakFunction(self.space, self.coeffs - other.coeffs)

    def __rmul__(self, alpha):
        return WeakFunction(self.space, alpha * self.coeffs)

    def to_csv(self, path) -> None:
        """Rows ``kind,id,c0,c1,...`` with kind ``element`` or ``edge``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "id"] + [f"c{j}" for j in range(self.space.n_edge)])
            for K, row in enumerate(self.interior):
                w.writerow(["element", K] + [repr(float(v)) for v in row])
            for e, row in enumerate(self.traces):
                w.writerow(["edge", e] + [repr(float(v)) for v in row])


def interpolate_Qh(space: WeakSpace, u, quad_degree: int | None = None) -> WeakFunction:
    """Elementwise L2 projection onto P_k inside, edgewise onto P_{k+1} on traces."""
    interior = l2_project_tri(u, space.mesh, space.k, quad_degree=quad_degree,
                              basis=space.interior_basis)
    traces = l2_project_edge(u, space.mesh, space.r, quad_degree=quad_degree)
    coeffs = np.empty(space.num_dofs)
    coeffs[space.element_dofs] = interior
    coeffs[space.edge_dofs] = traces
    return WeakFunction(space, coeffs)


@dataclass(frozen=True)
class DirichletData:
    """Trace coefficients of Q_h^b g on each boundary edge."""

    edges: np.ndarray
    values: np.ndarray  # (len(edges), k+2)

    def scatter(self, space: WeakSpace) -> np.ndarray:
        out = np.zeros(space.num_dofs)
        out[space.edge_dofs[self.edges]] = self.values
        return out


def project_boundary(space: WeakSpace, g, quad_degree: int | None = None) -> DirichletData:
    edges = space.mesh.boundary_edges
    values = l2_project_edge(g, space.mesh, space.r, edges=edges, quad_degree=quad_degree)
    return DirichletData(edges, values)
