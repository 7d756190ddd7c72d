"""Polynomial bases and quadrature on triangles and edges.

Triangle bases are monomials in the scaled local coordinate
``(x - x_K) / h_K``; edge bases are shifted Legendre polynomials in the edge
parameter ``t in [0, 1]`` running from ``edges[e, 0]`` to ``edges[e, 1]``.
All element-level routines are batched over elements.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import eval_legendre, roots_jacobi, roots_legendre

MAX_QUAD_DEGREE = 20


class DegenerateElementError(ArithmeticError):
    pass


def dim_p(degree: int) -> int:
    """Dimension of P_degree in two variables."""
    return (degree + 1) * (degree + 2) // 2


def default_quad_degree(k: int) -> int:
    """Over-integration degree used for every variational integral."""
    return 2 * (k + 1) + 4


@dataclass(frozen=True)
class QuadRule:
    """Points are barycentric (triangle, shape (q, 3)) or parametric (edge, shape (q,)).

    Weights sum to the reference measure: 1/2 for the triangle, 1 for [0, 1].
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _check_degree(degree):
    if int(degree) != degree or not 0 <= degree <= MAX_QUAD_DEGREE:
        raise ValueError(f"quadrature degree must be an integer in [0, {MAX_QUAD_DEGREE}], got {degree!r}")
    return int(degree)


@lru_cache(maxsize=None)
def tri_quadrature(degree: int) -> QuadRule:
    """Collapsed Gauss rule on {(0,0), (1,0), (0,1)} exact to total degree ``degree``."""
    degree = _check_degree(degree)
    m = degree // 2 + 1
    # x-direction carries the (1 - x) Jacobian of the collapse
    tj, wj = roots_jacobi(m, 1.0, 0.0)
    tl, wl = roots_legendre(m)
    x = (tj + 1) / 2
    s = (tl + 1) / 2
    X = np.repeat(x, m)
    Y = (1 - X) * np.tile(s, m)
    W = np.outer(wj / 4, wl / 2).ravel()
    pts = np.column_stack((1 - X - Y, X, Y))
    pts.setflags(write=False)
    W.setflags(write=False)
    return QuadRule(pts, W, degree)


@lru_cache(maxsize=None)
def edge_quadrature(degree: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    degree = _check_degree(degree)
    t, w = roots_legendre(degree // 2 + 1)
    t = (t + 1) / 2
    w = w / 2
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadRule(t, w, degree)


@lru_cache(maxsize=None)
def monomial_exponents(degree: int) -> np.ndarray:
    """(N, 2) exponents ordered by total degree: 1, x, y, x^2, xy, y^2, ..."""
    exps = [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]
    out = np.array(exps, dtype=np.int64)
    out.setflags(write=False)
    return out


class TriBasis:
    """Scaled monomial basis of P_l on each element.

    ``centers`` and ``scales`` have one entry per element; the physical
    basis function is ``((x - c) / s)^a ((y - c_y) / s)^b``.
    """

    def __init__(self, degree: int, centers, scales):
        self.degree = degree
        self.exps = monomial_exponents(degree)
        self.dim = len(self.exps)
        self.centers = np.asarray(centers, dtype=float)
        self.scales = np.asarray(scales, dtype=float)

    @classmethod
    def for_mesh(cls, mesh, degree: int, scale_factor: float = 1.0) -> "TriBasis":
        return cls(degree, mesh.centroids, scale_factor * mesh.diameters)

    def _local(self, x, elements):
        c = self.centers if elements is None else self.centers[elements]
        s = self.scales if elements is None else self.scales[elements]
        shape = (-1,) + (1,) * (x.ndim - 2) + (1,)
        return (x - c.reshape(shape[:-1] + (2,))) / s.reshape(shape), s

    def eval(self, x, elements=None) -> np.ndarray:
        """Values at points ``x`` of shape (F, ..., 2); returns (F, ..., N)."""
        xi, _ = self._local(np.asarray(x, dtype=float), elements)
        return _monomials(xi, self.exps)

    def grad(self, x, elements=None) -> np.ndarray:
        """Physical gradients, shape (F, ..., N, 2)."""
        x = np.asarray(x, dtype=float)
        xi, s = self._local(x, elements)
        g = _monomial_grads(xi, self.exps)
        return g / s.reshape((-1,) + (1,) * (g.ndim - 1))


def _powers(xi, top):
    out = np.ones(xi.shape[:-1] + (top + 1, 2))
    for p in range(1, top + 1):
        out[..., p, :] = out[..., p - 1, :] * xi
    return out


def _monomials(xi, exps):
    pw = _powers(xi, int(exps.max(initial=0)))
    return pw[..., exps[:, 0], 0] * pw[..., exps[:, 1], 1]


def _monomial_grads(xi, exps):
    pw = _powers(xi, int(exps.max(initial=0)))
    a, b = exps[:, 0], exps[:, 1]
    am = np.maximum(a - 1, 0)
    bm = np.maximum(b - 1, 0)
    gx = a * pw[..., am, 0] * pw[..., b, 1]
    gy = b * pw[..., a, 0] * pw[..., bm, 1]
    return np.stack((gx, gy), axis=-1)


def edge_basis(degree: int, t) -> np.ndarray:
    """Shifted Legendre values P_j(2t - 1), j = 0..degree; shape t.shape + (degree+1,)."""
    t = np.asarray(t, dtype=float)
    return np.stack([eval_legendre(j, 2 * t - 1) for j in range(degree + 1)], axis=-1)


def element_points(mesh, rule: QuadRule, elements=None) -> np.ndarray:
    """Physical quadrature points, shape (F, q, 2)."""
    verts = mesh.vertices[mesh.elements if elements is None else mesh.elements[elements]]
    return np.einsum("qi,fid->fqd", rule.points, verts)


def element_weights(mesh, rule: QuadRule, elements=None) -> np.ndarray:
    """Physical weights, shape (F, q)."""
    areas = mesh.areas if elements is None else mesh.areas[elements]
    return 2.0 * areas[:, None] * rule.weights[None, :]


def edge_points(mesh, rule: QuadRule, edges=None) -> np.ndarray:
    """Physical points on edges, shape (E, q, 2), ordered by increasing parameter."""
    ed = mesh.edges if edges is None else mesh.edges[edges]
    a = mesh.vertices[ed[:, 0]]
    b = mesh.vertices[ed[:, 1]]
    t = rule.points
    return a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]


def _cholesky_solve(gram, rhs):
    """Batched SPD solve; raises DegenerateElementError on failure."""
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise DegenerateElementError("local Gram matrix is not positive definite") from exc
    if gram.ndim == 2:
        y = scipy.linalg.solve_triangular(L, rhs, lower=True)
        return scipy.linalg.solve_triangular(L.T, y, lower=False)
    return np.linalg.solve(gram, rhs)


def l2_project_tri(f, mesh, degree: int, elements=None, quad_degree: int | None = None,
                   basis: TriBasis | None = None) -> np.ndarray:
    """Coefficients of the local L2 projection onto P_degree, shape (F, N).

    ``f`` maps points of shape (..., 2) to values of shape (...).
    """
    if quad_degree is None:
        quad_degree = min(2 * degree + 6, MAX_QUAD_DEGREE)
    basis = basis or TriBasis.for_mesh(mesh, degree)
    rule = tri_quadrature(quad_degree)
    x = element_points(mesh, rule, elements)
    w = element_weights(mesh, rule, elements)
    phi = basis.eval(x, elements)
    gram = np.einsum("fq,fqi,fqj->fij", w, phi, phi)
    rhs = np.einsum("fq,fqi,fq->fi", w, phi, f(x))
    return _cholesky_solve(gram, rhs[..., None])[..., 0]


def l2_project_edge(g, mesh, degree: int, edges=None, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2 projection onto P_degree(e) in the edge basis, shape (E, degree+1)."""
    if quad_degree is None:
        quad_degree = min(2 * degree + 6, MAX_QUAD_DEGREE)
    rule = edge_quadrature(quad_degree)
    x = edge_points(mesh, rule, edges)
    lengths = mesh.edge_lengths if edges is None else mesh.edge_lengths[edges]
    w = lengths[:, None] * rule.weights[None, :]
    psi = edge_basis(degree, rule.points)  # (q, n)
    gram = np.einsum("eq,qi,qj->eij", w, psi, psi)
    rhs = np.einsum("eq,qi,eq->ei", w, psi, g(x))
    return _cholesky_solve(gram, rhs[..., None])[..., 0]
