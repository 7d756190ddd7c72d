"""Conforming triangulations of rectangles and their uniform refinement.

Topology is stored in dense 0-based numpy arrays. Every edge keeps one unit
normal; it points out of ``edge_elements[e, 0]`` (the lower element id, or the
only element for a boundary edge). Each element records, per local edge, the
sign that turns the stored normal into its own outward normal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# local edge l of an element joins local vertices LOCAL_EDGES[l]
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Rectangle:
    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise MeshError(f"degenerate rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


UNIT_SQUARE = Rectangle()


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation.

    Attributes
    ----------
    vertices : (V, 2) float
    elements : (F, 3) int, counterclockwise
    edges : (E, 2) int, vertex ids with ``edges[e, 0] < edges[e, 1]``
    edge_elements : (E, 2) int, ``[lower, higher]`` element ids, ``-1`` if boundary
    element_edges : (F, 3) int, local edge l is opposite local vertex l
    element_edge_signs : (F, 3) float, +1 where the stored normal points out
    """

    vertices: np.ndarray
    elements: np.ndarray
    edges: np.ndarray
    edge_elements: np.ndarray
    element_edges: np.ndarray
    element_edge_signs: np.ndarray
    edge_normals: np.ndarray
    edge_lengths: np.ndarray
    areas: np.ndarray
    diameters: np.ndarray
    domain: Rectangle = UNIT_SQUARE
    level: int = 0
    n: int | None = None  # squares per side for structured meshes
    centroids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "centroids", self.vertices[self.elements].mean(axis=1))
        for arr in (self.vertices, self.elements, self.edges, self.edge_elements,
                    self.element_edges, self.element_edge_signs, self.edge_normals,
                    self.edge_lengths, self.areas, self.diameters, self.centroids):
            arr.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elements[:, 1] < 0)

    @property
    def is_boundary_edge(self) -> np.ndarray:
        return self.edge_elements[:, 1] < 0

    def outward_normals(self) -> np.ndarray:
        """(F, 3, 2) outward unit normals per element and local edge."""
        return self.element_edge_signs[..., None] * self.edge_normals[self.element_edges]

    def __repr__(self):
        return (f"Mesh(level={self.level}, elements={self.num_elements}, "
                f"edges={self.num_edges}, vertices={self.num_vertices}, h={self.h:.4g})")

    def dump(self, path) -> None:
        """Write a plain-text dump: VERTICES, EDGES and ELEMENTS sections."""
        with open(path, "w") as fh:
            fh.write(f"# level {self.level}\n")
            fh.write(f"VERTICES {self.num_vertices}\n")
            for i, (x, y) in enumerate(self.vertices):
                fh.write(f"{i} {x!r} {y!r}\n")
            fh.write(f"EDGES {self.num_edges}\n")
            for e in range(self.num_edges):
                a, b = self.edges[e]
                k0, k1 = self.edge_elements[e]
                nx, ny = self.edge_normals[e]
                fh.write(f"{e} {a} {b} {k0} {k1} {nx!r} {ny!r} {int(k1 < 0)}\n")
            fh.write(f"ELEMENTS {self.num_elements}\n")
            for k in range(self.num_elements):
                v = self.elements[k]
                ed = self.element_edges[k]
                s = self.element_edge_signs[k].astype(int)
                fh.write(f"{k} {v[0]} {v[1]} {v[2]} {ed[0]} {ed[1]} {ed[2]} {s[0]} {s[1]} {s[2]}\n")


def from_triangles(vertices, elements, domain: Rectangle = UNIT_SQUARE, level: int = 0,
                   n: int | None = None) -> Mesh:
    """Build full topology from a vertex array and a triangle list."""
    vertices = np.asarray(vertices, dtype=float)
    elements = np.array(elements, dtype=np.int64)
    p = vertices[elements]
    signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                    - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    if np.any(signed == 0.0):
        raise MeshError("zero-area element")
    flip = signed < 0
    elements[flip] = elements[flip][:, [0, 2, 1]]
    areas = np.abs(signed)

    nf = len(elements)
    pairs = elements[:, LOCAL_EDGES]  # (F, 3, 2)
    pairs = np.sort(pairs, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(nf, 3)

    owner = np.repeat(np.arange(nf), 3)
    flat = inverse.ravel()
    counts = np.bincount(flat, minlength=len(edges))
    if np.any(counts > 2):
        raise MeshError("non-manifold edge")
    edge_elements = np.full((len(edges), 2), -1, dtype=np.int64)
    # owners arrive in ascending element order, so the first hit is the lower id
    order = np.argsort(flat, kind="stable")
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    edge_elements[:, 0] = owner[order[starts]]
    two = counts == 2
    edge_elements[two, 1] = owner[order[starts[two] + 1]]

    tangent = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    lengths = np.hypot(tangent[:, 0], tangent[:, 1])
    normals = np.column_stack((tangent[:, 1], -tangent[:, 0])) / lengths[:, None]
    # orient outward from edge_elements[:, 0]
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    cen = vertices[elements].mean(axis=1)
    away = np.einsum("ij,ij->i", normals, mid - cen[edge_elements[:, 0]])
    normals[away < 0] *= -1.0

    signs = np.where(edge_elements[inverse, 0] == np.arange(nf)[:, None], 1.0, -1.0)

    q = vertices[elements]
    side = np.linalg.norm(q[:, [1, 2, 0]] - q[:, [2, 0, 1]], axis=2)
    diameters = side.max(axis=1)
    return Mesh(vertices=vertices, elements=elements, edges=edges,
                edge_elements=edge_elements, element_edges=inverse,
                element_edge_signs=signs, edge_normals=normals, edge_lengths=lengths,
                areas=areas, diameters=diameters, domain=domain, level=level, n=n)


DIAGONALS = ("se-nw", "sw-ne")
DEFAULT_DIAGONAL = "se-nw"


def build_structured(n: int, domain: Rectangle = UNIT_SQUARE,
                     diagonal: str = DEFAULT_DIAGONAL) -> Mesh:
    """n x n squares, each split along one diagonal.

    ``diagonal`` is ``"se-nw"`` (lower-right to upper-left, the default) or
    ``"sw-ne"`` (lower-left to upper-right). The default is the orientation
    that reproduces the reference b = 0, c = 0 error values digit for digit.
    """
    if diagonal not in DIAGONALS:
        raise MeshError(f"diagonal must be one of {DIAGONALS}, got {diagonal!r}")
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    xs = np.linspace(domain.x0, domain.x1, n + 1)
    ys = np.linspace(domain.y0, domain.y1, n + 1)
    X, Y = np.meshgrid(xs, ys)  # vertex id = i + j * (n + 1)
    vertices = np.column_stack((X.ravel(), Y.ravel()))
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    v00 = i + j * (n + 1)
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    if diagonal == "sw-ne":
        lower = np.column_stack((v00, v10, v11))
        upper = np.column_stack((v00, v11, v01))
    else:
        lower = np.column_stack((v00, v10, v01))
        upper = np.column_stack((v10, v11, v01))
    elements = np.stack((lower, upper), axis=1).reshape(-1, 3)
    return from_triangles(vertices, elements, domain=domain, level=0, n=n)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four by joining its edge midpoints."""
    nv = mesh.num_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack((mesh.vertices, mids))
    a, b, c = mesh.elements.T
    # midpoint opposite local vertex l is on local edge l
    m_bc, m_ca, m_ab = (nv + mesh.element_edges[:, l] for l in range(3))
    children = np.stack((
        np.column_stack((a, m_ab, m_ca)),
        np.column_stack((m_ab, b, m_bc)),
        np.column_stack((m_ca, m_bc, c)),
        np.column_stack((m_bc, m_ca, m_ab)),
    ), axis=1).reshape(-1, 3)
    n = None if mesh.n is None else 2 * mesh.n
    return from_triangles(vertices, children, domain=mesh.domain, level=mesh.level + 1, n=n)


def mesh_series(n0: int, levels: int, domain: Rectangle = UNIT_SQUARE,
                diagonal: str = DEFAULT_DIAGONAL) -> list[Mesh]:
    meshes = [build_structured(n0, domain, diagonal)]
    for _ in range(levels - 1):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes
