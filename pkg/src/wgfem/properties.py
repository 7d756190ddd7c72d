"""Property checks across modules, with independent oracles.

Each check returns a ``PropertyResult``; ``run_properties`` runs the whole
battery deterministically for a seed. The weak-gradient residual oracle
takes outward normals from vertex geometry, never from stored edge signs,
so a corrupted sign is caught.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_legendre

from . import polyquad as pq
from .assembly import (CoefficientSet, assemble, interior_norm_sq, quadratic_form,
                       weak_gradient_norm_sq)
from .mesh import LOCAL_EDGES, build_structured, refine_uniform
from .problems import TABLE1, get_problem
from .solver import dense_solve, solve, true_residual
from .space import WeakSpace, interpolate_Qh, project_boundary
from .weak_gradient import build_operators, kernel_check, local_rank, weak_gradient_at


@dataclass
class PropertyResult:
    module: str
    name: str
    passed: bool
    witness: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.module}.{self.name}  {self.witness}"


@dataclass
class PropertySummary:
    seed: int
    results: list[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list[PropertyResult]:
        return [r for r in self.results if not r.passed]


# ---------------------------------------------------------------- oracles

def _bary_monomials(lam, degree):
    """Monomials lam1^a lam2^b (a + b <= degree) and their lam-gradients."""
    exps = pq.monomial_exponents(degree)
    l1, l2 = lam[..., 1], lam[..., 2]
    a, b = exps[:, 0], exps[:, 1]
    val = l1[..., None] ** a * l2[..., None] ** b
    d1 = a * l1[..., None] ** np.maximum(a - 1, 0) * l2[..., None] ** b
    d2 = b * l1[..., None] ** a * l2[..., None] ** np.maximum(b - 1, 0)
    return val, d1, d2


def geometric_outward_normals(mesh, elements):
    """(F, 3, 2) outward normals from the counterclockwise vertex order alone."""
    p = mesh.vertices[mesh.elements[elements]]
    t = p[:, LOCAL_EDGES[:, 1]] - p[:, LOCAL_EDGES[:, 0]]
    n = np.stack((t[..., 1], -t[..., 0]), axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def weak_gradient_residual(space, ops, v_local, elements=None) -> np.ndarray:
    """Relative residual of the weak-gradient defining relation, per element.

    Tests against the vector polynomials (m, 0) and (0, m), m a barycentric
    monomial of degree <= r, with all integrals done by quadrature.
    """
    mesh = space.mesh
    elements = ops.elements if elements is None else elements
    r = space.r
    p = mesh.vertices[mesh.elements[elements]]  # (F, 3, 2)
    # grad of lam1, lam2 from the inverse affine map
    J = np.stack((p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=-1)  # columns
    Jinv = np.linalg.inv(J)  # rows are grad lam1, grad lam2

    rule = pq.tri_quadrature(2 * r + 2)
    lam = rule.points
    x = np.einsum("qi,fid->fqd", lam, p)
    w = pq.element_weights(mesh, rule, elements)
    val, d1, d2 = _bary_monomials(lam, r)  # (q, m)
    grad_m = d1[None, :, :, None] * Jinv[:, None, None, 0, :] + d2[None, :, :, None] * Jinv[:, None, None, 1, :]

    gw = weak_gradient_at(ops, v_local, x)  # (F, q, 2)
    v0 = (space.interior_basis.eval(x, elements) * v_local[:, None, :space.n_interior]).sum(-1)

    lhs = np.concatenate((np.einsum("fq,fq,qm->fm", w, gw[..., 0], val),
                          np.einsum("fq,fq,qm->fm", w, gw[..., 1], val)), axis=1)
    vol = -np.concatenate((np.einsum("fq,fq,fqm->fm", w, v0, grad_m[..., 0]),
                           np.einsum("fq,fq,fqm->fm", w, v0, grad_m[..., 1])), axis=1)

    erule = pq.edge_quadrature(2 * r + 2)
    normals = geometric_outward_normals(mesh, elements)
    bnd = np.zeros_like(lhs)
    for l in range(3):
        i0, i1 = LOCAL_EDGES[l]
        s = erule.points
        lam_e = np.zeros((len(s), 3))
        lam_e[:, i0] = 1 - s
        lam_e[:, i1] = s
        xe = np.einsum("qi,fid->fqd", lam_e, p)
        e = mesh.element_edges[elements, l]
        a = mesh.vertices[mesh.edges[e, 0]]
        b = mesh.vertices[mesh.edges[e, 1]]
        te = np.einsum("fqd,fd->fq", xe - a[:, None], b - a) / np.einsum("fd,fd->f", b - a, b - a)[:, None]
        coef = v_local[:, space.n_interior + l * space.n_edge: space.n_interior + (l + 1) * space.n_edge]
        vb = sum(coef[:, j, None] * eval_legendre(j, 2 * te - 1) for j in range(space.n_edge))
        length = np.linalg.norm(p[:, i1] - p[:, i0], axis=-1)
        mv, _, _ = _bary_monomials(lam_e, r)
        we = length[:, None] * erule.weights[None, :]
        for d in range(2):
            part = np.einsum("fq,fq,qm->fm", we, vb, mv) * normals[:, l, d, None]
            bnd[:, d * mv.shape[1]:(d + 1) * mv.shape[1]] += part
    scale = np.maximum(np.abs(lhs) + np.abs(vol) + np.abs(bnd), 1e-300).max(axis=1)
    return np.abs(lhs - vol - bnd).max(axis=1) / scale


def random_interior_vector(space, rng) -> np.ndarray:
    """Random coefficients vanishing on boundary traces (a member of S_h^0)."""
    v = rng.standard_normal(space.num_dofs)
    v[space.boundary_dofs] = 0.0
    return v


def embedding_ratio_max(space, ops, rng, samples=100) -> float:
    """max ||v0|| / ||grad_w v||_h over random v in S_h^0."""
    best = 0.0
    for _ in range(samples):
        v = random_interior_vector(space, rng)
        best = max(best, math.sqrt(interior_norm_sq(space, v) / weak_gradient_norm_sq(ops, v)))
    return best


def _random_poly(rng, degree):
    exps = pq.monomial_exponents(degree)
    c = rng.standard_normal(len(exps))

    def u(x):
        return sum(ci * x[..., 0] ** a * x[..., 1] ** b for ci, (a, b) in zip(c, exps))

    def grad(x):
        gx = sum(ci * a * x[..., 0] ** max(a - 1, 0) * x[..., 1] ** b for ci, (a, b) in zip(c, exps))
        gy = sum(ci * b * x[..., 0] ** a * x[..., 1] ** max(b - 1, 0) for ci, (a, b) in zip(c, exps))
        return np.stack((gx + 0 * x[..., 0], gy + 0 * x[..., 0]), axis=-1)

    return u, grad


def _random_smooth(rng):
    a, b, c, d = rng.uniform(0.5, 3.0, size=4)
    ph = rng.uniform(0, 2 * np.pi, size=2)

    def u(x):
        return np.sin(a * x[..., 0] + ph[0]) * np.cos(b * x[..., 1] + ph[1]) + c * x[..., 0] * x[..., 1] ** 2 * d

    def grad(x):
        gx = a * np.cos(a * x[..., 0] + ph[0]) * np.cos(b * x[..., 1] + ph[1]) + c * d * x[..., 1] ** 2
        gy = -b * np.sin(a * x[..., 0] + ph[0]) * np.sin(b * x[..., 1] + ph[1]) + 2 * c * d * x[..., 0] * x[..., 1]
        return np.stack((gx, gy), axis=-1)

    return u, grad


# ---------------------------------------------------------------- checks

def _check(module, name, ok, witness):
    return PropertyResult(module, name, bool(ok), witness)


def mesh_checks(rng):
    out = []
    m = build_structured(int(rng.integers(1, 6)))
    for _ in range(2):
        area_err = abs(m.areas.sum() - m.domain.area) / m.domain.area
        out.append(_check("mesh", f"area_sum[level={m.level}]", area_err <= 1e-12, f"rel err {area_err:.2e}"))
        euler = m.num_vertices - m.num_edges + m.num_elements
        out.append(_check("mesh", f"euler[level={m.level}]", euler == 1, f"V-E+F={euler}"))
        inner = m.edge_elements[:, 1] >= 0
        k0, k1 = m.edge_elements[inner].T
        e = np.flatnonzero(inner)
        s0 = m.element_edge_signs[k0, np.argmax(m.element_edges[k0] == e[:, None], axis=1)]
        s1 = m.element_edge_signs[k1, np.argmax(m.element_edges[k1] == e[:, None], axis=1)]
        out.append(_check("mesh", f"opposite_signs[level={m.level}]", np.all(s0 * s1 == -1),
                          f"{int(np.sum(s0 * s1 != -1))} bad edges"))
        geo = geometric_outward_normals(m, np.arange(m.num_elements))
        dev = np.abs(m.outward_normals() - geo).max()
        out.append(_check("mesh", f"outward_normals[level={m.level}]", dev <= 1e-14, f"max dev {dev:.1e}"))
        fine = refine_uniform(m)
        ratio = fine.h / m.h
        out.append(_check("mesh", f"refine_halves_h[level={m.level}]", abs(ratio - 0.5) <= 1e-14, f"ratio {ratio!r}"))
        m = fine
    return out


def polyquad_checks(rng):
    out = []
    d = int(rng.integers(0, pq.MAX_QUAD_DEGREE + 1))
    rule = pq.tri_quadrature(d)
    worst = 0.0
    for p in range(d + 1):
        for q in range(d + 1 - p):
            exact = math.factorial(p) * math.factorial(q) / math.factorial(p + q + 2)
            got = float(rule.weights @ (rule.points[:, 1] ** p * rule.points[:, 2] ** q))
            worst = max(worst, abs(got - exact) / exact)
    out.append(_check("polyquad", f"tri_exactness[deg={d}]", worst <= 1e-13, f"rel err {worst:.1e}"))

    mesh = build_structured(3)
    l = int(rng.integers(0, 3))
    u, _ = _random_smooth(rng)
    c1 = pq.l2_project_tri(u, mesh, l)
    basis = pq.TriBasis.for_mesh(mesh, l)

    def proj(x):
        return (basis.eval(x) * c1[:, None, :]).sum(-1)

    c2 = pq.l2_project_tri(proj, mesh, l)
    dev = np.abs(c1 - c2).max() / max(np.abs(c1).max(), 1.0)
    out.append(_check("polyquad", f"projection_idempotent[l={l}]", dev <= 1e-12, f"dev {dev:.1e}"))

    rule = pq.tri_quadrature(2 * l + 8)
    x = pq.element_points(mesh, rule)
    w = pq.element_weights(mesh, rule)
    best = np.einsum("fq,fq->f", w, (u(x) - proj(x)) ** 2)
    phi = basis.eval(x)
    worse = 0
    for _ in range(100):
        q = (phi * (c1 + 0.1 * rng.standard_normal(c1.shape))[:, None, :]).sum(-1)
        worse += int(np.any(np.einsum("fq,fq->f", w, (u(x) - q) ** 2) < best - 1e-14))
    out.append(_check("polyquad", f"best_approximation[l={l}]", worse == 0, f"{worse} beating samples"))
    return out


def space_checks(rng):
    out = []
    k = int(rng.integers(0, 3))
    space = WeakSpace(build_structured(3), k)
    u, _ = _random_smooth(rng)
    v, _ = _random_poly(rng, 2)
    a, b = rng.standard_normal(2)
    lhs = interpolate_Qh(space, lambda x: a * u(x) + b * v(x)).coeffs
    rhs = a * interpolate_Qh(space, u).coeffs + b * interpolate_Qh(space, v).coeffs
    dev = np.abs(lhs - rhs).max() / np.abs(rhs).max()
    out.append(_check("space", f"Qh_linear[k={k}]", dev <= 1e-12, f"dev {dev:.1e}"))
    c = rng.uniform(-5, 5)
    q = interpolate_Qh(space, lambda x: np.full(x.shape[:-1], c))
    # constant appears as coefficient 0 of both the monomial and Legendre bases
    dev = max(np.abs(q.interior[:, 0] - c).max(), np.abs(q.interior[:, 1:]).max(initial=0),
              np.abs(q.traces[:, 0] - c).max(), np.abs(q.traces[:, 1:]).max())
    out.append(_check("space", f"Qh_constant[k={k}]", dev <= 1e-12, f"dev {dev:.1e}"))
    return out


def weak_gradient_checks(rng, signs=None, n=None):
    out = []
    n = n or int(rng.integers(1, 5))
    for k in (0, 1):
        space = WeakSpace(build_structured(n), k)
        ops = build_operators(space, signs=signs)
        res = 0.0
        for _ in range(10):
            v = rng.standard_normal((space.mesh.num_elements, space.n_local))
            res = max(res, float(weak_gradient_residual(space, ops, v).max()))
        out.append(_check("weak_gradient", f"defining_relation[k={k},n={n}]", res <= 1e-11,
                          f"max rel residual {res:.2e}"))
        ranks = local_rank(ops)
        want = space.n_local - 1
        out.append(_check("weak_gradient", f"kernel_rank[k={k}]", np.all(ranks == want),
                          f"ranks {sorted(set(ranks.tolist()))}, want {want}"))
        const = interpolate_Qh(space, lambda x: np.full(x.shape[:-1], 2.5))
        out.append(_check("weak_gradient", f"constant_in_kernel[k={k}]", kernel_check(ops, const.local()), ""))
        u, gu = _random_smooth(rng)
        rule = pq.tri_quadrature(2 * space.r + 2)
        x = pq.element_points(space.mesh, rule)
        gw = weak_gradient_at(ops, interpolate_Qh(space, u, quad_degree=14).local(), x)
        proj = np.stack([(space.gradient_basis.eval(x) * pq.l2_project_tri(
            lambda y, d=d: gu(y)[..., d], space.mesh, space.r, quad_degree=14,
            basis=space.gradient_basis)[:, None, :]).sum(-1) for d in range(2)], axis=-1)
        dev = np.abs(gw - proj).max() / np.abs(proj).max()
        out.append(_check("weak_gradient", f"commutes_with_projection[k={k}]", dev <= 1e-10,
                          f"rel dev {dev:.1e}"))
    return out


def assembly_checks(rng, levels=(4, 8)):
    out = []
    problem = TABLE1
    for n in levels:
        space = WeakSpace(build_structured(n), 0)
        ops = build_operators(space)
        system = assemble(space, ops, problem.coeffs, project_boundary(space, problem.coeffs.g))
        worst = np.inf
        for _ in range(100):
            v = random_interior_vector(space, rng)
            worst = min(worst, quadratic_form(system, v[system.free]) - system.a0 * weak_gradient_norm_sq(ops, v))
        out.append(_check("assembly", f"coercivity[n={n}]", worst >= -1e-10,
                          f"min a_h(v,v) - a0|v|^2 = {worst:.3e}, a0={system.a0:.3f}"))
        skew = CoefficientSet(b=lambda x: np.broadcast_to(np.array([1.0, 2.0]), x.shape))
        s2 = assemble(space, ops, skew, project_boundary(space, skew.g))
        dev = 0.0
        for _ in range(20):
            v = random_interior_vector(space, rng)
            g2 = weak_gradient_norm_sq(ops, v)
            dev = max(dev, abs(quadratic_form(s2, v[s2.free]) - g2) / g2)
        out.append(_check("assembly", f"skew_cancels[n={n}]", dev <= 1e-10, f"rel dev {dev:.1e}"))
    diff = get_problem("table2")
    s3 = assemble(space, ops, diff.coeffs, project_boundary(space, diff.coeffs.g))
    M = s3.matrix
    asym = abs(M - M.T).max() / abs(M).max()
    out.append(_check("assembly", "symmetric_without_convection", asym <= 1e-12, f"asym {asym:.1e}"))
    M = system.matrix
    asym = abs(M - M.T).max() / abs(M).max()
    out.append(_check("assembly", "asymmetric_with_convection", asym >= 1e-3, f"asym {asym:.1e}"))
    return out


def embedding_checks(rng, levels=(4, 8, 16, 32), samples=100):
    ratios = []
    for n in levels:
        space = WeakSpace(build_structured(n), 0)
        ratios.append(embedding_ratio_max(space, build_operators(space), rng, samples))
    growth = max(b / a for a, b in zip(ratios, ratios[1:]))
    return [_check("assembly", "discrete_embedding", growth < 1.10,
                   "max ratios " + ", ".join(f"{r:.4f}" for r in ratios))]


def solver_checks(rng):
    out = []
    space = WeakSpace(build_structured(4), 0)
    ops = build_operators(space)
    system = assemble(space, ops, TABLE1.coeffs, project_boundary(space, TABLE1.coeffs.g))
    x, rep = solve(system)
    ref = dense_solve(system.matrix, system.rhs)
    dev = np.abs(x - ref).max()
    out.append(_check("solver", "matches_dense", dev <= 1e-8, f"inf-norm dev {dev:.1e} ({rep.method})"))
    res = true_residual(system.matrix, x, system.rhs)
    ok = rep.residual <= 10 * res + 1e-300 and res <= 10 * max(rep.estimate, 1e-300)
    out.append(_check("solver", "residual_honest", ok, f"reported {rep.residual:.2e}, "
                      f"estimate {rep.estimate:.2e}, recomputed {res:.2e}"))
    return out


def run_properties(seed: int = 42, mutate: bool = False, quick: bool = False) -> PropertySummary:
    """Run the battery. ``mutate=True`` flips one stored edge sign before the
    weak-gradient checks, which must then fail."""
    rng = np.random.default_rng(seed)
    summary = PropertySummary(seed)
    summary.results += mesh_checks(rng)
    summary.results += polyquad_checks(rng)
    summary.results += space_checks(rng)
    signs = None
    n = None
    if mutate:
        n = 2
        signs = build_structured(n).element_edge_signs.copy()
        signs[0, 0] *= -1.0
    summary.results += weak_gradient_checks(rng, signs=signs, n=n)
    summary.results += assembly_checks(rng, levels=(4,) if quick else (4, 8))
    summary.results += embedding_checks(rng, levels=(4, 8) if quick else (4, 8, 16, 32),
                                        samples=20 if quick else 100)
    summary.results += solver_checks(rng)
    return summary
