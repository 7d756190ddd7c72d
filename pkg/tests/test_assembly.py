import numpy as np
import pytest
from hypothesis import given, strategies as st

from wgfem.assembly import (CoefficientError, CoefficientSet, assemble, interior_norm_sq,
                            quadratic_form, weak_gradient_norm_sq)
from wgfem.mesh import build_structured
from wgfem.polyquad import edge_basis
from wgfem.problems import TABLE1, TABLE2
from wgfem.space import DirichletData, WeakSpace, project_boundary
from wgfem.weak_gradient import build_operators

VAR = CoefficientSet(
    A=lambda x: (1 + x[..., 0] * x[..., 1])[..., None, None] * np.eye(2),
    b=lambda x: np.stack((1 + x[..., 0], np.full(x.shape[:-1], 2.0)), -1),
    div_b=lambda x: np.ones(x.shape[:-1]),
    c=lambda x: 1 + x[..., 0] * x[..., 1],
    f=lambda x: np.ones(x.shape[:-1]),
)


def system(n, k, coeffs, g=None):
    space = WeakSpace(build_structured(n), k)
    ops = build_operators(space)
    d = project_boundary(space, g or (lambda x: np.zeros(x.shape[:-1])))
    return space, ops, assemble(space, ops, coeffs, d, keep_full=True)


def collapsed_rule(m=8):
    """Duffy-collapsed Gauss rule on the reference triangle: barycentric points, weights sum 1/2."""
    t, w = np.polynomial.legendre.leggauss(m)
    t, w = (t + 1) / 2, w / 2
    s, r = np.meshgrid(t, t, indexing="ij")
    ws = np.outer(w, w) * (1 - r)
    x, y = s * (1 - r), r
    lam = np.stack((1 - x - y, x, y), -1).reshape(-1, 3)
    return lam, ws.ravel()


def oracle_form(space, u_full, v_full, coeffs):
    """a_h(u, v) from scratch: P_{k+1} gradients by raw monomials, geometric normals."""
    mesh, k = space.mesh, space.k
    r = k + 1
    lam, wref = collapsed_rule()
    tg, wg = np.polynomial.legendre.leggauss(8)
    tg, wg = (tg + 1) / 2, wg / 2
    exps = [(i, d - i) for d in range(r + 1) for i in range(d, -1, -1)]
    total = 0.0
    u = space.local(u_full)
    v = space.local(v_full)
    for K in range(mesh.num_elements):
        P = mesh.vertices[mesh.elements[K]]
        e1, e2 = P[1] - P[0], P[2] - P[0]
        area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
        x = lam @ P
        w = wref * 2 * area
        mono = lambda y: np.stack([y[..., 0] ** a * y[..., 1] ** b for a, b in exps], -1)
        dmono = lambda y: np.stack([np.stack((a * y[..., 0] ** max(a - 1, 0) * y[..., 1] ** b,
                                             b * y[..., 0] ** a * y[..., 1] ** max(b - 1, 0)), -1)
                                    for a, b in exps], -2)
        nm = len(exps)
        phi = mono(x)
        Mm = np.einsum("q,qi,qj->ij", w, phi, phi)
        M = np.kron(np.eye(2), Mm)

        def gradw(loc):
            v0 = space.interior_basis.eval(x[None], np.array([K]))[0] @ loc[:space.n_interior]
            rhs = np.zeros(2 * nm)
            div = dmono(x)  # (q, nm, 2)
            for d in range(2):
                rhs[d * nm:(d + 1) * nm] -= np.einsum("q,q,qi->i", w, v0, div[..., d])
            for l in range(3):
                e = mesh.element_edges[K, l]
                a, b = mesh.vertices[mesh.edges[e]]
                tan = b - a
                nrm = np.array([tan[1], -tan[0]]) / np.linalg.norm(tan)
                mid = 0.5 * (a + b)
                if np.dot(nrm, mid - P.mean(0)) < 0:
                    nrm = -nrm
                xe = a + tg[:, None] * tan
                blk = loc[space.n_interior + l * (k + 2): space.n_interior + (l + 1) * (k + 2)]
                vb = edge_basis(k + 1, tg) @ blk
                pe = mono(xe)
                for d in range(2):
                    rhs[d * nm:(d + 1) * nm] += np.linalg.norm(tan) * np.einsum("q,q,qi->i", wg, vb * nrm[d], pe)
            c = np.linalg.solve(M, rhs)
            return np.stack((phi @ c[:nm], phi @ c[nm:]), -1), v0

        gu, u0 = gradw(u[K])
        gv, v0 = gradw(v[K])
        A = coeffs.A(x)
        bx = np.broadcast_to(coeffs.b(x), x.shape)
        cb = coeffs.c(x) - 0.5 * coeffs.div_b(x)
        total += np.sum(w * np.einsum("qi,qij,qj->q", gv, A, gu))
        total += 0.5 * np.sum(w * np.einsum("qi,qi->q", bx, gu) * v0)
        total -= 0.5 * np.sum(w * u0 * np.einsum("qi,qi->q", bx, gv))
        total += np.sum(w * cb * u0 * v0)
    return total


@pytest.mark.parametrize("k", [0, 1])
def test_matches_independent_oracle(k, rng):
    space, ops, sysm = system(2, k, VAR)
    K = sysm.full_matrix.toarray()
    for _ in range(3):
        u = rng.standard_normal(space.num_dofs)
        v = rng.standard_normal(space.num_dofs)
        ref = oracle_form(space, u, v, VAR)
        assert abs(v @ K @ u - ref) <= 1e-11 * max(1, abs(ref))


def test_oracle_entries_k0():
    space, ops, sysm = system(2, 0, VAR)
    K = sysm.full_matrix.toarray()
    eye = np.eye(space.num_dofs)
    for i, j in [(0, 0), (0, 3), (3, 0), (5, 20), (20, 5), (12, 12), (9, 30)]:
        assert abs(K[i, j] - oracle_form(space, eye[j], eye[i], VAR)) <= 1e-12 * max(1, abs(K[i, j]))


def test_zero_problem_gives_zero_system():
    space, ops, sysm = system(4, 0, CoefficientSet())
    assert sysm.dim == 112
    assert np.all(sysm.rhs == 0)


def test_skew_part_identity(rng):
    """a_h(v, v) does not see b: it equals the form with the convection dropped."""
    space, ops, sysm = system(4, 1, VAR)
    no_b = CoefficientSet(A=VAR.A, c=VAR.c, div_b=VAR.div_b)
    s2 = assemble(space, ops, no_b, project_boundary(space, lambda x: 0 * x[..., 0]))
    for _ in range(5):
        v = rng.standard_normal(sysm.dim)
        assert quadratic_form(sysm, v) == pytest.approx(quadratic_form(s2, v), rel=1e-12)
        assert quadratic_form(sysm, v) > 0


@pytest.mark.parametrize("k", [0, 1, 2])
def test_coercivity(k, rng):
    space, ops, sysm = system(4, k, TABLE1.coeffs)
    for _ in range(10):
        v = rng.standard_normal(sysm.dim)
        full = sysm.expand(v)
        lhs = quadratic_form(sysm, v)
        assert lhs >= sysm.a0 * weak_gradient_norm_sq(ops, full) * (1 - 1e-10)


def test_symmetry_iff_no_convection():
    _, _, s = system(4, 0, TABLE2.coeffs)
    assert abs(s.matrix - s.matrix.T).max() <= 1e-14 * abs(s.matrix).max()
    _, _, s = system(4, 0, TABLE1.coeffs)
    assert abs(s.matrix - s.matrix.T).max() > 1e-3 * abs(s.matrix).max()


def test_symmetric_part_independent_of_b(rng):
    _, _, s1 = system(3, 1, TABLE1.coeffs)
    _, _, s2 = system(3, 1, CoefficientSet(A=TABLE1.coeffs.A, c=TABLE1.coeffs.c))
    S1 = (s1.matrix + s1.matrix.T).toarray()
    S2 = (s2.matrix + s2.matrix.T).toarray()
    assert np.abs(S1 - S2).max() <= 1e-13 * np.abs(S2).max()


def test_interior_norm(rng):
    space, _, _ = system(2, 1, CoefficientSet())
    v = np.zeros(space.num_dofs)
    v[space.element_dofs[:, 0]] = 1.0
    assert interior_norm_sq(space, v) == pytest.approx(1.0, rel=1e-13)


def test_coefficient_errors():
    bad_A = CoefficientSet(A=lambda x: np.broadcast_to(np.array([[1.0, 0.5], [0.0, 1.0]]), x.shape[:-1] + (2, 2)))
    neg_A = CoefficientSet(A=lambda x: -np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)))
    neg_cb = CoefficientSet(c=lambda x: -np.ones(x.shape[:-1]))
    for cs in (bad_A, neg_A, neg_cb):
        with pytest.raises(CoefficientError):
            system(2, 0, cs)


def test_dirichlet_must_cover_boundary():
    space = WeakSpace(build_structured(2), 0)
    ops = build_operators(space)
    d = project_boundary(space, lambda x: 0 * x[..., 0])
    with pytest.raises(ValueError):
        assemble(space, ops, CoefficientSet(), DirichletData(d.edges[1:], d.values[1:]))


def test_boundary_elimination_consistent(rng):
    """Reduced system equals the full system with boundary dofs fixed."""
    g = lambda x: np.sin(x[..., 0]) + x[..., 1] ** 2
    space, ops, s = system(3, 1, VAR, g=g)
    x = rng.standard_normal(s.dim)
    full = s.expand(x)
    Kf = s.full_matrix
    load = s.rhs + (Kf[s.free][:, space.boundary_dofs] @ s.boundary_values[space.boundary_dofs])
    assert np.allclose((Kf @ full)[s.free] - load, s.matrix @ x - s.rhs, atol=1e-12)


def test_export_coo(tmp_path):
    _, _, s = system(1, 0, TABLE2.coeffs)
    path = tmp_path / "A.coo"
    s.export_coo(path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# {s.dim} {s.dim} {s.matrix.nnz}"
    i, j, v = lines[1].split()
    assert s.matrix[int(i), int(j)] == float(v)


@given(st.floats(0.1, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_constant_coefficient_scaling(alpha, b1, b2):
    base = CoefficientSet(b=lambda x: np.broadcast_to(np.array([b1, b2]), x.shape))
    scaled = CoefficientSet(A=lambda x: alpha * np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)),
                            b=lambda x: np.broadcast_to(alpha * np.array([b1, b2]), x.shape))
    _, _, s1 = system(2, 0, base)
    _, _, s2 = system(2, 0, scaled)
    assert abs(alpha * s1.matrix - s2.matrix).max() <= 1e-12 * alpha * abs(s1.matrix).max()


def test_sharp_embedding_constant():
    """Largest ||v0|| / ||grad_w v||_h on S_h^0 stays below the continuous Poincare constant."""
    import scipy.linalg as sla
    from wgfem.error_analysis import interior_gram

    consts = []
    for n in (4, 8):
        space, ops, s = system(n, 0, CoefficientSet(convection=False))
        G = s.matrix.toarray()
        M0 = np.zeros_like(G)
        pos = np.searchsorted(s.free, space.element_dofs[:, 0])
        M0[pos, pos] = interior_gram(space)[:, 0, 0]
        consts.append(np.sqrt(sla.eigh(M0, G, eigvals_only=True)[-1]))
    limit = 1 / (np.pi * np.sqrt(2))
    assert consts[0] < consts[1] < limit
    assert consts[1] > 0.98 * limit
