import numpy as np
import pytest
from hypothesis import given, strategies as st

from wgfem import polyquad as pq
from wgfem.mesh import build_structured, mesh_series
from wgfem.properties import weak_gradient_residual
from wgfem.space import WeakSpace, interpolate_Qh
from wgfem.weak_gradient import (apply, build_operator, build_operators, kernel_check, local_rank,
                                 weak_gradient_at)


def monomial(a, b):
    u = lambda x: x[..., 0] ** a * x[..., 1] ** b
    g = lambda x: np.stack((a * x[..., 0] ** max(a - 1, 0) * x[..., 1] ** b,
                            b * x[..., 0] ** a * x[..., 1] ** max(b - 1, 0)), axis=-1)
    return u, g


@pytest.mark.parametrize("k", [0, 1, 2])
def test_mass_matrix_spd(k):
    ops = build_operators(WeakSpace(build_structured(3), k))
    M = ops.M
    assert np.allclose(M, M.transpose(0, 2, 1))
    assert np.all(np.linalg.eigvalsh(M) > 0)


@pytest.mark.parametrize("k", [0, 1])
@pytest.mark.parametrize("n", [1, 4])
def test_defining_relation(k, n, rng):
    space = WeakSpace(build_structured(n), k)
    ops = build_operators(space)
    for _ in range(50):
        v = rng.standard_normal((space.mesh.num_elements, space.n_local))
        assert weak_gradient_residual(space, ops, v).max() <= 1e-11


def test_single_element_operator_matches_batch(rng):
    space = WeakSpace(build_structured(3), 1)
    ops = build_operators(space)
    op = build_operator(space, 7)
    assert np.allclose(op.D[0], ops.D[7], rtol=1e-13, atol=1e-13)
    v = rng.standard_normal(space.n_local)
    assert np.allclose(apply(op, v), ops.D[7] @ v)
    with pytest.raises(ValueError):
        apply(op, v[:-1])


@pytest.mark.parametrize("k", [0, 1, 2])
def test_constant_in_kernel(k):
    space = WeakSpace(build_structured(4), k)
    ops = build_operators(space)
    v = interpolate_Qh(space, lambda x: np.ones(x.shape[:-1]))
    g = weak_gradient_at(ops, v.local(), pq.element_points(space.mesh, pq.tri_quadrature(4)))
    assert np.abs(g).max() <= 1e-12
    assert kernel_check(ops, v.local())


def test_one_edge_trace_not_in_kernel():
    space = WeakSpace(build_structured(1), 0)
    op = build_operator(space, 0)
    v = np.zeros(space.n_local)
    v[space.n_interior] = 1.0  # v0 = 0, v_b = 1 on local edge 0 only
    assert not kernel_check(op, v)
    assert np.linalg.norm(apply(op, v)) > 1e-6
    assert kernel_check(op, np.zeros(space.n_local))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_kernel_rank(k):
    space = WeakSpace(build_structured(4), k)
    ops = build_operators(space)
    assert np.all(local_rank(ops) == space.n_interior + 3 * (k + 2) - 1)
    # the stacked unsolved matrix has the same rank
    s = np.linalg.svd(ops.stacked(), compute_uv=False)
    assert np.all((s > 1e-10 * s[:, :1]).sum(1) == space.n_local - 1)


def test_linear_gives_constant_gradient():
    space = WeakSpace(build_structured(4), 0)
    ops = build_operators(space)
    g = weak_gradient_at(ops, interpolate_Qh(space, lambda x: x[..., 0]).local(),
                         pq.element_points(space.mesh, pq.tri_quadrature(3)))
    assert np.abs(g[..., 0] - 1).max() <= 1e-12 and np.abs(g[..., 1]).max() <= 1e-12


def test_quadratic_k1():
    space = WeakSpace(build_structured(4), 1)
    ops = build_operators(space)
    x = pq.element_points(space.mesh, pq.tri_quadrature(5))
    g = weak_gradient_at(ops, interpolate_Qh(space, lambda x: x[..., 0] ** 2).local(), x)
    assert np.abs(g[..., 0] - 2 * x[..., 0]).max() <= 1e-11 and np.abs(g[..., 1]).max() <= 1e-11


@pytest.mark.parametrize("k", [0, 1, 2])
def test_polynomial_exactness(k):
    space = WeakSpace(build_structured(3), k)
    ops = build_operators(space)
    x = pq.element_points(space.mesh, pq.tri_quadrature(6))
    for d in range(k + 3):
        for b in range(d + 1):
            u, g = monomial(d - b, b)
            gw = weak_gradient_at(ops, interpolate_Qh(space, u, quad_degree=12).local(), x)
            assert np.abs(gw - g(x)).max() <= 1e-11, (d - b, b)


def test_zero_input_zero_gradient():
    ops = build_operators(WeakSpace(build_structured(2), 1))
    assert np.all(apply(ops, np.zeros((8, ops.D.shape[2]))) == 0)


def test_commutes_with_gradient_projection():
    """Two code paths for ||grad_w Q_h u - grad u||_h and ||P^1 grad u - grad u||_h."""
    u = lambda x: np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])
    gu = lambda x: np.pi * np.stack((np.cos(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1]),
                                     np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])), -1)
    space = WeakSpace(build_structured(8), 0)
    ops = build_operators(space)
    rule = pq.tri_quadrature(10)
    x = pq.element_points(space.mesh, rule)
    w = pq.element_weights(space.mesh, rule)
    gw = weak_gradient_at(ops, interpolate_Qh(space, u, quad_degree=12).local(), x)
    basis = pq.TriBasis.for_mesh(space.mesh, 1)
    proj = np.stack([(basis.eval(x) * pq.l2_project_tri(lambda y, d=d: gu(y)[..., d], space.mesh, 1,
                                                        quad_degree=12)[:, None]).sum(-1)
                     for d in range(2)], -1)
    e1 = np.sqrt((w[..., None] * (gw - gu(x)) ** 2).sum())
    e2 = np.sqrt((w[..., None] * (proj - gu(x)) ** 2).sum())
    assert abs(e1 - e2) <= 1e-12
    assert np.abs(gw - proj).max() <= 1e-10 * np.abs(proj).max()


@given(st.integers(0, 1), st.integers(0, 2**31 - 1), st.floats(0.5, 3.0))
def test_basis_scaling_invariance(k, seed, factor):
    rng = np.random.default_rng(seed)
    mesh = build_structured(2)
    c = rng.standard_normal(6)
    u = lambda x: (c[0] + c[1] * x[..., 0] + c[2] * x[..., 1] ** 2 + c[3] * np.sin(3 * x[..., 0] * x[..., 1])
                   + c[4] * x[..., 0] ** 3 + c[5] * np.exp(x[..., 1]))
    x = pq.element_points(mesh, pq.tri_quadrature(4))
    out = []
    for s in (1.0, factor):
        space = WeakSpace(mesh, k, basis_scale=s)
        ops = build_operators(space)
        out.append(weak_gradient_at(ops, interpolate_Qh(space, u, quad_degree=12).local(), x))
    assert np.abs(out[0] - out[1]).max() <= 1e-11 * max(1, np.abs(out[0]).max())


def test_defining_relation_across_levels(rng):
    for mesh in mesh_series(1, 4):
        space = WeakSpace(mesh, 1)
        ops = build_operators(space)
        v = rng.standard_normal((mesh.num_elements, space.n_local))
        assert weak_gradient_residual(space, ops, v).max() <= 1e-11


def test_flipped_sign_breaks_relation(rng):
    space = WeakSpace(build_structured(2), 0)
    signs = space.mesh.element_edge_signs.copy()
    signs[3, 1] *= -1
    ops = build_operators(space, signs=signs)
    v = rng.standard_normal((space.mesh.num_elements, space.n_local))
    res = weak_gradient_residual(space, ops, v)
    assert res[3] > 1e-3
    assert np.delete(res, 3).max() <= 1e-11
