"""Sharp discrete embedding constant max ||v0|| / ||grad_w v||_h over S_h^0, k=0.

Random sampling underestimates it badly; here it comes from the generalized
eigenproblem G v = lambda M0 v with G the weak-gradient Gram matrix.
The limit should approach 1 / (pi sqrt 2), the Poincare constant of the unit square.
"""
import numpy as np
import scipy.linalg as sla

from wgfem.assembly import CoefficientSet, assemble
from wgfem.error_analysis import interior_gram
from wgfem.mesh import build_structured
from wgfem.space import WeakSpace, project_boundary
from wgfem.weak_gradient import build_operators


def constant(n):
    space = WeakSpace(build_structured(n), 0)
    ops = build_operators(space)
    s = assemble(space, ops, CoefficientSet(convection=False),
                 project_boundary(space, lambda x: np.zeros(x.shape[:-1])))
    G = s.matrix.toarray()
    M0 = np.zeros_like(G)
    pos = np.searchsorted(s.free, space.element_dofs[:, 0])
    M0[pos, pos] = interior_gram(space)[:, 0, 0]
    # M0 is singular on the trace block; the largest ratio is the top eigenvalue of M0 x = mu G x
    mu = sla.eigh(M0, G, eigvals_only=True, subset_by_index=[G.shape[0] - 1, G.shape[0] - 1])[0]
    return np.sqrt(mu)


if __name__ == "__main__":
    for n in (4, 8, 16, 32):
        print(f"n={n:3d}  C={constant(n):.6f}")
    print(f"limit  {1 / (np.pi * np.sqrt(2)):.6f}")
