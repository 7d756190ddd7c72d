"""Weak Galerkin finite elements for 2D convection-diffusion problems."""
from .assembly import CoefficientSet, DiscreteSystem, assemble, quadratic_form
from .error_analysis import (ConvergenceReport, ErrorRecord, error_h1w, error_l2, error_linf,
                             error_superclose, rates)
from .mesh import Mesh, Rectangle, build_structured, mesh_series, refine_uniform
from .problems import ProblemSpec, builtin_problems, get_problem
from .solver import SolveReport, solve
from .space import WeakFunction, WeakSpace, dof_count, interpolate_Qh, project_boundary
from .study import RunConfig, run_convergence
from .weak_gradient import apply, build_operator, build_operators, kernel_check

__version__ = "0.1.0"
