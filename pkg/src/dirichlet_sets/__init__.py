"""Dirichlet sets for fully nonlinear degenerate elliptic equations F(Hess u) = 0."""

__version__ = "0.1.0"

from .cones import ConeSet, catalog, edge_threshold, free_dim, ray_defect  # noqa: E402,F401
from .gridfield import GridField  # noqa: E402,F401
from .solver import SolveConfig, SolveReport, solve_dirichlet  # noqa: E402,F401
