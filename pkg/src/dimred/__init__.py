"""Dimensional reduction solver for the sideways (lateral Cauchy) heat problem.

The unknown field is expanded in a tensor basis over the measurement
cylinder, which turns the PDE into an ODE system for the Fourier
coefficients marched along the depth axis.
"""

from .basis1d import Basis1D, BasisConditioningError, Interval, build_basis, eval_basis
from .ivp import ReducedState, ReducedSystem, Trajectory, integrate, rhs
from .numerics import CylinderField, Grid, integrate_cylinder, sample, trapezoid_weights
from .problems import NoiseSpec, ProblemDefinition, add_noise, builtin, ill_posedness_demo
from .reduction import (CauchyCoefficients, Projector, assemble_coupling, knee_index, phi_misfit,
                        project_data, project_nonlinearity, select_cutoff)
from .report import ErrorReport, SolutionField, reconstruct, relative_error
from .solver import SolveResult, solve
from .tensor_basis import MultiIndexSet, TensorBasis, lineup_index, multi_index

__version__ = "0.1.0"
