"""End-to-end dimensional reduction solve.

1. choose cutoffs (explicit or from the misfit of the data g),
2. project the Cauchy data onto the truncated basis,
3. march the reduced ODE system across the depth axis,
4. split the state into coefficients,
5. evaluate the truncated expansion on the grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

from .ivp import ReducedState, ReducedSystem, Trajectory, integrate
from .numerics import CylinderField, Grid, sample
from .problems import NoiseSpec, ProblemDefinition, add_noise
from .reduction import (CauchyCoefficients, CutoffSelection, Projector, assemble_coupling, project_data,
                        select_cutoff)
from .report import ErrorReport, SolutionField, reconstruct, relative_error
from .tensor_basis import TensorBasis

DEFAULT_PHI_THRESHOLD = 0.05
DEFAULT_MAX_CUTOFF = 20


@dataclass
class SolveResult:
    problem: ProblemDefinition
    grid: Grid
    cutoffs: tuple[int, ...]
    selection: CutoffSelection | None
    data: tuple[CylinderField, CylinderField]
    coefficients: CauchyCoefficients
    trajectory: Trajectory
    field: SolutionField
    errors: ErrorReport | None
    runtime_seconds: float


def noisy_data(problem: ProblemDefinition, grid: Grid, noise: NoiseSpec) -> tuple[CylinderField, CylinderField]:
    g = add_noise(sample(problem.g, grid), noise, stream=0)
    q = add_noise(sample(problem.q, grid), noise, stream=1)
    return g, q


def solve(problem: ProblemDefinition, grid: Grid | None = None, cutoffs: Sequence[int] | str | None = None,
          noise: NoiseSpec = NoiseSpec(), integrator: str = "rk4",
          phi_threshold: float = DEFAULT_PHI_THRESHOLD, max_cutoff: int = DEFAULT_MAX_CUTOFF,
          rtol: float = 1e-6, atol: float = 1e-9) -> SolveResult:
    """Run the full reconstruction for ``problem``.

    ``cutoffs`` may be a tuple ``(N_2, ..., N_d, N_t)``, ``"auto"``, or None
    for the problem's recommended values.
    """
    grid = grid or problem.grid()
    start = time.perf_counter()
    g, q = noisy_data(problem, grid, noise)

    selection = None
    if cutoffs is None:
        cutoffs = problem.cutoffs or "auto"
    if isinstance(cutoffs, str):
        if cutoffs != "auto":
            raise ValueError(f"cutoffs must be 'auto' or a sequence, got {cutoffs!r}")
        selection = select_cutoff(g, [max_cutoff] * grid.dim, phi_threshold)
        cutoffs = selection.cutoffs
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) != grid.dim:
        raise ValueError(f"expected {grid.dim} cutoffs, got {cutoffs}")

    tb = TensorBasis.build(grid.cylinder_intervals, cutoffs)
    projector = Projector(tb, grid)
    coeffs = project_data(g, q, tb, projector)
    system = ReducedSystem(assemble_coupling(tb), problem.nonlinearity, projector)
    initial = ReducedState(grid.x_axis[0], coeffs.g_coeffs, coeffs.q_coeffs)
    traj = integrate(system, initial, grid.x_axis, integrator, rtol, atol)
    field = reconstruct(traj, projector)
    runtime = time.perf_counter() - start

    errors = None
    if problem.true_solution is not None:
        errors = relative_error(field, problem.true_solution, problem.report_time, runtime)
    return SolveResult(problem, grid, cutoffs, selection, (g, q), coeffs, traj, field, errors, runtime)
