"""Projection of the PDE onto the truncated tensor basis.

Coefficient vectors are always in line-up order (see ``tensor_basis``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import CylinderField, Grid
from .tensor_basis import MultiIndexSet, TensorBasis

log = logging.getLogger(__name__)

# F(point, t, u, u_x, grad) with point = (x, x_2, ..., x_d) and grad the
# transverse gradient (x_2, ..., x_d partials); all arguments broadcast.
Nonlinearity = Callable[..., np.ndarray]


class NonFiniteNonlinearity(FloatingPointError):
    """The nonlinearity produced NaN or inf on the reconstructed state."""


@dataclass(frozen=True)
class CauchyCoefficients:
    g_coeffs: np.ndarray
    q_coeffs: np.ndarray

    def __post_init__(self):
        if np.shape(self.g_coeffs) != np.shape(self.q_coeffs):
            raise ValueError("g and q coefficient vectors differ in length")

    @property
    def initial_state(self) -> np.ndarray:
        return np.concatenate([self.g_coeffs, self.q_coeffs])


class Projector:
    """Basis tables sampled on a grid; the single quadrature path for projections.

    ``analyze`` maps a cylinder field to line-up coefficients with the
    composite trapezoid rule, ``synthesize`` evaluates a truncated expansion
    (optionally differentiated along chosen axes) on the grid.
    """

    def __init__(self, tb: TensorBasis, grid: Grid):
        if grid.cylinder_intervals != tuple(b.interval for b in tb.axes):
            raise ValueError("tensor basis intervals do not match the grid cylinder")
        self.tb = tb
        self.grid = grid
        cut = tb.index_set.cutoffs
        self._tables = []
        for b, nodes, n in zip(tb.axes, grid.cylinder_axes, cut):
            self._tables.append([b.values(nodes, d, n) for d in (0, 1, 2)])
        self._weighted = [tab[0] * w for tab, w in zip(self._tables, grid.cylinder_weights())]

    @property
    def size(self) -> int:
        return self.tb.size

    def analyze(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.grid.cylinder_shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.grid.cylinder_shape}")
        out = values
        for w in self._weighted:
            out = np.tensordot(out, w, axes=([0], [1]))
        return out.transpose().ravel()

    def synthesize(self, coeffs: np.ndarray, derivs: Sequence[int] | None = None) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.size,):
            raise ValueError(f"expected {self.size} coefficients, got shape {coeffs.shape}")
        derivs = derivs or (0,) * self.tb.dim
        out = coeffs.reshape(self.tb.index_set.state_shape).transpose()
        for tab, d in zip(self._tables, derivs):
            out = np.tensordot(out, tab[d], axes=([0], [0]))
        return out

    def truncate(self, cutoffs: Sequence[int]) -> "Projector":
        """Projector onto the leading ``cutoffs`` members, sharing sampled tables."""
        index_set = MultiIndexSet(tuple(cutoffs))
        if index_set == self.tb.index_set:
            return self
        new = Projector.__new__(Projector)
        new.tb = TensorBasis(self.tb.axes, index_set)
        new.grid = self.grid
        cut = index_set.cutoffs
        if any(c > t.shape[0] for c, t in zip(cut, self._weighted)):
            raise ValueError(f"cutoffs {cut} exceed the sampled basis")
        new._tables = [[t[:n] for t in tabs] for tabs, n in zip(self._tables, cut)]
        new._weighted = [w[:n] for w, n in zip(self._weighted, cut)]
        return new

    def transverse_gradient(self, coeffs) -> tuple[np.ndarray, ...]:
        dim = self.tb.dim
        return tuple(
            self.synthesize(coeffs, [1 if j == i else 0 for j in range(dim)]) for i in range(dim - 1)
        )


def _check_grid(field: CylinderField, tb: TensorBasis):
    if field.grid.cylinder_intervals != tuple(b.interval for b in tb.axes):
        raise ValueError("field grid and tensor basis live on different cylinders")


def project_data(g: CylinderField, q: CylinderField, tb: TensorBasis,
                 projector: Projector | None = None) -> CauchyCoefficients:
    """Fourier coefficients of the Cauchy data on the truncated basis."""
    _check_grid(g, tb)
    _check_grid(q, tb)
    if g.grid is not q.grid and g.grid.cylinder_shape != q.grid.cylinder_shape:
        raise ValueError("g and q are sampled on different grids")
    pr = projector or Projector(tb, g.grid)
    return CauchyCoefficients(pr.analyze(g.values), pr.analyze(q.values))


def assemble_coupling(tb: TensorBasis) -> np.ndarray:
    """Galerkin matrix ``s[m, n] = int (d_t P_n - Lap_x~ P_n) P_m``.

    Built from the exact 1-D differentiation matrices: with orthonormal axis
    bases, ``int Psi_n' Psi_m = D1[n, m]`` and ``int Psi_n'' Psi_m = D2[n, m]``.
    """
    cut = tb.index_set.cutoffs
    # state axes are ordered (t, x_d, ..., x_2)
    state_axes = list(reversed(range(tb.dim)))
    eyes = [np.eye(c) for c in cut]

    def kron_with(axis, mat):
        out = np.ones((1, 1))
        for a in state_axes:
            out = np.kron(out, mat if a == axis else eyes[a])
        return out

    t_axis = tb.dim - 1
    d1 = tb.time_axis.diff1[: cut[t_axis], : cut[t_axis]]
    S = kron_with(t_axis, d1.T)
    for i, b in enumerate(tb.transverse_axes):
        d2 = b.diff2[: cut[i], : cut[i]]
        S -= kron_with(i, d2.T)
    return S


def project_nonlinearity(F: Nonlinearity, x: float, coeffs, dcoeffs, tb: TensorBasis | None = None,
                         grid: Grid | None = None, projector: Projector | None = None) -> np.ndarray:
    """Project ``F`` evaluated on the reconstructed state onto each ``P_m``."""
    pr = projector or Projector(tb, grid)
    grid = pr.grid
    u = pr.synthesize(coeffs)
    ux = pr.synthesize(dcoeffs)
    grad = pr.transverse_gradient(coeffs)
    mesh = grid.cylinder_mesh()
    point = (float(x), *mesh[:-1])
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(F(point, mesh[-1], u, ux, grad), dtype=float), grid.cylinder_shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteNonlinearity(f"non-finite nonlinearity at depth x={x:g}")
    return pr.analyze(vals)


def phi_misfit(g: CylinderField, cutoffs: Sequence[int], projector: Projector | None = None) -> float:
    """Relative sup-norm distance between ``g`` and its truncated expansion.

    ``projector`` may hold a larger basis; only the leading ``cutoffs``
    members of each axis are used.
    """
    gmax = float(np.abs(g.values).max())
    if gmax == 0.0:
        raise ValueError("data g vanishes identically; misfit undefined")
    if projector is None:
        pr = Projector(TensorBasis.build(g.grid.cylinder_intervals, cutoffs), g.grid)
    else:
        pr = projector.truncate(cutoffs)
    resid = g.values - pr.synthesize(pr.analyze(g.values))
    return float(np.abs(resid).max() / gmax)


def knee_index(ns: Sequence[float], phis: Sequence[float]) -> int:
    """Position of maximum curvature of a decreasing L-shaped curve.

    Both axes are scaled to [0, 1] before measuring curvature so the result
    does not depend on the units of either axis.
    """
    ns = np.asarray(ns, dtype=float)
    phis = np.asarray(phis, dtype=float)
    if ns.size < 3:
        return int(np.argmin(phis))
    x = (ns - ns[0]) / (ns[-1] - ns[0])
    span = phis.max() - phis.min()
    if span == 0.0:
        return 0
    y = (phis - phis.min()) / span
    y1 = np.gradient(y, x)
    y2 = np.gradient(y1, x)
    kappa = y2 / (1.0 + y1**2) ** 1.5
    return int(np.argmax(kappa))


@dataclass
class CutoffSelection:
    cutoffs: tuple[int, ...]
    phi: float
    threshold: float
    reached: bool
    sweeps: list[dict] = field(default_factory=list)


def phi_sweep(g: CylinderField, axis: int, values: Sequence[int], base: Sequence[int],
              projector: Projector | None = None) -> np.ndarray:
    """phi along one cutoff axis with the others held at ``base``."""
    if projector is None:
        top = list(base)
        top[axis] = max(values)
        projector = Projector(TensorBasis.build(g.grid.cylinder_intervals, top), g.grid)
    out = []
    for n in values:
        cut = list(base)
        cut[axis] = int(n)
        out.append(phi_misfit(g, cut, projector))
    return np.array(out)


def select_cutoff(g: CylinderField, max_cutoffs: Sequence[int], threshold: float = 0.05,
                  min_cutoff: int = 1) -> CutoffSelection:
    """Data-driven cutoffs from the misfit ``phi``.

    Axes are swept one at a time (time axis first), the others held at their
    current values, which start at ``max_cutoffs``. On each axis the smallest
    cutoff with ``phi <= threshold`` is kept; if the threshold is out of
    reach the knee of that sweep is used and ``reached`` is False.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    max_cutoffs = tuple(int(c) for c in max_cutoffs)
    if len(max_cutoffs) != g.grid.dim:
        raise ValueError(f"expected {g.grid.dim} cutoffs, got {len(max_cutoffs)}")
    projector = Projector(TensorBasis.build(g.grid.cylinder_intervals, max_cutoffs), g.grid)
    current = list(max_cutoffs)
    reached = True
    sweeps = []
    for axis in reversed(range(len(current))):
        lo = min(min_cutoff, max_cutoffs[axis])
        ns = list(range(lo, max_cutoffs[axis] + 1))
        phis = phi_sweep(g, axis, ns, current, projector)
        below = np.flatnonzero(phis <= threshold)
        if below.size:
            pick = ns[below[0]]
        else:
            pick = ns[knee_index(ns, phis)]
            reached = False
            log.warning("phi threshold %g not reached on axis %d; using knee N=%d", threshold, axis, pick)
        current[axis] = pick
        sweeps.append({"axis": axis, "cutoffs": ns, "phi": phis.tolist(), "chosen": pick})
    phi = phi_misfit(g, current, projector)
    return CutoffSelection(tuple(current), phi, threshold, reached and phi <= threshold, sweeps)
