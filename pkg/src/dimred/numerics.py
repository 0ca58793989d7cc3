"""Uniform grids and composite trapezoidal quadrature over the cylinder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .basis1d import Interval

DEFAULT_NX = 201
DEFAULT_NT = 601
DEFAULT_NY = 1001


def uniform_nodes(interval: Interval, count: int) -> np.ndarray:
    if count < 2:
        raise ValueError(f"a uniform partition needs at least 2 nodes, got {count}")
    return np.linspace(interval.lo, interval.hi, int(count))


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights for (possibly non-uniform) ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise ValueError("need a 1-D array of at least 2 nodes")
    dx = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor grid: depth axis x, transverse axes x_2..x_d, time axis t.

    ``transverse`` is empty when d = 1.
    """

    x_interval: Interval
    transverse_intervals: tuple[Interval, ...]
    final_time: float
    x_axis: np.ndarray
    transverse: tuple[np.ndarray, ...]
    t_axis: np.ndarray

    @classmethod
    def uniform(
        cls,
        x_interval: Interval,
        transverse_intervals: Sequence[Interval],
        final_time: float,
        nx: int = DEFAULT_NX,
        n_transverse: Sequence[int] | int | None = None,
        nt: int = DEFAULT_NT,
    ) -> "Grid":
        transverse_intervals = tuple(transverse_intervals)
        if n_transverse is None:
            n_transverse = [DEFAULT_NY] * len(transverse_intervals)
        elif np.isscalar(n_transverse):
            n_transverse = [int(n_transverse)] * len(transverse_intervals)
        if len(n_transverse) != len(transverse_intervals):
            raise ValueError("one node count per transverse axis is required")
        time = Interval(0.0, final_time)
        return cls(
            x_interval,
            transverse_intervals,
            float(final_time),
            uniform_nodes(x_interval, nx),
            tuple(uniform_nodes(iv, n) for iv, n in zip(transverse_intervals, n_transverse)),
            uniform_nodes(time, nt),
        )

    @property
    def dim(self) -> int:
        return 1 + len(self.transverse)

    @property
    def time_interval(self) -> Interval:
        return Interval(0.0, self.final_time)

    @property
    def cylinder_axes(self) -> tuple[np.ndarray, ...]:
        return (*self.transverse, self.t_axis)

    @property
    def cylinder_intervals(self) -> tuple[Interval, ...]:
        return (*self.transverse_intervals, self.time_interval)

    @property
    def cylinder_shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.cylinder_axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.x_axis.size, *self.cylinder_shape)

    @property
    def steps(self) -> dict[str, float]:
        out = {"dx": self.x_axis[1] - self.x_axis[0], "dt": self.t_axis[1] - self.t_axis[0]}
        for i, ax in enumerate(self.transverse, start=2):
            out[f"dx{i}"] = ax[1] - ax[0]
        return out

    def cylinder_weights(self) -> list[np.ndarray]:
        return [trapezoid_weights(a) for a in self.cylinder_axes]

    def cylinder_mesh(self) -> tuple[np.ndarray, ...]:
        """Open (broadcastable) mesh of the cylinder coordinates, time last."""
        return tuple(np.ix_(*self.cylinder_axes))

    def describe(self) -> dict:
        return {
            "x": [self.x_interval.lo, self.x_interval.hi, int(self.x_axis.size)],
            "transverse": [[iv.lo, iv.hi, int(a.size)] for iv, a in zip(self.transverse_intervals, self.transverse)],
            "t": [0.0, self.final_time, int(self.t_axis.size)],
        }


@dataclass(frozen=True, eq=False)
class CylinderField:
    """Samples of a function on the cylinder grid, indexed (x_2, ..., x_d, t)."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.cylinder_shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.cylinder_shape}")
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "CylinderField":
        return CylinderField(values, self.grid)


def integrate_cylinder(f: CylinderField) -> float:
    """Composite trapezoid rule over every cylinder axis."""
    if not isinstance(f, CylinderField):
        raise TypeError("integrate_cylinder expects a CylinderField")
    out = f.values
    for w in f.grid.cylinder_weights():
        out = np.tensordot(out, w, axes=([0], [0]))
    return float(out)


def sample(fn: Callable[..., np.ndarray], grid: Grid) -> CylinderField:
    """Evaluate ``fn(x_2, ..., x_d, t)`` at every cylinder node.

    ``fn`` receives open-mesh coordinate arrays and must broadcast.
    """
    vals = np.broadcast_to(np.asarray(fn(*grid.cylinder_mesh()), dtype=float), grid.cylinder_shape)
    return CylinderField(np.array(vals), grid)
