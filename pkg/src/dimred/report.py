"""Reconstruction of the space-time field and error diagnostics."""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .ivp import Trajectory
from .numerics import Grid, trapezoid_weights
from .reduction import Projector
from .tensor_basis import TensorBasis

MISSING = "NA"
BINARY_MAGIC = b"SHD1"


@dataclass
class SolutionField:
    """Computed solution on (x, x_2, ..., x_d, t); NaN marks depths past a blow-up."""

    values: np.ndarray
    grid: Grid
    cutoffs: tuple[int, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def reached(self) -> int:
        """Number of x nodes with a computed solution."""
        finite = np.isfinite(self.values.reshape(self.values.shape[0], -1)).all(axis=1)
        return int(np.argmin(finite)) if not finite.all() else finite.size


@dataclass
class ErrorReport:
    relative_l2: float
    relative_l2_full: float
    relative_linf: float
    pointwise_error: np.ndarray = field(repr=False)
    report_time: float = 0.0
    runtime_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "relative_l2": self.relative_l2,
            "relative_l2_full": self.relative_l2_full,
            "relative_linf": self.relative_linf,
            "report_time": self.report_time,
        }


def reconstruct(traj: Trajectory, basis: TensorBasis | Projector, grid: Grid | None = None) -> SolutionField:
    """Evaluate the truncated expansion at every reached depth node.

    ``basis`` is a TensorBasis (then ``grid`` is required) or a Projector
    that already holds the sampled tables.
    """
    if isinstance(basis, Projector):
        projector = basis
    else:
        if grid is None:
            raise ValueError("reconstruct needs a grid together with a tensor basis")
        projector = Projector(basis, grid)
    grid = projector.grid
    if not np.allclose(traj.x, grid.x_axis[: traj.x.size], rtol=0.0, atol=1e-12):
        raise ValueError("trajectory depths do not match the grid x axis")
    vals = np.full(grid.shape, np.nan)
    for i, u in enumerate(traj.u):
        vals[i] = projector.synthesize(u)
    return SolutionField(vals, grid, projector.tb.index_set.cutoffs,
                         {"integrator": traj.method, "blowup_depth": traj.blowup_depth})


def true_field(true_fn: Callable[..., np.ndarray], grid: Grid) -> np.ndarray:
    mesh = np.ix_(grid.x_axis, *grid.cylinder_axes)
    return np.broadcast_to(true_fn(*mesh), grid.shape).astype(float)


def _l2(values: np.ndarray, axes: list[np.ndarray]) -> float:
    out = values**2
    for a in axes:
        out = np.tensordot(out, trapezoid_weights(a), axes=([0], [0]))
    return float(np.sqrt(out))


def relative_error(comp: SolutionField, true_fn: Callable[..., np.ndarray] | None,
                   report_time: float, runtime_seconds: float = 0.0) -> ErrorReport:
    """Relative L2 (t <= report_time and full T) and sup-norm errors.

    Missing depths (after blow-up) count as zero solution so the error
    reflects the lost region instead of hiding it.
    """
    if true_fn is None:
        raise ValueError("relative error needs a true solution")
    grid = comp.grid
    if not 0 < report_time <= grid.final_time + 1e-12:
        raise ValueError("report time must lie in (0, T]")
    exact = true_field(true_fn, grid)
    diff = np.where(np.isfinite(comp.values), comp.values, 0.0) - exact
    nt = int(np.searchsorted(grid.t_axis, report_time + 1e-12 * grid.final_time, side="right"))
    axes = [grid.x_axis, *grid.transverse]
    restricted = axes + [grid.t_axis[:nt]]
    full = axes + [grid.t_axis]
    rel = _l2(diff[..., :nt], restricted) / _l2(exact[..., :nt], restricted)
    rel_full = _l2(diff, full) / _l2(exact, full)
    scale = np.abs(exact[..., :nt]).max()
    pointwise = np.abs(diff[..., :nt]) / scale
    return ErrorReport(rel, rel_full, float(pointwise.max()), pointwise, float(report_time), runtime_seconds)


def depth_profile(comp: SolutionField, true_fn, report_time: float) -> list[tuple[float, float]]:
    """Relative L2 error over (a, x_bar) x cylinder x (0, T') for each x_bar node."""
    grid = comp.grid
    exact = true_field(true_fn, grid)
    diff = np.where(np.isfinite(comp.values), comp.values, 0.0) - exact
    nt = int(np.searchsorted(grid.t_axis, report_time + 1e-12 * grid.final_time, side="right"))
    rows = []
    for i in range(1, grid.x_axis.size):
        axes = [grid.x_axis[: i + 1], *grid.transverse, grid.t_axis[:nt]]
        rows.append((float(grid.x_axis[i]), _l2(diff[: i + 1, ..., :nt], axes) / _l2(exact[: i + 1, ..., :nt], axes)))
    return rows


# -- serialization ---------------------------------------------------------

def atomic_write(path: str | os.PathLike, data: bytes | str):
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return MISSING if not np.isfinite(v) else repr(float(v))


def field_csv(comp: SolutionField, true_fn=None) -> str:
    """CSV text: x, [x_2...], t, u_comp[, u_true, abs_err]."""
    grid = comp.grid
    names = ["x"] + [f"x{i}" for i in range(2, grid.dim + 1)] + ["t", "u_comp"]
    if grid.dim == 2:
        names[1] = "y"
    exact = true_field(true_fn, grid) if true_fn is not None else None
    if exact is not None:
        names += ["u_true", "abs_err"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    axes = [grid.x_axis, *grid.cylinder_axes]
    for idx in np.ndindex(grid.shape):
        uc = comp.values[idx]
        row = [repr(float(a[i])) for a, i in zip(axes, idx)] + [_fmt(uc)]
        if exact is not None:
            ue = exact[idx]
            row += [_fmt(ue), _fmt(abs(uc - ue))]
        w.writerow(row)
    return buf.getvalue()


def field_binary(comp: SolutionField) -> bytes:
    """``SHD1`` dump: magic, uint32 rank, uint64 dims, axis nodes, values.

    All numbers little-endian; values are float64 in C order with NaN for
    missing depths.
    """
    grid = comp.grid
    axes = [grid.x_axis, *grid.cylinder_axes]
    parts = [BINARY_MAGIC, struct.pack("<I", len(axes)), struct.pack(f"<{len(axes)}Q", *[a.size for a in axes])]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in axes]
    parts.append(np.ascontiguousarray(comp.values, dtype="<f8").tobytes())
    return b"".join(parts)


def read_field_binary(data: bytes) -> tuple[list[np.ndarray], np.ndarray]:
    if data[:4] != BINARY_MAGIC:
        raise ValueError("not an SHD1 field dump")
    (rank,) = struct.unpack_from("<I", data, 4)
    dims = struct.unpack_from(f"<{rank}Q", data, 8)
    off = 8 + 8 * rank
    axes = []
    for n in dims:
        axes.append(np.frombuffer(data, "<f8", n, off).copy())
        off += 8 * n
    count = int(np.prod(dims))
    values = np.frombuffer(data, "<f8", count, off).reshape(dims).copy()
    if off + 8 * count != len(data):
        raise ValueError("trailing bytes in SHD1 dump")
    return axes, values


def format_report(entries: dict) -> str:
    """Structured ``key: value`` text, one entry per line, in insertion order."""
    lines = []
    for k, v in entries.items():
        if isinstance(v, float):
            v = _fmt(v)
        elif isinstance(v, (list, tuple)):
            v = " ".join(str(x) for x in v)
        elif v is None:
            v = MISSING
        lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"
