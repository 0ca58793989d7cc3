"""Marching the reduced first-order system along the depth axis.

The state is ``w = [u_1..u_K, u_1'..u_K']`` and obeys

    w' = [u', S u - F(x, u, u')],    w(a) = [g, q].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .reduction import Nonlinearity, NonFiniteNonlinearity, Projector, project_nonlinearity

INTEGRATORS = ("rk4", "rk45", "euler")

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


class BlowUp(Exception):
    """Internal signal: the march produced a non-finite state."""


@dataclass
class ReducedState:
    x: float
    u_coeffs: np.ndarray
    du_coeffs: np.ndarray

    def __post_init__(self):
        self.u_coeffs = np.asarray(self.u_coeffs, dtype=float)
        self.du_coeffs = np.asarray(self.du_coeffs, dtype=float)
        if self.u_coeffs.shape != self.du_coeffs.shape:
            raise ValueError("u and u' coefficient vectors differ in length")

    @classmethod
    def from_vector(cls, x: float, w: np.ndarray) -> "ReducedState":
        k = w.size // 2
        return cls(x, w[:k].copy(), w[k:].copy())

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u_coeffs, self.du_coeffs])

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u_coeffs)) and np.all(np.isfinite(self.du_coeffs)))


@dataclass
class Trajectory:
    """Coefficient states at the x-grid nodes reached by the march.

    ``blowup_depth`` is the last node reached before a non-finite state, or
    None when the whole grid was covered.
    """

    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    method: str
    blowup_depth: float | None = None

    @property
    def complete(self) -> bool:
        return self.blowup_depth is None

    @property
    def states(self) -> list[ReducedState]:
        return [ReducedState(x, u, du) for x, u, du in zip(self.x, self.u, self.du)]


class ReducedSystem:
    """Right-hand side of the reduced ODE system.

    ``F`` may be None for the linear problem.
    """

    def __init__(self, coupling: np.ndarray, F: Nonlinearity | None = None, projector: Projector | None = None):
        coupling = np.asarray(coupling, dtype=float)
        if coupling.ndim != 2 or coupling.shape[0] != coupling.shape[1]:
            raise ValueError("coupling matrix must be square")
        if F is not None and projector is None:
            raise ValueError("a nonlinear system needs a projector")
        if projector is not None and projector.size != coupling.shape[0]:
            raise ValueError("coupling size does not match the projector basis")
        self.coupling = coupling
        self.F = F
        self.projector = projector

    @property
    def size(self) -> int:
        return self.coupling.shape[0]

    def __call__(self, x: float, w: np.ndarray) -> np.ndarray:
        k = self.size
        u, du = w[:k], w[k:]
        acc = self.coupling @ u
        if self.F is not None:
            acc = acc - project_nonlinearity(self.F, x, u, du, projector=self.projector)
        return np.concatenate([du, acc])


def rhs(x: float, state: ReducedState, system: ReducedSystem) -> ReducedState:
    """Derivative of ``state`` as a ReducedState ``(u', u'')``."""
    if not state.finite:
        raise NonFiniteNonlinearity(f"non-finite state at x={x:g}")
    return ReducedState.from_vector(x, system(x, state.vector()))


def _rk4_step(f, x, w, h):
    k1 = f(x, w)
    k2 = f(x + 0.5 * h, w + 0.5 * h * k1)
    k3 = f(x + 0.5 * h, w + 0.5 * h * k2)
    k4 = f(x + h, w + h * k3)
    return w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _euler_step(f, x, w, h):
    return w + h * f(x, w)


def _dopri_step(f, x, w, h, k1):
    ks = [k1]
    for i in range(1, 7):
        wi = w + h * sum(a * k for a, k in zip(_DP_A[i], ks))
        ks.append(f(x + _DP_C[i] * h, wi))
    w5 = w + h * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
    w4 = w + h * sum(b * k for b, k in zip(_DP_B4, ks) if b != 0.0)
    return w5, w5 - w4, ks[6]


def _rk45_interval(f, x0, x1, w, rtol, atol, h0):
    """Adaptive Dormand-Prince from x0 to exactly x1; returns (w, next h)."""
    x, h = x0, min(h0, x1 - x0)
    k1 = f(x, w)
    while x < x1:
        last = x + h >= x1 - 1e-14 * max(1.0, abs(x1))
        step = x1 - x if last else h
        w_new, err, k_last = _dopri_step(f, x, w, step, k1)
        if not np.all(np.isfinite(w_new)):
            raise BlowUp(x)
        scale = atol + rtol * np.maximum(np.abs(w), np.abs(w_new))
        e = float(np.sqrt(np.mean((err / scale) ** 2)))
        if e <= 1.0:
            x = x1 if last else x + step
            w, k1 = w_new, k_last
            h = step * min(5.0, max(0.2, 0.9 * e ** -0.2)) if e > 0 else 5.0 * step
        else:
            h = step * max(0.2, 0.9 * e ** -0.2)
            if h < 1e-12 * max(1.0, abs(x1)):
                raise BlowUp(x)
    return w, h


def march(f: Callable[[float, np.ndarray], np.ndarray], w0, x_grid, method: str = "rk4",
          rtol: float = 1e-6, atol: float = 1e-9) -> tuple[np.ndarray, int]:
    """Integrate ``w' = f(x, w)`` node to node over ``x_grid``.

    Returns the states at the nodes reached and the number of nodes reached
    (less than ``len(x_grid)`` after a blow-up).
    """
    if method not in INTEGRATORS:
        raise ValueError(f"unknown integrator {method!r}; choose from {INTEGRATORS}")
    x_grid = np.asarray(x_grid, dtype=float)
    w = np.array(w0, dtype=float)
    out = np.empty((x_grid.size, w.size))
    out[0] = w
    h_adapt = x_grid[1] - x_grid[0] if x_grid.size > 1 else 0.0
    step = {"rk4": _rk4_step, "euler": _euler_step}.get(method)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(x_grid.size - 1):
            x0, x1 = x_grid[i], x_grid[i + 1]
            try:
                if method == "rk45":
                    w, h_adapt = _rk45_interval(f, x0, x1, w, rtol, atol, h_adapt)
                else:
                    w = step(f, x0, w, x1 - x0)
            except (BlowUp, NonFiniteNonlinearity):
                return out[: i + 1], i + 1
            if not np.all(np.isfinite(w)):
                return out[: i + 1], i + 1
            out[i + 1] = w
    return out, x_grid.size


def integrate(system: ReducedSystem, initial: ReducedState, x_grid, method: str = "rk4",
              rtol: float = 1e-6, atol: float = 1e-9) -> Trajectory:
    """March ``system`` from ``initial`` (at the first node) across ``x_grid``."""
    x_grid = np.asarray(x_grid, dtype=float)
    if not np.isclose(initial.x, x_grid[0]):
        raise ValueError(f"initial state at x={initial.x} but grid starts at {x_grid[0]}")
    if initial.u_coeffs.size != system.size:
        raise ValueError("initial state size does not match the system")
    W, reached = march(system, initial.vector(), x_grid, method, rtol, atol)
    k = system.size
    blowup = None if reached == x_grid.size else float(x_grid[reached - 1])
    return Trajectory(x_grid[:reached].copy(), W[:, :k].copy(), W[:, k:].copy(), method, blowup)
