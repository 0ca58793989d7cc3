"""Product basis over the cylinder (transverse space x time) and index bookkeeping.

Multi-indices are tuples ``(n_2, ..., n_d, n_t)`` with 1-based entries. The
line-up (flattening) order is time-major, then the transverse axes from x_d
down to x_2:

    n = (n_t - 1) N_2...N_d + (n_d - 1) N_2...N_{d-1} + ... + n_2,

so a coefficient vector reshaped C-order to ``(N_t, N_d, ..., N_2)`` is
indexed by the reversed multi-index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .basis1d import Basis1D, Interval, build_basis

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class MultiIndexSet:
    """Full tensor box of multi-indices; ``cutoffs = (N_2, ..., N_d, N_t)``."""

    cutoffs: tuple[int, ...]

    def __post_init__(self):
        cut = tuple(int(c) for c in self.cutoffs)
        if not cut or any(c < 1 for c in cut):
            raise ValueError(f"cutoffs must be positive integers, got {self.cutoffs!r}")
        object.__setattr__(self, "cutoffs", cut)

    @property
    def dim(self) -> int:
        return len(self.cutoffs)

    @property
    def size(self) -> int:
        return int(np.prod(self.cutoffs))

    @property
    def state_shape(self) -> tuple[int, ...]:
        """C-order shape whose flattening follows the line-up index."""
        return tuple(reversed(self.cutoffs))

    def __len__(self) -> int:
        return self.size

    def __contains__(self, n) -> bool:
        return len(n) == self.dim and all(1 <= k <= c for k, c in zip(n, self.cutoffs))

    def __iter__(self) -> Iterator[MultiIndex]:
        for k in range(1, self.size + 1):
            yield multi_index(k, self.cutoffs)

    def lineup(self, n: Sequence[int]) -> int:
        return lineup_index(n, self.cutoffs)

    def multi_index(self, k: int) -> MultiIndex:
        return multi_index(k, self.cutoffs)


def lineup_index(n: Sequence[int], cutoffs: Sequence[int]) -> int:
    """1-based line-up position of the multi-index ``n``."""
    n, cutoffs = tuple(n), tuple(cutoffs)
    if len(n) != len(cutoffs):
        raise ValueError(f"multi-index {n} does not match cutoffs {cutoffs}")
    for k, c in zip(n, cutoffs):
        if not 1 <= k <= c:
            raise IndexError(f"multi-index {n} outside cutoffs {cutoffs}")
    pos, stride = 0, 1
    for k, c in zip(n, cutoffs):
        pos += (k - 1) * stride
        stride *= c
    return pos + 1


def multi_index(k: int, cutoffs: Sequence[int]) -> MultiIndex:
    """Inverse of ``lineup_index``."""
    cutoffs = tuple(cutoffs)
    size = int(np.prod(cutoffs))
    if not 1 <= k <= size:
        raise IndexError(f"line-up index {k} outside 1..{size}")
    rem, out = k - 1, []
    for c in cutoffs:
        rem, r = divmod(rem, c)
        out.append(r + 1)
    return tuple(out)


class TensorBasis:
    """``P_n(x_2, ..., x_d, t) = Psi_{n_t}(t) * prod_i Psi_{n_i}(x_i)``.

    ``axes`` lists one 1-D basis per transverse axis followed by the time
    axis basis on (0, T).
    """

    WHICH = ("value", "time_deriv", "transverse_laplacian", "transverse_gradient")

    def __init__(self, axes: Sequence[Basis1D], index_set: MultiIndexSet):
        axes = tuple(axes)
        if len(axes) != index_set.dim:
            raise ValueError("need one axis basis per cutoff")
        for b, c in zip(axes, index_set.cutoffs):
            if b.n_max < c:
                raise ValueError(f"axis basis holds {b.n_max} members, cutoff is {c}")
        self.axes = axes
        self.index_set = index_set

    @classmethod
    def build(cls, intervals: Sequence[Interval], cutoffs: Sequence[int]) -> "TensorBasis":
        """Build from cylinder intervals (transverse..., time) and cutoffs."""
        index_set = MultiIndexSet(tuple(cutoffs))
        return cls([build_basis(iv, c) for iv, c in zip(intervals, index_set.cutoffs)], index_set)

    @property
    def dim(self) -> int:
        return self.index_set.dim

    @property
    def size(self) -> int:
        return self.index_set.size

    @property
    def transverse_axes(self) -> tuple[Basis1D, ...]:
        return self.axes[:-1]

    @property
    def time_axis(self) -> Basis1D:
        return self.axes[-1]

    def eval_tensor(self, n: Sequence[int], xt: Sequence[float], t: float, which: str = "value"):
        """Evaluate ``P_n`` or a derivative combination at one cylinder point.

        ``which`` is one of ``value``, ``time_deriv``, ``transverse_laplacian``
        or ``transverse_gradient`` (the latter returns a length d-1 array).
        """
        n, xt = tuple(n), tuple(xt)
        if which not in self.WHICH:
            raise ValueError(f"unknown evaluation kind {which!r}")
        if n not in self.index_set:
            raise IndexError(f"multi-index {n} outside cutoffs {self.index_set.cutoffs}")
        if len(xt) != self.dim - 1:
            raise ValueError(f"expected {self.dim - 1} transverse coordinates, got {len(xt)}")
        coords = (*xt, t)
        for b, s in zip(self.axes, coords):
            if not b.interval.contains(s):
                raise ValueError(f"point {coords} outside the cylinder")

        def factors(deriv_axis=None, order=0):
            out = 1.0
            for i, (b, k, s) in enumerate(zip(self.axes, n, coords)):
                out *= b.eval(k, s, order if i == deriv_axis else 0)
            return out

        t_axis = self.dim - 1
        if which == "value":
            return factors()
        if which == "time_deriv":
            return factors(t_axis, 1)
        if which == "transverse_laplacian":
            return float(sum(factors(i, 2) for i in range(t_axis)))
        return np.array([factors(i, 1) for i in range(t_axis)])
