"""Orthonormal polynomial-exponential basis on an interval.

The basis is the Gram-Schmidt orthonormalization of

    phi_k(s) = s**(k-1) * exp(s - c),   c = (lo + hi) / 2,   k = 1, 2, ...

in L2(lo, hi). Inner products of the raw family reduce to the moments
``M_p = int s**p exp(2 (s - c)) ds``, which obey the integration-by-parts
recurrence

    M_p = [s**p exp(2 (s - c)) / 2]_lo^hi - (p / 2) M_{p-1}.

The raw monomial Gram matrix is Hilbert-like, so the recurrence and the
orthonormalization are carried out in extended precision (mpmath) and the
result is rounded to float64 in a well-conditioned representation: each
member is stored as ``p_n(xi) * exp(s - c)`` with ``xi = (s - c) / h`` and
``p_n`` given by its Legendre series. This spans exactly the same nested
subspaces as the raw family, so the functions are identical; the raw
coefficient matrix is still available for audits through ``Basis1D.coeffs``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from numpy.polynomial import legendre as leg

MAX_BASIS_SIZE = 30
GRAM_TOLERANCE = 1e-10
_MAX_DPS = 4000


class BasisConditioningError(ValueError):
    """The orthonormalized family lost orthogonality beyond tolerance."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval endpoints must be finite, got ({lo}, {hi})")
        if not lo < hi:
            raise ValueError(f"interval requires lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def contains(self, s, slack: float = 1e-12) -> bool:
        s = np.asarray(s, dtype=float)
        tol = slack * max(1.0, abs(self.lo), abs(self.hi))
        return bool(np.all((s >= self.lo - tol) & (s <= self.hi + tol)))


@dataclass(frozen=True, eq=False)
class Basis1D:
    """First ``n_max`` members of the polynomial-exponential basis.

    Attributes
    ----------
    interval : Interval
    n_max : int
    legendre : ndarray, shape (n_max, n_max)
        Row ``n-1`` holds the Legendre coefficients (in ``xi``) of the
        polynomial factor of ``Psi_n``. Lower triangular.
    coeffs : ndarray, shape (n_max, n_max)
        Raw coefficients: ``Psi_n(s) = sum_k coeffs[n-1, k-1] s**(k-1) exp(s - c)``.
        Lower triangular with positive diagonal. Rounded from the
        extended-precision construction; evaluate through ``eval``.
    diff1 : ndarray, shape (n_max, n_max)
        Exact differentiation matrix, ``Psi_n' = sum_k diff1[n-1, k-1] Psi_k``.
    family_gram : ndarray, shape (n_max, n_max)
        Closed-form Gram matrix of ``P_i(xi) exp(s - c)``, used to audit the
        rounded ``legendre`` coefficients.
    """

    interval: Interval
    n_max: int
    legendre: np.ndarray
    coeffs: np.ndarray
    diff1: np.ndarray
    family_gram: np.ndarray
    _poly_d1: np.ndarray = field(repr=False)
    _poly_d2: np.ndarray = field(repr=False)

    @property
    def diff2(self) -> np.ndarray:
        """Exact second-derivative matrix, ``Psi_n'' = sum_k diff2[n-1, k-1] Psi_k``."""
        return self.diff1 @ self.diff1

    def gram(self) -> np.ndarray:
        """Gram matrix of the stored basis from closed-form inner products."""
        L = self.legendre
        return L @ self.family_gram @ L.T

    def gram_defect(self) -> float:
        return float(np.abs(self.gram() - np.eye(self.n_max)).max())

    def values(self, s, deriv: int = 0, n: int | None = None) -> np.ndarray:
        """Evaluate ``Psi_1..Psi_n`` (or their derivatives) at points ``s``.

        Returns an array of shape ``(n, len(s))``.
        """
        if deriv not in (0, 1, 2):
            raise ValueError(f"derivative order must be 0, 1 or 2, got {deriv}")
        n = self.n_max if n is None else int(n)
        if not 1 <= n <= self.n_max:
            raise ValueError(f"basis size {n} outside 1..{self.n_max}")
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if not self.interval.contains(s):
            raise ValueError(f"evaluation point outside [{self.interval.lo}, {self.interval.hi}]")
        h = self.interval.half_width
        xi = np.clip((s - self.interval.center) / h, -1.0, 1.0)
        V = leg.legvander(xi, self.n_max - 1).T
        weight = np.exp(h * xi)
        p = self.legendre[:n] @ V
        if deriv == 0:
            return p * weight
        p1 = (self._poly_d1[:n] @ V) / h
        if deriv == 1:
            return (p1 + p) * weight
        p2 = (self._poly_d2[:n] @ V) / h**2
        return (p2 + 2.0 * p1 + p) * weight

    def eval(self, n: int, s, deriv: int = 0):
        """Evaluate ``Psi_n`` or one of its first two derivatives at ``s``."""
        if not 1 <= n <= self.n_max:
            raise IndexError(f"basis index {n} outside 1..{self.n_max}")
        scalar = np.ndim(s) == 0
        out = self.values(s, deriv, n)[n - 1]
        return float(out[0]) if scalar else out


def _moments(lo, hi, c, count):
    ea, eb = mp.exp(2 * (lo - c)), mp.exp(2 * (hi - c))
    M = [(eb - ea) / 2]
    for p in range(1, count):
        M.append((hi**p * eb - lo**p * ea) / 2 - mp.mpf(p) / 2 * M[p - 1])
    return M


def _gram_schmidt(G, n):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    ``G`` is the Gram matrix of the raw family; vectors are coefficient rows.
    """
    Q, GQ = [], []
    for k in range(n):
        v = [mp.mpf(0)] * n
        v[k] = mp.mpf(1)
        for _ in range(2):
            for q, gq in zip(Q, GQ):
                r = mp.fsum(gq[i] * v[i] for i in range(k + 1))
                for i in range(k + 1):
                    v[i] -= r * q[i]
        gv = [mp.fsum(G[i][j] * v[j] for j in range(k + 1)) for i in range(n)]
        sq = mp.fsum(gv[i] * v[i] for i in range(k + 1))
        if sq <= 0:
            raise ArithmeticError("non-positive norm during orthonormalization")
        nrm = mp.sqrt(sq)
        Q.append([x / nrm for x in v])
        GQ.append([x / nrm for x in gv])
    return Q


def _legendre_power_coeffs(n):
    """Row k: power coefficients of P_k(xi), exact three-term recurrence."""
    P = mp.matrix(n, n)
    P[0, 0] = mp.mpf(1)
    if n > 1:
        P[1, 1] = mp.mpf(1)
    for k in range(1, n - 1):
        for i in range(k + 2):
            up = P[k, i - 1] if i > 0 else mp.mpf(0)
            P[k + 1, i] = ((2 * k + 1) * up - k * P[k - 1, i]) / (k + 1)
    return P


def _to_float(A):
    return np.array([[float(A[i, j]) for j in range(A.cols)] for i in range(A.rows)])


def _construct(lo, hi, n, dps):
    with mp.workdps(dps):
        a, b = mp.mpf(lo), mp.mpf(hi)
        c, h = (a + b) / 2, (b - a) / 2
        M = _moments(a, b, c, 2 * n - 1)
        G = [[M[i + j] for j in range(n)] for i in range(n)]
        Q = mp.matrix(_gram_schmidt(G, n))

        # power change of variable s = c + h xi, both directions
        s_in_xi = mp.matrix(n, n)
        xi_in_s = mp.matrix(n, n)
        for j in range(n):
            for i in range(j + 1):
                s_in_xi[j, i] = math.comb(j, i) * c ** (j - i) * h**i
                xi_in_s[j, i] = math.comb(j, i) * (-c) ** (j - i) / h**j
        P = _legendre_power_coeffs(n)
        # Legendre coefficients of xi**i: invert the triangular P
        L = Q * s_in_xi * mp.inverse(P)

        # d/ds (s**k e^{s-c}) = (s**k + k s**(k-1)) e^{s-c}
        Dq = mp.matrix(n, n)
        for r in range(n):
            for k in range(n):
                Dq[r, k] = Q[r, k] + ((k + 1) * Q[r, k + 1] if k + 1 < n else 0)
        D1 = Dq * mp.inverse(Q)

        A = P * xi_in_s
        GL = A * mp.matrix(G) * A.T
        return _to_float(L), _to_float(Q), _to_float(D1), _to_float(GL)


def _stable_construct(lo, hi, n):
    # Raw power basis conditioning grows with n and with |c|/h; increase the
    # working precision until two precisions agree on the rounded output.
    scale = max(1.0, abs(lo), abs(hi)) / (0.5 * (hi - lo))
    dps = 30 + int(n * (2 + math.log10(1 + scale)))
    prev = _construct(lo, hi, n, dps)
    while dps <= _MAX_DPS:
        dps = int(dps * 1.5) + 10
        cur = _construct(lo, hi, n, dps)
        if all(np.allclose(x, y, rtol=1e-14, atol=1e-14 * np.abs(y).max()) for x, y in zip(prev, cur)):
            return cur
        prev = cur
    raise BasisConditioningError(f"could not orthonormalize {n} members on ({lo}, {hi})")


@functools.lru_cache(maxsize=64)
def _cached_basis(lo: float, hi: float, n_max: int) -> Basis1D:
    L, Q, D1, GL = _stable_construct(lo, hi, n_max)
    d1 = np.zeros_like(L)
    d2 = np.zeros_like(L)
    for r in range(n_max):
        c1 = leg.legder(L[r])
        c2 = leg.legder(L[r], 2)
        d1[r, : c1.size] = c1
        d2[r, : c2.size] = c2
    for arr in (L, Q, D1, GL, d1, d2):
        arr.setflags(write=False)
    basis = Basis1D(Interval(lo, hi), n_max, L, Q, D1, GL, d1, d2)
    defect = basis.gram_defect()
    if defect > GRAM_TOLERANCE:
        raise BasisConditioningError(
            f"Gram defect {defect:.3e} exceeds {GRAM_TOLERANCE:g} for n_max={n_max} on ({lo}, {hi}); "
            "lower n_max"
        )
    return basis


def build_basis(interval: Interval | tuple[float, float], n_max: int) -> Basis1D:
    """Orthonormalize the first ``n_max`` polynomial-exponential functions.

    Bases are immutable and cached by ``(lo, hi, n_max)``.
    """
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    if isinstance(n_max, bool) or int(n_max) != n_max:
        raise ValueError(f"n_max must be an integer, got {n_max!r}")
    n_max = int(n_max)
    if not 1 <= n_max <= MAX_BASIS_SIZE:
        raise ValueError(f"n_max must lie in 1..{MAX_BASIS_SIZE}, got {n_max}")
    return _cached_basis(interval.lo, interval.hi, n_max)


def eval_basis(basis: Basis1D, n: int, s, deriv: int = 0):
    """Functional form of ``Basis1D.eval``."""
    return basis.eval(n, s, deriv)
