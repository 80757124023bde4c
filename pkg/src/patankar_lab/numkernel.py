"""Linear-algebra kernels for periodic constant-coefficient operators.

A :class:`CirculantOperator` is stored by its first column ``c`` so that
``(C x)_i = sum_j c_j x_{(i - j) mod m}``.  Such matrices are diagonalized by
the discrete Fourier transform, which gives cheap resolvent and exponential
applications.  The module also carries a cyclic tridiagonal solver (Thomas
elimination with a Sherman-Morrison corner correction) and a pivoted dense
solver used as an oracle and for general production-destruction systems.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "NumericalError",
    "SingularSystemError",
    "NumericalConsistencyError",
    "OverflowGuardError",
    "CirculantOperator",
    "CyclicTridiagonalSystem",
    "Norms",
    "dft",
    "circulant_apply",
    "circulant_eigenvalues",
    "circulant_resolvent_apply",
    "circulant_expm_apply",
    "cyclic_tridiag_solve",
    "dense_solve",
    "norms",
]

#: largest admissible Re(t*lambda) before exp() overflows in double precision
EXP_OVERFLOW_LIMIT = 700.0
#: tolerated imaginary residue after an inverse transform, relative to ||x||_inf
IMAG_TOLERANCE = 1e-10


class NumericalError(ArithmeticError):
    """Base class for numerical failures (singular solves, bad stages, ...)."""


class SingularSystemError(NumericalError):
    pass


class NumericalConsistencyError(NumericalError):
    """Raised when a result violates an identity it must satisfy by construction."""


class OverflowGuardError(NumericalError):
    pass


def _as_vector(x, m: int | None = None, dtype=float) -> np.ndarray:
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if m is not None and arr.shape[0] != m:
        raise ValueError(f"dimension mismatch: expected length {m}, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True, eq=False)
class CirculantOperator:
    """Periodic constant-coefficient finite-difference matrix.

    Parameters
    ----------
    first_column : array_like
        Entry ``j`` multiplies ``u_{i-j mod m}`` in row ``i``.
    dx : float
        Grid spacing the operator was built for.
    """

    first_column: np.ndarray
    dx: float = 1.0

    def __post_init__(self):
        col = _as_vector(self.first_column).copy()
        if col.size < 1:
            raise ValueError("a circulant operator needs at least one entry")
        if not np.all(np.isfinite(col)):
            raise ValueError("first column must be finite")
        col.setflags(write=False)
        object.__setattr__(self, "first_column", col)

    @property
    def size(self) -> int:
        return self.first_column.shape[0]

    @property
    def row_sum(self) -> float:
        return float(self.first_column.sum())

    @property
    def diagonal(self) -> float:
        return float(self.first_column[0])

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return circulant_eigenvalues(self)

    @property
    def is_cyclic_tridiagonal(self) -> bool:
        """True when only the offsets 0 and +-1 (mod m) carry coefficients."""
        m = self.size
        if m < 3:
            return True
        inner = self.first_column[2 : m - 1]
        return not np.any(inner)

    def matrix(self) -> np.ndarray:
        """Materialize the dense ``m x m`` matrix."""
        m = self.size
        idx = (np.arange(m)[:, None] - np.arange(m)[None, :]) % m
        return self.first_column[idx]

    def __matmul__(self, x):
        return circulant_apply(self, x)

    def __repr__(self) -> str:
        return f"CirculantOperator(m={self.size}, dx={self.dx!r})"


def dft(x, inverse: bool = False) -> np.ndarray:
    """Discrete Fourier transform.

    Forward: ``X_k = sum_j x_j exp(-2 pi i j k / m)``.
    Inverse: ``x_j = (1/m) sum_k X_k exp(+2 pi i j k / m)``.
    """
    arr = _as_vector(x, dtype=complex)
    if arr.size < 1:
        raise ValueError("dft of an empty vector")
    return np.fft.ifft(arr) if inverse else np.fft.fft(arr)


def _real_part(y: np.ndarray, scale: float) -> np.ndarray:
    imag = np.max(np.abs(y.imag)) if y.size else 0.0
    if imag > IMAG_TOLERANCE * max(scale, np.finfo(float).tiny):
        raise NumericalConsistencyError(
            f"inverse transform left an imaginary residue of {imag:.3e} "
            f"(scale {scale:.3e})"
        )
    return np.ascontiguousarray(y.real)


def circulant_apply(C: CirculantOperator, x) -> np.ndarray:
    """Return ``C x`` by direct stencil summation over nonzero coefficients."""
    x = _as_vector(x, C.size)
    y = np.zeros_like(x)
    for j in np.flatnonzero(C.first_column):
        y += C.first_column[j] * np.roll(x, j)
    return y


def circulant_eigenvalues(C: CirculantOperator) -> np.ndarray:
    """Spectrum ``lambda_k = sum_j c_j exp(-2 pi i j k / m)``; ``lambda_0`` is the row sum."""
    return dft(C.first_column)


def circulant_resolvent_apply(C: CirculantOperator, gamma: float, x) -> np.ndarray:
    """Solve ``(I - gamma C) y = x`` spectrally."""
    x = _as_vector(x, C.size)
    if gamma == 0.0:
        return x.copy()
    denom = 1.0 - gamma * C.eigenvalues
    if np.min(np.abs(denom)) < 1e-14:
        raise SingularSystemError(
            f"I - {gamma!r} C is singular: min |1 - gamma*lambda| = {np.min(np.abs(denom)):.3e}"
        )
    y = dft(dft(x) / denom, inverse=True)
    return _real_part(y, float(np.max(np.abs(x), initial=0.0)))


def circulant_expm_apply(C: CirculantOperator, t: float, x) -> np.ndarray:
    """Return ``exp(t C) x`` spectrally."""
    x = _as_vector(x, C.size)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    if t == 0.0:
        return x.copy()
    z = t * C.eigenvalues
    if np.max(z.real) > EXP_OVERFLOW_LIMIT:
        raise OverflowGuardError(
            f"Re(t*lambda) reaches {np.max(z.real):.1f} > {EXP_OVERFLOW_LIMIT}"
        )
    y = dft(dft(x) * np.exp(z), inverse=True)
    scale = float(np.max(np.abs(x), initial=0.0)) * max(1.0, float(np.exp(np.max(z.real))))
    return _real_part(y, scale)


@dataclass(eq=False)
class CyclicTridiagonalSystem:
    """Tridiagonal matrix with the two periodic wrap-around entries.

    ``diag[i]`` sits at ``(i, i)``, ``sub[i]`` at ``(i, i-1)`` for ``i >= 1`` and
    ``sup[i]`` at ``(i, i+1)`` for ``i <= m-2``; ``sub[0]`` and ``sup[m-1]`` are
    ignored.  ``corner_upper`` sits at ``(0, m-1)`` and ``corner_lower`` at
    ``(m-1, 0)``.  Entries that land on the same position (``m <= 2``) add up.
    """

    diag: np.ndarray
    sub: np.ndarray
    sup: np.ndarray
    corner_lower: float = 0.0
    corner_upper: float = 0.0
    size: int = field(init=False)

    def __post_init__(self):
        self.diag = _as_vector(self.diag)
        m = self.diag.shape[0]
        self.sub = _as_vector(self.sub, m)
        self.sup = _as_vector(self.sup, m)
        self.corner_lower = float(self.corner_lower)
        self.corner_upper = float(self.corner_upper)
        self.size = m

    @classmethod
    def identity(cls, m: int) -> "CyclicTridiagonalSystem":
        return cls(np.ones(m), np.zeros(m), np.zeros(m))

    @classmethod
    def shifted_scaled(cls, C: CirculantOperator, gamma: float, d) -> "CyclicTridiagonalSystem":
        """Pattern of ``I - gamma * C * diag(d)`` for a cyclic tridiagonal ``C``."""
        if not C.is_cyclic_tridiagonal:
            raise ValueError("operator is not cyclic tridiagonal")
        m = C.size
        d = _as_vector(d, m)
        c = C.first_column
        if m == 1:
            return cls(1.0 - gamma * c[0] * d, np.zeros(1), np.zeros(1))
        if m == 2:
            # offsets +1 and -1 coincide: both off-diagonals come from c[1]
            sub = np.array([0.0, -gamma * c[1] * d[0]])
            sup = np.array([-gamma * c[1] * d[1], 0.0])
            return cls(1.0 - gamma * c[0] * d, sub, sup)
        lower, upper = c[1], c[m - 1]
        sub = np.empty(m)
        sub[0] = 0.0
        sub[1:] = -gamma * lower * d[:-1]
        sup = np.empty(m)
        sup[-1] = 0.0
        sup[:-1] = -gamma * upper * d[1:]
        return cls(
            1.0 - gamma * c[0] * d,
            sub,
            sup,
            corner_lower=-gamma * upper * d[0],
            corner_upper=-gamma * lower * d[m - 1],
        )

    def matrix(self) -> np.ndarray:
        m = self.size
        M = np.zeros((m, m))
        M[np.arange(m), np.arange(m)] += self.diag
        if m > 1:
            M[np.arange(1, m), np.arange(m - 1)] += self.sub[1:]
            M[np.arange(m - 1), np.arange(1, m)] += self.sup[:-1]
        M[0, m - 1] += self.corner_upper
        M[m - 1, 0] += self.corner_lower
        return M

    def matvec(self, x) -> np.ndarray:
        x = _as_vector(x, self.size)
        y = self.diag * x
        if self.size > 1:
            y[1:] += self.sub[1:] * x[:-1]
            y[:-1] += self.sup[:-1] * x[1:]
        y[0] += self.corner_upper * x[-1]
        y[-1] += self.corner_lower * x[0]
        return y


def _thomas(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray, scale: float) -> np.ndarray:
    """Plain tridiagonal elimination; ``a[0]`` and ``c[-1]`` are unused."""
    n = b.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    piv = b[0]
    if abs(piv) < 1e-14 * scale:
        raise SingularSystemError("zero pivot at row 0")
    cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for k in range(1, n):
        piv = b[k] - a[k] * cp[k - 1]
        if abs(piv) < 1e-14 * scale:
            raise SingularSystemError(f"zero pivot at row {k}")
        cp[k] = c[k] / piv
        dp[k] = (d[k] - a[k] * dp[k - 1]) / piv
    x = dp
    for k in range(n - 2, -1, -1):
        x[k] -= cp[k] * x[k + 1]
    return x


def cyclic_tridiag_solve(T: CyclicTridiagonalSystem, b) -> np.ndarray:
    """Solve ``T x = b`` by Thomas elimination plus a rank-one corner correction."""
    m = T.size
    b = _as_vector(b, m)
    scale = max(float(np.max(np.abs(T.diag))), 1.0)
    if m == 1:
        piv = T.diag[0] + T.corner_lower + T.corner_upper
        if abs(piv) < 1e-14 * scale:
            raise SingularSystemError("zero pivot at row 0")
        return b / piv
    alpha, beta = T.corner_upper, T.corner_lower
    if alpha == 0.0 and beta == 0.0:
        return _thomas(T.sub, T.diag, T.sup, b.copy(), scale)
    # T = T' + u v^T with u = (g, 0, .., beta), v = (1, 0, .., alpha/g)
    g = -T.diag[0] if T.diag[0] != 0.0 else -1.0
    bb = T.diag.copy()
    bb[0] -= g
    bb[-1] -= alpha * beta / g
    y = _thomas(T.sub, bb, T.sup, b.copy(), scale)
    u = np.zeros(m)
    u[0] = g
    u[-1] = beta
    z = _thomas(T.sub, bb, T.sup, u, scale)
    denom = 1.0 + z[0] + alpha * z[-1] / g
    if abs(denom) < 1e-14:
        raise SingularSystemError("Sherman-Morrison denominator vanished")
    factor = (y[0] + alpha * y[-1] / g) / denom
    return y - factor * z


def dense_solve(M, b) -> np.ndarray:
    """LU solve with partial pivoting; raises on a pivot below ``1e-14 * ||M||_max``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    b = _as_vector(b, M.shape[0])
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = float(np.max(np.abs(M), initial=0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    if scale == 0.0 or np.min(np.abs(np.diag(lu))) < 1e-14 * scale:
        raise SingularSystemError("matrix is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


class Norms(NamedTuple):
    weighted_l2: float
    l2: float
    max: float

    def get(self, convention: str) -> float:
        """Look up a norm by CLI name: ``weighted``, ``unweighted`` or ``max``."""
        try:
            return {"weighted": self.weighted_l2, "unweighted": self.l2, "max": self.max}[convention]
        except KeyError:
            raise ValueError(f"unknown norm convention {convention!r}") from None


def norms(x, dx: float) -> Norms:
    if dx <= 0:
        raise ValueError("dx must be positive")
    x = _as_vector(x)
    l2 = float(np.sqrt(np.sum(x * x)))
    return Norms(float(np.sqrt(dx) * l2), l2, float(np.max(np.abs(x), initial=0.0)))
