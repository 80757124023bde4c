"""Semi-discrete PDE operators, production-destruction systems and initial data."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .numkernel import CirculantOperator

__all__ = [
    "GridSpec",
    "InitialProfile",
    "UnknownProfileError",
    "SplitInfeasibleError",
    "ProductionDestructionSystem",
    "make_upwind_advection",
    "make_diffusion",
    "pds_split_linear",
    "conservation_defect",
    "eval_initial_profile",
    "cyclic_exchange_system",
    "scalar_decay_system",
]


class UnknownProfileError(ValueError):
    pass


class SplitInfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Periodic uniform grid with nodes ``x_i = i * dx``, ``i = 0..m-1``."""

    m: int
    domain_length: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"grid needs m >= 2 cells, got {self.m!r}")
        if not self.domain_length > 0:
            raise ValueError("domain length must be positive")

    @property
    def dx(self) -> float:
        return self.domain_length / self.m

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.m) * self.dx


class InitialProfile(str, Enum):
    """Initial data used in the experiments.

    Every profile is a short cosine series ``sum_k a_k cos(2 pi k x)``, which
    gives closed-form solutions of the heat and transport equations.
    """

    SMOOTH_FLOOR = "smooth_floor"  # 0.1 + sin^2(2 pi x)
    SINE_SQUARED = "sine_squared"  # sin^2(2 pi x)
    WAVE = "wave"  # 0.01 + sin^4(pi x)

    @classmethod
    def parse(cls, profile) -> "InitialProfile":
        if isinstance(profile, cls):
            return profile
        try:
            return cls(profile)
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise UnknownProfileError(f"unknown profile {profile!r} (choose from {names})") from None

    @property
    def cosine_coefficients(self) -> dict[int, float]:
        return _COSINE_SERIES[self]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self is InitialProfile.SMOOTH_FLOOR:
            return 0.1 + np.sin(2 * np.pi * x) ** 2
        if self is InitialProfile.SINE_SQUARED:
            return np.sin(2 * np.pi * x) ** 2
        return 0.01 + np.sin(np.pi * x) ** 4

    def heat_solution(self, x, t: float, diffusivity: float = 1.0) -> np.ndarray:
        """Exact solution of ``u_t = diffusivity * u_xx`` on the periodic unit interval."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in self.cosine_coefficients.items():
            out += a * np.cos(2 * np.pi * k * x) * np.exp(-diffusivity * (2 * np.pi * k) ** 2 * t)
        return out

    def heat_time_derivative(self, x, t: float, diffusivity: float = 1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in self.cosine_coefficients.items():
            rate = diffusivity * (2 * np.pi * k) ** 2
            out -= rate * a * np.cos(2 * np.pi * k * x) * np.exp(-rate * t)
        return out

    def transport_solution(self, x, t: float, speed: float = 1.0) -> np.ndarray:
        """Exact solution of ``u_t + speed * u_x = 0``: the profile shifted by ``speed * t``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in self.cosine_coefficients.items():
            out += a * np.cos(2 * np.pi * k * (x - speed * t))
        return out


_COSINE_SERIES = {
    InitialProfile.SMOOTH_FLOOR: {0: 0.6, 2: -0.5},
    InitialProfile.SINE_SQUARED: {0: 0.5, 2: -0.5},
    InitialProfile.WAVE: {0: 0.01 + 3.0 / 8.0, 1: -0.5, 2: 0.125},
}


def eval_initial_profile(profile, grid: GridSpec) -> np.ndarray:
    return InitialProfile.parse(profile)(grid.nodes)


def make_upwind_advection(grid: GridSpec, speed: float = 1.0) -> CirculantOperator:
    """First-order upwind discretization of ``-speed * u_x`` for ``speed > 0``."""
    if not speed > 0:
        raise ValueError("upwind operator is built for positive transport speed")
    col = np.zeros(grid.m)
    col[0] = -speed / grid.dx
    col[1] = speed / grid.dx
    return CirculantOperator(col, grid.dx)


def make_diffusion(grid: GridSpec) -> CirculantOperator:
    """Second-order central discretization of ``u_xx``."""
    col = np.zeros(grid.m)
    inv = 1.0 / grid.dx**2
    col[0] = -2.0 * inv
    col[1] += inv
    col[-1] += inv
    return CirculantOperator(col, grid.dx)


class ProductionDestructionSystem:
    """ODE system ``u' = P(u) u - Q(u) u``.

    Parameters
    ----------
    production : callable
        ``u -> P(u)``, a nonnegative ``m x m`` matrix with zero diagonal.
    destruction : callable
        ``u -> q(u)``, the nonnegative diagonal of ``Q(u)`` as a vector.
    dimension : int
    conservative : bool
        Whether ``sum_j p_ji(u) = q_i(u)`` holds identically.
    linear : bool
        Whether ``P`` and ``Q`` are constant.  Linear systems admit the
        mPaRK2ex scheme.
    operator : CirculantOperator, optional
        The circulant this system was split from, if any.
    """

    def __init__(
        self,
        production: Callable[[np.ndarray], np.ndarray],
        destruction: Callable[[np.ndarray], np.ndarray],
        dimension: int,
        conservative: bool = False,
        linear: bool = False,
        name: str = "pds",
        operator: CirculantOperator | None = None,
    ):
        self._production = production
        self._destruction = destruction
        self.dimension = int(dimension)
        self.conservative = bool(conservative)
        self.linear = bool(linear)
        self.name = name
        self.operator = operator

    def __repr__(self) -> str:
        return (
            f"ProductionDestructionSystem({self.name!r}, m={self.dimension}, "
            f"conservative={self.conservative}, linear={self.linear})"
        )

    def production(self, u) -> np.ndarray:
        P = np.asarray(self._production(np.asarray(u, dtype=float)), dtype=float)
        if P.shape != (self.dimension, self.dimension):
            raise ValueError(f"P(u) has shape {P.shape}, expected {(self.dimension,) * 2}")
        return P

    def destruction(self, u) -> np.ndarray:
        q = np.asarray(self._destruction(np.asarray(u, dtype=float)), dtype=float)
        if q.shape != (self.dimension,):
            raise ValueError(f"q(u) has shape {q.shape}, expected {(self.dimension,)}")
        return q

    def rate_matrix(self, u) -> np.ndarray:
        """``A(u) = P(u) - Q(u)``."""
        A = self.production(u).copy()
        A[np.diag_indices(self.dimension)] -= self.destruction(u)
        return A

    def rhs(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.production(u) @ u - self.destruction(u) * u


def pds_split_linear(A: CirculantOperator, atol: float = 1e-12) -> ProductionDestructionSystem:
    """Split a circulant ``A = P - Q`` into its off-diagonal and diagonal parts."""
    M = A.matrix()
    diag = np.diag(M).copy()
    P = M.copy()
    P[np.diag_indices(A.size)] = 0.0
    if np.any(P < 0) or np.any(diag > 0):
        raise SplitInfeasibleError("operator has negative off-diagonal or positive diagonal entries")
    q = -diag
    scale = float(np.max(np.abs(M), initial=1.0))
    conservative = bool(np.all(np.abs(M.sum(axis=0)) <= atol * scale))
    P.setflags(write=False)
    q.setflags(write=False)
    return ProductionDestructionSystem(
        lambda u: P,
        lambda u: q,
        A.size,
        conservative=conservative,
        linear=True,
        name="linear-split",
        operator=A,
    )


def conservation_defect(sys: ProductionDestructionSystem, u) -> np.ndarray:
    """``sum_j p_ji(u) - q_i(u)`` for every ``i``."""
    u = np.asarray(u, dtype=float)
    return sys.production(u).sum(axis=0) - sys.destruction(u)


def cyclic_exchange_system(rates=(1.0, 2.0, 0.5)) -> ProductionDestructionSystem:
    """Conservative linear 3-box model ``1 -> 2 -> 3 -> 1`` with the given rates."""
    a, b, c = (float(r) for r in rates)
    if min(a, b, c) < 0:
        raise ValueError("rates must be nonnegative")
    P = np.array([[0.0, 0.0, c], [a, 0.0, 0.0], [0.0, b, 0.0]])
    q = np.array([a, b, c])
    return ProductionDestructionSystem(
        lambda u: P, lambda u: q, 3, conservative=True, linear=True, name="cyclic-exchange"
    )


def scalar_decay_system(rate: float = 1.0) -> ProductionDestructionSystem:
    """``u' = -rate * u`` as a (non-conservative) PDS with ``P = 0``."""
    P = np.zeros((1, 1))
    q = np.array([float(rate)])
    return ProductionDestructionSystem(
        lambda u: P, lambda u: q, 1, conservative=False, linear=True, name="scalar-decay"
    )
