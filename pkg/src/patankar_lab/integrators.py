"""One-step time integrators and a fixed-step driver.

Every stepper takes ``(system, u, dt)`` where ``system`` is either a
:class:`~patankar_lab.numkernel.CirculantOperator` (linear constant-coefficient
problem, solved with spectral resolvents and cyclic tridiagonal systems) or a
:class:`~patankar_lab.models.ProductionDestructionSystem` (dense solves with
``A(u) = P(u) - Q(u)``).  Both routes agree where both apply.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .models import ProductionDestructionSystem
from .numkernel import (
    CirculantOperator,
    CyclicTridiagonalSystem,
    NumericalError,
    OverflowGuardError,
    circulant_apply,
    circulant_resolvent_apply,
    cyclic_tridiag_solve,
    dense_solve,
)

System = Union[CirculantOperator, ProductionDestructionSystem]

__all__ = [
    "SchemeId",
    "StepDiagnostics",
    "Trajectory",
    "NonpositiveStageError",
    "StepFailure",
    "StepCountError",
    "step_forward_euler",
    "step_implicit_euler",
    "step_trapezoidal",
    "step_patankar_euler",
    "step_modified_patankar_euler",
    "step_mpark2",
    "step_mpark2ex",
    "step",
    "integrate",
    "PATANKAR_SCHEMES",
]


class SchemeId(str, Enum):
    FORWARD_EULER = "forward_euler"
    IMPLICIT_EULER = "implicit_euler"
    TRAPEZOIDAL = "trapezoidal"
    PATANKAR_EULER = "patankar_euler"
    MODIFIED_PATANKAR_EULER = "modified_patankar_euler"
    MPARK2 = "mpark2"
    MPARK2EX = "mpark2ex"

    @classmethod
    def parse(cls, scheme) -> "SchemeId":
        if isinstance(scheme, cls):
            return scheme
        try:
            return cls(scheme)
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown scheme {scheme!r} (choose from {names})") from None


PATANKAR_SCHEMES = (
    SchemeId.PATANKAR_EULER,
    SchemeId.MODIFIED_PATANKAR_EULER,
    SchemeId.MPARK2,
    SchemeId.MPARK2EX,
)


class NonpositiveStageError(NumericalError):
    pass


class StepCountError(ValueError):
    pass


class StepFailure(NumericalError):
    """A step inside :func:`integrate` failed; ``step_index`` is zero-based."""

    def __init__(self, step_index: int, scheme: SchemeId, cause: Exception):
        super().__init__(f"{scheme.value}: step {step_index} failed: {cause}")
        self.step_index = step_index
        self.scheme = scheme
        self.cause = cause


@dataclass
class StepDiagnostics:
    """Per-step record.

    ``stage_v`` is the mPaRK2 predictor ``v^{n+1}`` or the mPaRK2ex explicit
    half-step ``v^{n+1/2}``; ``weights`` holds the diagonal Patankar weights.
    Single-stage schemes leave both as ``None``.
    """

    mass_before: float
    mass_after: float
    min_component: float
    stage_v: np.ndarray | None = None
    weights: np.ndarray | None = None
    half_state: np.ndarray | None = None
    clip_count: int = 0

    @property
    def mass_drift(self) -> float:
        return self.mass_after - self.mass_before


@dataclass
class Trajectory:
    scheme: SchemeId
    dt: float
    times: np.ndarray
    states: list[np.ndarray]
    diagnostics: list[StepDiagnostics] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def min_component(self) -> float:
        return float(min(s.min() for s in self.states))


def _dimension(system: System) -> int:
    if isinstance(system, CirculantOperator):
        return system.size
    if isinstance(system, ProductionDestructionSystem):
        return system.dimension
    raise TypeError(f"unsupported system type {type(system).__name__}")


def _vector(system: System, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    m = _dimension(system)
    if u.shape != (m,):
        raise ValueError(f"dimension mismatch: state has shape {u.shape}, system has size {m}")
    return u


def _check_dt(dt: float):
    if not dt > 0 or not np.isfinite(dt):
        raise ValueError(f"time step must be positive and finite, got {dt!r}")


def _apply(system: System, u: np.ndarray) -> np.ndarray:
    if isinstance(system, CirculantOperator):
        return circulant_apply(system, u)
    return system.rate_matrix(u) @ u


def _identity_minus(gamma: float, A: np.ndarray) -> np.ndarray:
    M = -gamma * A
    M[np.diag_indices_from(M)] += 1.0
    return M


def _update_solve(C: CirculantOperator, gamma: float, d: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(I - gamma C diag(d)) x = rhs``."""
    if C.size >= 3 and C.is_cyclic_tridiagonal:
        return cyclic_tridiag_solve(CyclicTridiagonalSystem.shifted_scaled(C, gamma, d), rhs)
    return dense_solve(_identity_minus(gamma, C.matrix() * d[None, :]), rhs)


def _diagnostics(u: np.ndarray, unew: np.ndarray, **extra) -> StepDiagnostics:
    return StepDiagnostics(
        mass_before=float(u.sum()),
        mass_after=float(unew.sum()),
        min_component=float(unew.min()),
        **extra,
    )


def _require_nonnegative(u: np.ndarray, scheme: str):
    if np.any(u < 0):
        raise ValueError(f"{scheme} needs a nonnegative state, min component {u.min():.3e}")


def step_forward_euler(system: System, u, dt: float) -> np.ndarray:
    u = _vector(system, u)
    _check_dt(dt)
    return u + dt * _apply(system, u)


def step_implicit_euler(system: System, u, dt: float) -> np.ndarray:
    u = _vector(system, u)
    _check_dt(dt)
    if isinstance(system, CirculantOperator):
        return circulant_resolvent_apply(system, dt, u)
    return dense_solve(_identity_minus(dt, system.rate_matrix(u)), u)


def step_trapezoidal(system: System, u, dt: float) -> np.ndarray:
    u = _vector(system, u)
    _check_dt(dt)
    rhs = u + 0.5 * dt * _apply(system, u)
    if isinstance(system, CirculantOperator):
        return circulant_resolvent_apply(system, 0.5 * dt, rhs)
    return dense_solve(_identity_minus(0.5 * dt, system.rate_matrix(u)), rhs)


def step_patankar_euler(system: System, u, dt: float) -> np.ndarray:
    """Explicit production, destruction weighted with the new value."""
    u = _vector(system, u)
    _check_dt(dt)
    _require_nonnegative(u, "patankar_euler")
    if isinstance(system, CirculantOperator):
        q = -system.diagonal
        if q < 0:
            raise ValueError("circulant has a positive diagonal; no destruction split exists")
        production = circulant_apply(system, u) + q * u
        return (u + dt * production) / (1.0 + dt * q)
    P = system.production(u)
    q = system.destruction(u)
    return (u + dt * (P @ u)) / (1.0 + dt * q)


def step_modified_patankar_euler(system: System, u, dt: float) -> np.ndarray:
    """Solve ``(I - dt A(u^n)) u^{n+1} = u^n``; implicit Euler for constant ``A``."""
    u = _vector(system, u)
    _require_nonnegative(u, "modified_patankar_euler")
    return step_implicit_euler(system, u, dt)


def step_mpark2(system: System, u, dt: float) -> tuple[np.ndarray, StepDiagnostics]:
    """Two-stage modified Patankar scheme.

    The predictor ``v = (I - dt A(u))^{-1} u`` must be strictly positive;
    ``u`` itself may have zero components, which then get weight zero.
    """
    u = _vector(system, u)
    _check_dt(dt)
    _require_nonnegative(u, "mpark2")
    if isinstance(system, CirculantOperator):
        v = circulant_resolvent_apply(system, dt, u)
        _check_stage(v)
        w = u / v
        unew = _update_solve(system, 0.5 * dt, w + 1.0, u)
    else:
        An = system.rate_matrix(u)
        v = dense_solve(_identity_minus(dt, An), u)
        _check_stage(v)
        w = u / v
        # a_ij(u^n) weighted by u_j^n / v_j for every j, a_ij(v) unweighted
        M = _identity_minus(0.5 * dt, An * w[None, :] + system.rate_matrix(v))
        unew = dense_solve(M, u)
    return unew, _diagnostics(u, unew, stage_v=v, weights=w)


def _check_stage(v: np.ndarray):
    if np.any(v <= 0):
        i = int(np.argmin(v))
        raise NonpositiveStageError(f"predictor stage has v[{i}] = {v[i]:.3e} <= 0")


def step_mpark2ex(system: System, u, dt: float) -> tuple[np.ndarray, StepDiagnostics]:
    """mPaRK2 variant with an explicit, clipped half-step predictor.

    ``v = u + dt/2 A u``; components with ``v_i <= 0`` are replaced by ``u_i``
    (weight one).  Then ``(I - dt/2 A W) u_half = u`` and
    ``(I - dt/2 A) u_new = u_half``.  Linear systems only.
    """
    u = _vector(system, u)
    _check_dt(dt)
    _require_nonnegative(u, "mpark2ex")
    if isinstance(system, ProductionDestructionSystem) and not system.linear:
        raise TypeError("mpark2ex is defined for linear systems only")
    half = 0.5 * dt
    vh = u + half * _apply(system, u)
    keep = vh > 0
    w = np.ones_like(u)
    w[keep] = u[keep] / vh[keep]
    if isinstance(system, CirculantOperator):
        uh = _update_solve(system, half, w, u)
        unew = circulant_resolvent_apply(system, half, uh)
    else:
        A = system.rate_matrix(u)
        uh = dense_solve(_identity_minus(half, A * w[None, :]), u)
        unew = dense_solve(_identity_minus(half, A), uh)
    diag = _diagnostics(u, unew, stage_v=vh, weights=w, half_state=uh, clip_count=int(np.count_nonzero(~keep)))
    return unew, diag


_STEPPERS = {
    SchemeId.FORWARD_EULER: step_forward_euler,
    SchemeId.IMPLICIT_EULER: step_implicit_euler,
    SchemeId.TRAPEZOIDAL: step_trapezoidal,
    SchemeId.PATANKAR_EULER: step_patankar_euler,
    SchemeId.MODIFIED_PATANKAR_EULER: step_modified_patankar_euler,
    SchemeId.MPARK2: step_mpark2,
    SchemeId.MPARK2EX: step_mpark2ex,
}


def step(scheme, system: System, u, dt: float) -> tuple[np.ndarray, StepDiagnostics]:
    """Advance one step with any scheme and always return diagnostics."""
    scheme = SchemeId.parse(scheme)
    u = _vector(system, u)
    out = _STEPPERS[scheme](system, u, dt)
    if isinstance(out, tuple):
        return out
    return out, _diagnostics(u, out)


def step_count(dt: float, T: float) -> int:
    _check_dt(dt)
    if T < 0:
        raise StepCountError(f"final time must be nonnegative, got {T!r}")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(abs(T), 1.0):
        raise StepCountError(f"T = {T!r} is not an integer multiple of dt = {dt!r}")
    return n


def integrate(scheme, system: System, u0, dt: float, T: float) -> Trajectory:
    """Run ``T / dt`` fixed steps, recording every state and its diagnostics."""
    scheme = SchemeId.parse(scheme)
    n = step_count(dt, T)
    u = _vector(system, u0).copy()
    states = [u]
    diagnostics = []
    for k in range(n):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                u, diag = step(scheme, system, u, dt)
            if not np.all(np.isfinite(u)):
                raise OverflowGuardError("state is no longer finite")
        except (NumericalError, FloatingPointError) as exc:
            raise StepFailure(k, scheme, exc) from exc
        states.append(u)
        diagnostics.append(diag)
    return Trajectory(scheme, dt, dt * np.arange(n + 1), states, diagnostics)
