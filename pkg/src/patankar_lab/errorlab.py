"""Local and global error analysis of mPaRK2 on linear constant-coefficient problems.

All routines work on a :class:`CirculantOperator` ``A``.  "Exact" means the
semi-discrete solution ``exp(t A) u0`` unless a reference is passed
explicitly; the PDE-level solutions live on
:class:`~patankar_lab.models.InitialProfile`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrators import SchemeId, step, step_mpark2
from .models import GridSpec, InitialProfile, make_diffusion
from .numkernel import (
    CirculantOperator,
    NumericalError,
    circulant_apply,
    circulant_expm_apply,
    circulant_resolvent_apply,
    dense_solve,
    norms,
)

__all__ = [
    "ZeroDenominatorError",
    "ErrorRecursionReport",
    "SmoothnessReport",
    "OrderRow",
    "exact_state",
    "mpark2_residual",
    "trapezoidal_residual",
    "rho_tilde",
    "error_recursion_matrices",
    "one_step_error",
    "smoothness_indicator",
    "patankar_euler_leading_term",
    "observed_orders",
    "local_error_table",
    "TABLE1_COUPLING",
    "TABLE1_M_LIST",
]

#: dt = TABLE1_COUPLING * dx for the diffusion local-error study
TABLE1_COUPLING = 0.1
TABLE1_M_LIST = tuple(40 * 2**k for k in range(7))


class ZeroDenominatorError(NumericalError):
    pass


@dataclass
class ErrorRecursionReport:
    """One step of ``e^{n+1} = R^n e^n + d^n`` with all intermediate quantities."""

    v_bar: np.ndarray
    W_bar: np.ndarray
    v: np.ndarray
    W: np.ndarray
    u_next_numeric: np.ndarray
    u_next_exact: np.ndarray
    rho: np.ndarray
    rho_trap: np.ndarray
    rho_tilde: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    G: np.ndarray
    R: np.ndarray
    d: np.ndarray
    e: np.ndarray
    e_next: np.ndarray

    @property
    def recursion_defect(self) -> np.ndarray:
        return self.e_next - (self.R @ self.e + self.d)


@dataclass
class SmoothnessReport:
    S: np.ndarray
    s_norm: float
    s_norm_unweighted: float


@dataclass
class OrderRow:
    profile: str
    m: int
    dt: float
    local_error: float
    residual_norm: float
    observed_order: float | None
    s_norm: float


def exact_state(A: CirculantOperator, u0, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return circulant_expm_apply(A, t, u0)


def _predictor(A: CirculantOperator, u: np.ndarray, dt: float) -> np.ndarray:
    v = circulant_resolvent_apply(A, dt, u)
    if np.any(v == 0):
        raise ZeroDenominatorError("(I - dt A)^{-1} u has a zero component")
    return v


def mpark2_residual(A: CirculantOperator, u_n, u_next, dt: float):
    """Defect of the mPaRK2 update when ``u_n -> u_next`` is inserted.

    Returns ``(rho, v_bar, W_bar)`` with ``v_bar = (I - dt A)^{-1} u_n``,
    ``W_bar = u_n / v_bar`` and
    ``rho = u_next - u_n - dt/2 A (W_bar + I) u_next``.
    """
    u_n = np.asarray(u_n, dtype=float)
    u_next = np.asarray(u_next, dtype=float)
    v_bar = circulant_resolvent_apply(A, dt, u_n)
    if np.any(v_bar <= 0):
        i = int(np.argmin(v_bar))
        raise ZeroDenominatorError(f"v_bar[{i}] = {v_bar[i]:.3e} is not positive")
    W_bar = u_n / v_bar
    rho = u_next - u_n - 0.5 * dt * circulant_apply(A, (W_bar + 1.0) * u_next)
    return rho, v_bar, W_bar


def trapezoidal_residual(A: CirculantOperator, u_n, u_next, dt: float) -> np.ndarray:
    u_n = np.asarray(u_n, dtype=float)
    u_next = np.asarray(u_next, dtype=float)
    return u_next - u_n - 0.5 * dt * circulant_apply(A, u_n + u_next)


def rho_tilde(A: CirculantOperator, u_n, dt: float):
    """Gap between the mPaRK2 and trapezoidal residuals for exact data.

    ``rho_tilde = dt/2 A D1 D2 u_n`` with
    ``D1 = diag(((I - dt A)^{-1} - exp(dt A)) u_n)`` and
    ``D2 = diag((I - dt A)^{-1} u_n)^{-1}``.  Returns the diagonals of D1, D2.
    """
    u_n = np.asarray(u_n, dtype=float)
    v_bar = _predictor(A, u_n, dt)
    D1 = v_bar - exact_state(A, u_n, dt)
    D2 = 1.0 / v_bar
    return 0.5 * dt * circulant_apply(A, D1 * D2 * u_n), D1, D2


def error_recursion_matrices(A: CirculantOperator, u_n_exact, u_n_numeric, dt: float) -> ErrorRecursionReport:
    """Materialize ``R^n``, ``G^n`` and ``d^n`` for one mPaRK2 step.

    The numeric state is advanced by one actual mPaRK2 step and the exact
    state by ``exp(dt A)``; ``e_next`` is their difference.
    """
    ue = np.asarray(u_n_exact, dtype=float)
    un = np.asarray(u_n_numeric, dtype=float)
    m = A.size
    ue_next = exact_state(A, ue, dt)
    rho, v_bar, W_bar = mpark2_residual(A, ue, ue_next, dt)
    rho_t, D1, D2 = rho_tilde(A, ue, dt)
    u_next, diag = step_mpark2(A, un, dt)
    v, W = diag.stage_v, diag.weights

    Am = A.matrix()
    eye = np.eye(m)
    resolvent = np.column_stack([circulant_resolvent_apply(A, dt, eye[:, j]) for j in range(m)])
    G = np.diag(u_next / v_bar) - (un * u_next / (v_bar * v))[:, None] * resolvent
    lhs = eye - 0.5 * dt * Am * (W_bar + 1.0)[None, :]
    R = np.column_stack([dense_solve(lhs, col) for col in (eye + 0.5 * dt * Am @ G).T])
    d = dense_solve(lhs, rho)
    return ErrorRecursionReport(
        v_bar=v_bar,
        W_bar=W_bar,
        v=v,
        W=W,
        u_next_numeric=u_next,
        u_next_exact=ue_next,
        rho=rho,
        rho_trap=trapezoidal_residual(A, ue, ue_next, dt),
        rho_tilde=rho_t,
        D1=D1,
        D2=D2,
        G=G,
        R=R,
        d=d,
        e=ue - un,
        e_next=ue_next - u_next,
    )


def one_step_error(scheme, A: CirculantOperator, u0, dt: float, norm: str = "weighted", reference=None) -> float:
    """Norm of ``reference - step(scheme, u0, dt)``.

    ``reference`` defaults to the semi-discrete ``exp(dt A) u0``; pass the
    PDE solution at ``t = dt`` to measure the error in PDE sense.
    """
    u0 = np.asarray(u0, dtype=float)
    if dt == 0:
        return 0.0
    unew, _ = step(SchemeId.parse(scheme), A, u0, dt)
    ref = exact_state(A, u0, dt) if reference is None else np.asarray(reference, dtype=float)
    return norms(ref - unew, A.dx).get(norm)


def smoothness_indicator(A: CirculantOperator, u, dt: float) -> SmoothnessReport:
    """``S = A diag(A^2 u) diag((I - dt A)^{-1} u)^{-1} u``.

    ``s_norm`` is the grid-weighted 2-norm ``sqrt(dx * sum S_i^2)``; the plain
    Euclidean norm is kept alongside.
    """
    u = np.asarray(u, dtype=float)
    v = _predictor(A, u, dt)
    a2u = circulant_apply(A, circulant_apply(A, u))
    S = circulant_apply(A, a2u * u / v)
    n = norms(S, A.dx)
    return SmoothnessReport(S, n.weighted_l2, n.l2)


def patankar_euler_leading_term(grid: GridSpec, profile, dt: float):
    """Residual of the Patankar-Euler heat scheme on exact PDE values.

    Returns ``(measured, predicted)`` where ``measured`` is the per-step
    residual divided by ``dt`` and ``predicted = 2 dt / dx^2 * u_t``.
    """
    profile = InitialProfile.parse(profile)
    x = grid.nodes
    r = dt / grid.dx**2
    u0 = profile.heat_solution(x, 0.0)
    u1 = profile.heat_solution(x, dt)
    residual = u1 - u0 - r * (np.roll(u0, 1) - 2.0 * u1 + np.roll(u0, -1))
    measured = residual / dt
    predicted = 2.0 * r * profile.heat_time_derivative(x, 0.0)
    return measured, predicted


def observed_orders(errors) -> np.ndarray:
    """``log2(e_{k-1} / e_k)`` for errors listed along doubled resolutions."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("need at least two errors")
    if np.any(e <= 0):
        raise ValueError("errors must be positive")
    return np.log2(e[:-1] / e[1:])


def local_error_row(profile, m: int, coupling: float = TABLE1_COUPLING, norm: str = "weighted",
                    reference: str = "pde") -> OrderRow:
    """First-step mPaRK2 error for the periodic heat equation at ``dt = coupling * dx``."""
    profile = InitialProfile.parse(profile)
    grid = GridSpec(m)
    A = make_diffusion(grid)
    dt = coupling * grid.dx
    u0 = profile(grid.nodes)
    if reference == "pde":
        ref = profile.heat_solution(grid.nodes, dt)
    elif reference == "semidiscrete":
        ref = exact_state(A, u0, dt)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    error = one_step_error(SchemeId.MPARK2, A, u0, dt, norm=norm, reference=ref)
    rho, _, _ = mpark2_residual(A, u0, ref, dt)
    s = smoothness_indicator(A, u0, dt)
    return OrderRow(profile.value, m, dt, error, norms(rho, grid.dx).get(norm), None, s.s_norm)


def local_error_table(profile, m_list=TABLE1_M_LIST, coupling: float = TABLE1_COUPLING,
                      norm: str = "weighted", reference: str = "pde", rows=None) -> list[OrderRow]:
    """Rows for one profile, orders filled in from the unrounded errors.

    ``rows`` may carry precomputed rows (e.g. from a parallel sweep) in the
    order of ``m_list``.
    """
    if rows is None:
        rows = [local_error_row(profile, m, coupling, norm, reference) for m in m_list]
    if len(rows) > 1:
        for row, order in zip(rows[1:], observed_orders([r.local_error for r in rows])):
            row.observed_order = float(order)
    return rows
