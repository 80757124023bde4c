"""Experiment drivers behind the CLI: the local-error table, stage-ratio profiles,
the wetting-drying transport comparison and a generic one-step-error sweep."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errorlab import (
    TABLE1_COUPLING,
    TABLE1_M_LIST,
    local_error_row,
    local_error_table,
    observed_orders,
    one_step_error,
    exact_state,
)
from .integrators import SchemeId, integrate
from .models import GridSpec, InitialProfile, make_diffusion, make_upwind_advection
from .numkernel import circulant_apply, circulant_resolvent_apply, norms

#: the dry region of the transport test
DRY_INTERVAL = (0.0, 0.15)
WETDRY_SCHEMES = (SchemeId.TRAPEZOIDAL, SchemeId.MPARK2, SchemeId.MPARK2EX)


def sweep_threads() -> int:
    """Worker count from ``PATANKAR_LAB_THREADS``; 0 or unset means sequential."""
    raw = os.environ.get("PATANKAR_LAB_THREADS", "").strip()
    if not raw:
        return 0
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PATANKAR_LAB_THREADS must be an integer, got {raw!r}") from None
    return max(n, 0)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def table1(profiles=(InitialProfile.SMOOTH_FLOOR, InitialProfile.SINE_SQUARED), m_list=TABLE1_M_LIST,
           coupling: float = TABLE1_COUPLING, norm: str = "weighted", reference: str = "pde",
           threads: int | None = None):
    """Rows of the mPaRK2 local-error table, grouped by profile, ascending in m."""
    threads = sweep_threads() if threads is None else threads
    out = []
    for profile in profiles:
        rows = _map(lambda m: local_error_row(profile, m, coupling, norm, reference), list(m_list), threads)
        out.extend(local_error_table(profile, m_list, rows=rows))
    return out


def calibrate_coupling(target: float = 1.77e-3, m: int = 40, profile=InitialProfile.SMOOTH_FLOOR,
                       bracket=(0.01, 1.0), reference: str = "pde") -> float:
    """Find the single ``dt / dx`` for which the first table entry hits ``target``."""

    def gap(c):
        return np.log(local_error_row(profile, m, c, reference=reference).local_error / target)

    return float(brentq(gap, *bracket, xtol=1e-10))


@dataclass
class StageRatioProfile:
    x: np.ndarray
    u0: np.ndarray
    ratio: np.ndarray
    a2u: np.ndarray
    weighted_a2u: np.ndarray
    dt: float


def stage_ratios(profile, m: int = 160, dt: float | None = None,
                 coupling: float = TABLE1_COUPLING) -> StageRatioProfile:
    """``u_i / v_i`` of the mPaRK2 predictor and the curvature terms it weights."""
    profile = InitialProfile.parse(profile)
    grid = GridSpec(m)
    A = make_diffusion(grid)
    dt = coupling * grid.dx if dt is None else dt
    u0 = profile(grid.nodes)
    v = circulant_resolvent_apply(A, dt, u0)
    ratio = u0 / v
    a2u = circulant_apply(A, circulant_apply(A, u0))
    return StageRatioProfile(grid.nodes, u0, ratio, a2u, ratio * a2u, dt)


@dataclass
class WetDrySummary:
    scheme: SchemeId
    final_min: float
    trajectory_min: float
    mass_drift: float
    l2_error: float
    max_error: float
    l2_error_dry: float
    max_error_dry: float
    pde_l2_error: float
    pde_l2_error_dry: float
    clip_events: int


@dataclass
class WetDryResult:
    x: np.ndarray
    dt: float
    T: float
    reference: np.ndarray
    pde_reference: np.ndarray
    solutions: dict
    summaries: list


def wetdry(m: int = 160, dt: float = 0.0625, T: float = 2.0, schemes=WETDRY_SCHEMES,
           profile=InitialProfile.WAVE, speed: float = 1.0) -> WetDryResult:
    """Periodic upwind transport of the wave profile with each scheme."""
    profile = InitialProfile.parse(profile)
    grid = GridSpec(m)
    A = make_upwind_advection(grid, speed)
    x = grid.nodes
    u0 = profile(x)
    reference = exact_state(A, u0, T)
    pde_reference = profile.transport_solution(x, T, speed)
    dry = (x >= DRY_INTERVAL[0]) & (x <= DRY_INTERVAL[1])
    mass0 = float(u0.sum())
    solutions, summaries = {}, []
    for scheme in schemes:
        scheme = SchemeId.parse(scheme)
        traj = integrate(scheme, A, u0, dt, T)
        u = traj.final
        err = reference - u
        pde_err = pde_reference - u
        full, part = norms(err, grid.dx), norms(err[dry], grid.dx)
        solutions[scheme] = u
        summaries.append(WetDrySummary(
            scheme=scheme,
            final_min=float(u.min()),
            trajectory_min=traj.min_component,
            mass_drift=float(u.sum()) - mass0,
            l2_error=full.weighted_l2,
            max_error=full.max,
            l2_error_dry=part.weighted_l2,
            max_error_dry=part.max,
            pde_l2_error=norms(pde_err, grid.dx).weighted_l2,
            pde_l2_error_dry=norms(pde_err[dry], grid.dx).weighted_l2,
            clip_events=sum(d.clip_count for d in traj.diagnostics),
        ))
    return WetDryResult(x, dt, T, reference, pde_reference, solutions, summaries)


@dataclass
class SweepRow:
    scheme: SchemeId
    m: int
    dt: float
    error: float
    observed_order: float | None


def one_step_sweep(operator: str = "diffusion", profile=InitialProfile.SMOOTH_FLOOR, schemes=(SchemeId.MPARK2,),
                   m_list=TABLE1_M_LIST[:5], coupling: float | None = TABLE1_COUPLING, dt: float | None = None,
                   norm: str = "weighted", threads: int | None = None) -> list[SweepRow]:
    """One-step error against ``exp(dt A) u0`` for each scheme over a grid sequence."""
    profile = InitialProfile.parse(profile)
    threads = sweep_threads() if threads is None else threads
    builders = {"diffusion": make_diffusion, "advection": make_upwind_advection}
    if operator not in builders:
        raise ValueError(f"unknown operator {operator!r} (choose from diffusion, advection)")

    def row(args):
        scheme, m = args
        grid = GridSpec(m)
        A = builders[operator](grid)
        h = dt if dt is not None else coupling * grid.dx
        return SweepRow(scheme, m, h, one_step_error(scheme, A, profile(grid.nodes), h, norm), None)

    out = []
    for scheme in schemes:
        rows = _map(row, [(SchemeId.parse(scheme), m) for m in m_list], threads)
        if len(rows) > 1 and all(r.error > 0 for r in rows):
            for r, p in zip(rows[1:], observed_orders([r.error for r in rows])):
                r.observed_order = float(p)
        out.extend(rows)
    return out
