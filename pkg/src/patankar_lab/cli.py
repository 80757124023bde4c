"""``patankar-lab`` command line: experiment drivers emitting deterministic CSV.

Usage::

    patankar-lab <experiment> [--m N | --m-list a,b,c] [--dt X | --courant V]
                 [--T X] [--profile id] [--schemes s1,s2] [--operator op]
                 [--norm weighted|unweighted|max] [--reference pde|semidiscrete]
                 [--out PATH] [--config FILE]

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, field, fields, replace

from . import experiments
from .errorlab import TABLE1_COUPLING, TABLE1_M_LIST
from .integrators import SchemeId, StepFailure
from .models import InitialProfile, UnknownProfileError
from .numkernel import NumericalError

EXPERIMENTS = ("table1", "fig1", "wetdry", "sweep")
NORMS = ("weighted", "unweighted", "max")
REFERENCES = ("pde", "semidiscrete")
OPERATORS = ("diffusion", "advection")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    m: int | None = None
    m_list: tuple[int, ...] | None = None
    dt: float | None = None
    courant: float | None = None
    T: float | None = None
    profile: str | None = None
    schemes: tuple[str, ...] | None = None
    operator: str = "diffusion"
    norm: str = "weighted"
    reference: str = "pde"
    out: str | None = None

    def manifest(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name.replace('_', '-')}={value}")
        return "\n".join(lines) + "\n"


@dataclass
class CsvReport:
    """Header plus rows; an optional summary table is written after a blank line."""

    header: list[str]
    rows: list[list] = field(default_factory=list)
    summary: "CsvReport | None" = None

    def render(self) -> str:
        buf = io.StringIO()
        self._write(buf)
        if self.summary is not None:
            buf.write("\n")
            self.summary._write(buf)
        return buf.getvalue()

    def _write(self, buf):
        buf.write(",".join(self.header) + "\n")
        for row in self.rows:
            buf.write(",".join(format_cell(c) for c in row) + "\n")


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.11e}"
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


# -- configuration ------------------------------------------------------------

_KEYS = {
    "m": int,
    "m-list": lambda s: tuple(int(x) for x in s.split(",") if x.strip()),
    "dt": float,
    "courant": float,
    "T": float,
    "profile": str,
    "schemes": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
    "operator": str,
    "norm": str,
    "reference": str,
    "out": str,
}


def read_config_file(path: str) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="patankar-lab", description="Patankar-type time integration experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--m", type=int)
    grid.add_argument("--m-list", type=_KEYS["m-list"], dest="m_list")
    step = p.add_mutually_exclusive_group()
    step.add_argument("--dt", type=float)
    step.add_argument("--courant", type=float, help="dt / dx (speed 1)")
    p.add_argument("--T", type=float)
    p.add_argument("--profile")
    p.add_argument("--schemes", type=_KEYS["schemes"])
    p.add_argument("--operator", choices=OPERATORS)
    p.add_argument("--norm", choices=NORMS)
    p.add_argument("--reference", choices=REFERENCES)
    p.add_argument("--out")
    p.add_argument("--config")
    return p


def parse_config(argv) -> ExperimentConfig:
    """Merge config-file values with command-line flags (flags win) and validate."""
    args = build_parser().parse_args(list(argv))
    values = read_config_file(args.config) if args.config else {}
    if "dt" in values and "courant" in values:
        raise ConfigError("config file sets both dt and courant")
    if "m" in values and "m-list" in values:
        raise ConfigError("config file sets both m and m-list")
    cli = {k: getattr(args, k.replace("-", "_")) for k in _KEYS}
    cli = {k: v for k, v in cli.items() if v is not None}
    if "dt" in cli or "courant" in cli:
        values.pop("dt", None)
        values.pop("courant", None)
    if "m" in cli or "m-list" in cli:
        values.pop("m", None)
        values.pop("m-list", None)
    values.update(cli)
    cfg = ExperimentConfig(args.experiment, **{k.replace("-", "_"): v for k, v in values.items()})
    return _with_defaults(cfg)


def _with_defaults(cfg: ExperimentConfig) -> ExperimentConfig:
    exp = cfg.experiment
    if cfg.norm not in NORMS:
        raise ConfigError(f"unknown norm {cfg.norm!r}")
    if cfg.reference not in REFERENCES:
        raise ConfigError(f"unknown reference {cfg.reference!r}")
    if cfg.operator not in OPERATORS:
        raise ConfigError(f"unknown operator {cfg.operator!r}")
    if cfg.profile is not None:
        try:
            InitialProfile.parse(cfg.profile)
        except UnknownProfileError as exc:
            raise ConfigError(str(exc)) from None
    if cfg.schemes is not None:
        try:
            for s in cfg.schemes:
                SchemeId.parse(s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    for name in ("dt", "courant", "T"):
        value = getattr(cfg, name)
        if value is not None and not value > 0:
            raise ConfigError(f"--{name} must be positive")

    if exp in ("table1", "sweep"):
        if cfg.m is not None:
            cfg = replace(cfg, m_list=(cfg.m,), m=None)
        if cfg.m_list is None:
            cfg = replace(cfg, m_list=TABLE1_M_LIST if exp == "table1" else TABLE1_M_LIST[:5])
        _check_m_list(cfg.m_list)
    elif cfg.m_list is not None:
        raise ConfigError(f"{exp} takes a single --m, not --m-list")

    if exp == "table1":
        if cfg.dt is not None:
            raise ConfigError("table1 ties dt to dx; use --courant for dt/dx")
        if cfg.profile is not None and InitialProfile.parse(cfg.profile) is InitialProfile.WAVE:
            raise ConfigError("table1 uses smooth_floor or sine_squared")
        if cfg.courant is None:
            cfg = replace(cfg, courant=TABLE1_COUPLING)
    elif exp == "fig1":
        cfg = replace(cfg, m=cfg.m or 160, profile=cfg.profile or InitialProfile.SMOOTH_FLOOR.value)
        if cfg.dt is None and cfg.courant is None:
            cfg = replace(cfg, courant=TABLE1_COUPLING)
    elif exp == "wetdry":
        cfg = replace(
            cfg,
            m=cfg.m or 160,
            T=cfg.T if cfg.T is not None else 2.0,
            profile=cfg.profile or InitialProfile.WAVE.value,
            schemes=cfg.schemes or tuple(s.value for s in experiments.WETDRY_SCHEMES),
        )
        if cfg.dt is None and cfg.courant is None:
            cfg = replace(cfg, courant=10.0)
        if cfg.courant is not None:
            cfg = replace(cfg, dt=cfg.courant * (1.0 / cfg.m))
    elif exp == "sweep":
        cfg = replace(
            cfg,
            profile=cfg.profile or InitialProfile.SMOOTH_FLOOR.value,
            schemes=cfg.schemes or (SchemeId.MPARK2.value,),
        )
        if cfg.dt is None and cfg.courant is None:
            cfg = replace(cfg, courant=TABLE1_COUPLING)
    if cfg.m is not None and cfg.m < 2:
        raise ConfigError("--m must be at least 2")
    return cfg


def _check_m_list(m_list):
    if not m_list:
        raise ConfigError("empty m-list")
    if m_list[0] < 2:
        raise ConfigError("grid sizes must be at least 2")
    for k, m in enumerate(m_list):
        if m != m_list[0] * 2**k:
            raise ConfigError(f"m-list must double at every entry, got {','.join(map(str, m_list))}")


# -- experiments --------------------------------------------------------------


def run_table1(cfg: ExperimentConfig) -> CsvReport:
    profiles = (
        (InitialProfile.parse(cfg.profile),)
        if cfg.profile
        else (InitialProfile.SMOOTH_FLOOR, InitialProfile.SINE_SQUARED)
    )
    rows = experiments.table1(profiles, cfg.m_list, cfg.courant, cfg.norm, cfg.reference)
    return CsvReport(
        ["profile", "m", "dt", "l2_local_error", "observed_order", "s_norm", "residual_norm"],
        [[r.profile, r.m, r.dt, r.local_error, r.observed_order, r.s_norm, r.residual_norm] for r in rows],
    )


def run_fig1(cfg: ExperimentConfig) -> CsvReport:
    data = experiments.stage_ratios(cfg.profile, cfg.m, dt=cfg.dt, coupling=cfg.courant or TABLE1_COUPLING)
    rows = [list(map(float, r)) for r in zip(data.x, data.u0, data.ratio, data.a2u, data.weighted_a2u)]
    return CsvReport(["x", "u0", "ratio", "a2u0", "weighted_a2u0"], rows)


def run_wetdry(cfg: ExperimentConfig) -> CsvReport:
    res = experiments.wetdry(cfg.m, cfg.dt, cfg.T, cfg.schemes, cfg.profile)
    schemes = list(res.solutions)
    header = ["x", "reference", "pde_reference"] + [s.value for s in schemes]
    cols = [res.x, res.reference, res.pde_reference] + [res.solutions[s] for s in schemes]
    rows = [list(map(float, r)) for r in zip(*cols)]
    summary = CsvReport(
        ["scheme", "final_min", "trajectory_min", "mass_drift", "l2_error", "max_error",
         "l2_error_dry", "max_error_dry", "pde_l2_error", "pde_l2_error_dry", "clip_events"],
        [[s.scheme, s.final_min, s.trajectory_min, s.mass_drift, s.l2_error, s.max_error,
          s.l2_error_dry, s.max_error_dry, s.pde_l2_error, s.pde_l2_error_dry, s.clip_events]
         for s in res.summaries],
    )
    return CsvReport(header, rows, summary)


def run_sweep(cfg: ExperimentConfig) -> CsvReport:
    rows = experiments.one_step_sweep(
        cfg.operator, cfg.profile, cfg.schemes, cfg.m_list, coupling=cfg.courant, dt=cfg.dt, norm=cfg.norm
    )
    return CsvReport(
        ["scheme", "m", "dt", "error", "observed_order"],
        [[r.scheme, r.m, r.dt, r.error, r.observed_order] for r in rows],
    )


RUNNERS = {"table1": run_table1, "fig1": run_fig1, "wetdry": run_wetdry, "sweep": run_sweep}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        experiments.sweep_threads()  # reject a malformed PATANKAR_LAB_THREADS up front
    except ConfigError as exc:
        print(f"patankar-lab: error: {exc}", file=sys.stderr)
        print(build_parser().format_usage(), file=sys.stderr, end="")
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"patankar-lab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = RUNNERS[cfg.experiment](cfg)
    except StepFailure as exc:
        print(f"patankar-lab: numerical failure at step {exc.step_index}: {exc.cause}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"patankar-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"patankar-lab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.render()
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        with open(cfg.out + ".manifest", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(cfg.manifest())
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
