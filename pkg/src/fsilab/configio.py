"""Flat key-value config files, shipped data access, and CSV helpers.

Config format: one ``key = value`` per line, ``#`` starts a comment, no
nesting. Caps and grid entries spell unbounded as the literal ``inf``.
All CSVs are comma-separated, ``.`` decimal point, LF line endings, UTF-8,
no quoting.
"""

from __future__ import annotations

import importlib.resources
import math
from pathlib import Path

from .errors import ContractError, TableParseError
from .interface import (
    AccelKind,
    CouplingConfig,
    CriterionKind,
    caps_list,
    parse_cap,
)
from .costmodel import CostFactors
from .models import LinearToyModel, ScalarToyModel, Tube1DModel, Tube1DParams
from .models.toys import ScalarToyParams
from .subproblem import DriverKind

# ---------------------------------------------------------------------------
# config files


def parse_config_text(text: str, source: str = "<config>") -> dict:
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TableParseError(f"{source}:{lineno}: expected 'key = value'", line=lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise TableParseError(f"{source}:{lineno}: empty key", line=lineno)
        cfg[key] = value.strip()
    return cfg


def parse_config(path) -> dict:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def _get(cfg: dict, key: str, default, convert):
    if key not in cfg:
        return default
    try:
        return convert(cfg[key])
    except (ValueError, ContractError) as exc:
        raise ContractError(f"config key {key!r}: {exc}") from exc


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_ACCEL = {a.value: a for a in AccelKind}
_CRITERION = {c.value: c for c in CriterionKind}
_DRIVER = {d.value: d for d in DriverKind}


def build_coupling_config(cfg: dict) -> CouplingConfig:
    return CouplingConfig(
        n_max_f=_get(cfg, "n_max_f", math.inf, parse_cap),
        n_max_s=_get(cfg, "n_max_s", math.inf, parse_cap),
        eps_f=_get(cfg, "eps_f", 1e-9, float),
        eps_s=_get(cfg, "eps_s", 1e-3, float),
        eps_fil=_get(cfg, "eps_fil", 1e-12, float),
        reuse_q=_get(cfg, "reuse_q", 5, int),
        omega0=_get(cfg, "omega0", 0.1, float),
        accel=_get(cfg, "accel", AccelKind.IQN_ILS, lambda t: _ACCEL[t.lower()]),
        criterion=_get(cfg, "criterion", CriterionKind.FIRST_RESIDUAL,
                       lambda t: _CRITERION[t.lower()]),
        eps_c=_get(cfg, "eps_c", 1e-10, float),
        criterion_relative=_get(cfg, "criterion_relative", False, _bool),
        max_coupling_iters_per_step=_get(cfg, "max_coupling_iters", 200, int),
        batch_size_f=_get(cfg, "batch_size_f", 1, int),
    )


def build_model(cfg: dict):
    kind = cfg.get("model", "tube1d").lower()
    if kind == "tube1d":
        defaults = Tube1DParams()
        params = Tube1DParams(
            length=_get(cfg, "length", defaults.length, float),
            radius=_get(cfg, "radius", defaults.radius, float),
            thickness=_get(cfg, "thickness", defaults.thickness, float),
            rho_f=_get(cfg, "rho_f", defaults.rho_f, float),
            mu_f=_get(cfg, "mu_f", defaults.mu_f, float),
            rho_s=_get(cfg, "rho_s", defaults.rho_s, float),
            youngs_modulus=_get(cfg, "youngs_modulus", defaults.youngs_modulus, float),
            poisson=_get(cfg, "poisson", defaults.poisson, float),
            cells=_get(cfg, "cells", defaults.cells, int),
            dt=_get(cfg, "dt", defaults.dt, float),
            steps=_get(cfg, "steps", defaults.steps, int),
            inlet_pulse=_get(cfg, "inlet_pulse", defaults.inlet_pulse, float),
            pulse_duration=_get(cfg, "pulse_duration", defaults.pulse_duration, float),
            outlet_pressure=_get(cfg, "outlet_pressure", defaults.outlet_pressure, float),
            kappa3=_get(cfg, "kappa3", defaults.kappa3, float),
        )
        driver = _get(cfg, "flow_scheme", DriverKind.NEWTON, lambda t: _DRIVER[t.lower()])
        return Tube1DModel(params, flow_driver=driver)
    if kind == "linear_toy":
        return LinearToyModel(
            dim_f=_get(cfg, "dim_f", 4, int),
            dim_s=_get(cfg, "dim_s", 4, int),
            coupling_strength=_get(cfg, "coupling_strength", 0.5, float),
            n_steps=_get(cfg, "steps", 1, int),
        )
    if kind == "scalar_toy":
        params = ScalarToyParams(
            alpha=_get(cfg, "alpha", 2.0, float),
            beta=_get(cfg, "beta", 1.0, float),
            b0=_get(cfg, "b0", 4.0, float),
            stiffness=_get(cfg, "stiffness", 1.0, float),
            kappa=_get(cfg, "kappa", 0.5, float),
        )
        return ScalarToyModel(params, n_steps=_get(cfg, "steps", 1, int))
    raise ContractError(f"unknown model {kind!r} (expected tube1d, linear_toy, scalar_toy)")


def grids_from_config(cfg: dict) -> tuple:
    if "grid_f" not in cfg or "grid_s" not in cfg:
        raise ContractError("sweep config requires grid_f and grid_s")
    return caps_list(cfg["grid_f"]), caps_list(cfg["grid_s"])


def factors_from_config(cfg: dict) -> CostFactors | None:
    keys = ("cost_c_couple", "cost_c_fix_f", "cost_c_iter_f", "cost_c_fix_s", "cost_c_iter_s")
    if not any(k in cfg for k in keys):
        return None
    return CostFactors(
        c_couple=_get(cfg, "cost_c_couple", 0.0, float),
        c_fix_f=_get(cfg, "cost_c_fix_f", 0.0, float),
        c_iter_f=_get(cfg, "cost_c_iter_f", 0.0, float),
        c_fix_s=_get(cfg, "cost_c_fix_s", 0.0, float),
        c_iter_s=_get(cfg, "cost_c_iter_s", 0.0, float),
    )


# ---------------------------------------------------------------------------
# shipped data

PUBLISHED_TABLES = ("fe_fe_cavity", "fv_fe_cavity", "fe_fe_tube", "fv_fe_tube")


def data_path(filename: str) -> Path:
    return Path(importlib.resources.files("fsilab") / "data" / filename)


def published_table_path(case: str) -> Path:
    if case not in PUBLISHED_TABLES:
        raise ContractError(f"unknown published table {case!r}; expected one of {PUBLISHED_TABLES}")
    return data_path(f"published_{case}.csv")


def regression_summary_path() -> Path:
    return data_path("regression_summary.csv")


# ---------------------------------------------------------------------------
# CSV helpers


def read_csv_rows(path) -> list:
    """(lineno, fields) for every non-comment line, header first."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rows.append((lineno, line.split(",")))
    if not rows:
        raise TableParseError(f"{path}: no rows")
    return rows


def fmt(value) -> str:
    """Shortest round-trip float formatting; '' for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_factors_csv(path, case: str | None = None) -> tuple:
    """Read cost factors from a CSV with the regression-summary schema.

    Returns ``(CostFactors, published_gamma_or_None)``. A ``case`` column is
    optional; when present and the file holds several rows, ``case`` selects
    one.
    """
    rows = read_csv_rows(path)
    header_line, header = rows[0]
    cols = {name.strip(): i for i, name in enumerate(header)}
    required = ("c_fix_f", "c_iter_f", "c_fix_s", "c_iter_s", "c_couple")
    for col in required:
        if col not in cols:
            raise TableParseError(f"{path}:{header_line}: missing column {col!r}",
                                  line=header_line)
    data = rows[1:]
    if "case" in cols and case is not None:
        data = [r for r in data if r[1][cols["case"]].strip() == case]
        if not data:
            raise TableParseError(f"{path}: no row with case={case!r}")
    if len(data) != 1:
        raise TableParseError(
            f"{path}: expected exactly one factors row (use case= to select), got {len(data)}"
        )
    lineno, fields = data[0]
    try:
        factors = CostFactors(
            c_couple=float(fields[cols["c_couple"]]),
            c_fix_f=float(fields[cols["c_fix_f"]]),
            c_iter_f=float(fields[cols["c_iter_f"]]),
            c_fix_s=float(fields[cols["c_fix_s"]]),
            c_iter_s=float(fields[cols["c_iter_s"]]),
        )
        gamma = float(fields[cols["gamma"]]) if "gamma" in cols else None
    except (ValueError, IndexError) as exc:
        raise TableParseError(f"{path}:{lineno}: {exc}", line=lineno) from exc
    return factors, gamma


def load_published_counters(case: str) -> list:
    """Non-diverged rows of a shipped table: (cap_f, cap_s, N_c, N_f, N_s)."""
    rows = read_csv_rows(published_table_path(case))
    out = []
    for lineno, fields in rows[1:]:
        if fields[2].strip() == "":
            continue
        out.append((parse_cap(fields[0]), parse_cap(fields[1]),
                    int(fields[3]), int(fields[4]), int(fields[5])))
    return out
