"""Partitioned FSI coupling testbed with an equivalent-time cost model."""

from .costmodel import (
    CostFactors,
    TimingSample,
    equivalent_time,
    fit_coupling_cost,
    fit_solver_cost,
    literature_measure,
    mape_maxape,
    rmse,
    rrmse,
    scenario_cost,
)
from .coupling import (
    IqnHistory,
    TimeStepRecord,
    aitken_omega,
    check_convergence,
    iqn_ils_update,
    qr_filter,
    run_simulation,
    run_time_step,
)
from .interface import (
    AccelKind,
    CouplingConfig,
    CriterionKind,
    FieldRole,
    InterfaceField,
    IterationCounters,
    RunRecord,
    SolverCallReport,
    UNBOUNDED,
    deviation_from_reference,
    fixed_point_residual,
    residual_norm,
)
from .subproblem import (
    DriverKind,
    NonlinearSystemSpec,
    Preconditioner,
    SolverCallInput,
    SolverId,
    call_solver,
    newton_drive,
    picard_drive,
)

__version__ = "0.1.0"

__all__ = [
    "AccelKind",
    "CostFactors",
    "CouplingConfig",
    "CriterionKind",
    "DriverKind",
    "FieldRole",
    "InterfaceField",
    "IqnHistory",
    "IterationCounters",
    "NonlinearSystemSpec",
    "Preconditioner",
    "RunRecord",
    "SolverCallInput",
    "SolverCallReport",
    "SolverId",
    "TimeStepRecord",
    "TimingSample",
    "UNBOUNDED",
    "aitken_omega",
    "call_solver",
    "check_convergence",
    "deviation_from_reference",
    "equivalent_time",
    "fit_coupling_cost",
    "fit_solver_cost",
    "fixed_point_residual",
    "iqn_ils_update",
    "literature_measure",
    "mape_maxape",
    "newton_drive",
    "picard_drive",
    "qr_filter",
    "residual_norm",
    "rmse",
    "rrmse",
    "run_simulation",
    "run_time_step",
    "scenario_cost",
]
