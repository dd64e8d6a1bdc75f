"""Black-box subproblem abstraction and the generic inner-iteration drivers.

Every subproblem is posed as ``A(u) u = b`` with the right-hand side assembled
once per solver call and held fixed across inner iterations. Both drivers share
the same loop shape:

    for i = 1, 2, ...:   evaluate r = b - A(u) u, record ||r||/sqrt(n),
                         update u, then stop if the recorded norm beat eps.

The update runs even on the converged iteration (black-box solvers cannot exit
before updating), which is what makes ``converged_on_first`` well defined.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import (
    ContractError,
    DivergenceError,
    LinearSolveError,
    PreconditionerError,
)
from .interface import (
    Cap,
    FieldRole,
    InterfaceField,
    SolverCallReport,
    UNBOUNDED,
    is_unbounded,
    residual_norm,
    validate_cap,
)

# Safety limits for nominally unbounded inner loops.
_ITER_CEILING = 100_000
_GROWTH_GUARD = 1e8


class Preconditioner(Enum):
    DIAGONAL_OF_A = "diag"
    FULL_A = "full"


class DriverKind(Enum):
    NEWTON = "newton"
    PICARD = "picard"


class SolverId(Enum):
    FLOW = "flow"
    SOLID = "solid"


@dataclass
class NonlinearSystemSpec:
    """One subproblem in ``A(u) u = b`` form.

    ``assemble_rhs`` maps the coupling input (an :class:`InterfaceField`) to the
    right-hand side; it is evaluated exactly once per solver call. ``tangent``
    must return ``K(u) = A(u) + (dA/du) u`` and is required by the Newton
    driver. ``extract_output`` maps the converged interior state to the
    interface field this solver feeds back to its partner.
    """

    dim: int
    assemble_matrix: Callable[[np.ndarray], np.ndarray]
    assemble_rhs: Callable[[InterfaceField], np.ndarray]
    tangent: Callable[[np.ndarray], np.ndarray] | None = None
    preconditioner: Preconditioner = Preconditioner.DIAGONAL_OF_A
    driver: DriverKind = DriverKind.NEWTON
    extract_output: Callable[[np.ndarray], InterfaceField] | None = None
    label: str = ""


@dataclass
class SolverCallInput:
    """Arguments of one black-box solver call.

    ``u0`` is the interior state carried over from this solver's previous call;
    the driver leaves it untouched and returns the new state.
    """

    u0: np.ndarray
    coupling_data: InterfaceField
    eps: float
    n_max: Cap = UNBOUNDED
    batch_size: int = 1

    def __post_init__(self):
        validate_cap(self.n_max, "n_max")
        if self.eps <= 0:
            raise ContractError("eps must be positive")
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")


def _prepare(spec: NonlinearSystemSpec, inp: SolverCallInput):
    u = np.array(inp.u0, dtype=float)
    if u.shape != (spec.dim,):
        raise ContractError(f"u0 has shape {u.shape}, expected ({spec.dim},)")
    if not np.all(np.isfinite(u)):
        raise ContractError("u0 contains non-finite entries")
    b = np.array(spec.assemble_rhs(inp.coupling_data), dtype=float)
    if b.shape != (spec.dim,):
        raise ContractError(f"rhs has shape {b.shape}, expected ({spec.dim},)")
    b.setflags(write=False)  # b is frozen for the whole call
    return u, b


def _guards(history: list, i: int, u: np.ndarray, bounded: bool, label: str) -> None:
    if not np.all(np.isfinite(u)):
        raise DivergenceError(f"{label}: non-finite iterate at inner iteration {i}")
    if not bounded:
        if i >= _ITER_CEILING:
            raise DivergenceError(f"{label}: no convergence within {_ITER_CEILING} iterations")
        if history[-1] > _GROWTH_GUARD * max(history[0], 1.0):
            raise DivergenceError(f"{label}: residual grew beyond guard at iteration {i}")


def _report(history: list, eps: float) -> SolverCallReport:
    return SolverCallReport(
        inner_iters=len(history),
        residual_history=tuple(history),
        converged_on_first=history[0] < eps,
        final_residual=history[-1],
    )


def newton_drive(spec: NonlinearSystemSpec, inp: SolverCallInput):
    """Newton inner iterations on ``A(u) u = b``; returns ``(u, report)``."""
    if spec.tangent is None:
        raise ContractError("newton_drive requires a tangent map")
    u, b = _prepare(spec, inp)
    bounded = not is_unbounded(inp.n_max)
    history: list = []
    i = 0
    while True:
        i += 1
        A = spec.assemble_matrix(u)
        r = b - A @ u
        history.append(residual_norm(r, spec.dim))
        K = spec.tangent(u)
        try:
            du = np.linalg.solve(K, r)
        except np.linalg.LinAlgError as exc:
            raise LinearSolveError(
                f"{spec.label or 'newton'}: singular tangent at inner iteration {i}",
                iteration=i,
            ) from exc
        u = u + du
        _guards(history, i, u, bounded, spec.label or "newton")
        if history[-1] < inp.eps:
            break
        if bounded and i >= inp.n_max:
            break
    return u, _report(history, inp.eps)


def picard_drive(spec: NonlinearSystemSpec, inp: SolverCallInput):
    """Fixed-point inner iterations ``M(u)(u' - u) = b - A(u) u``.

    With ``batch_size`` B > 1, convergence is only checked after each block of
    B iterations, so the iteration count is a multiple of B unless the cap
    truncates the final batch.
    """
    u, b = _prepare(spec, inp)
    bounded = not is_unbounded(inp.n_max)
    B = inp.batch_size
    history: list = []
    i = 0
    while True:
        i += 1
        A = spec.assemble_matrix(u)
        r = b - A @ u
        history.append(residual_norm(r, spec.dim))
        if spec.preconditioner is Preconditioner.FULL_A:
            M = A
        else:
            M = np.diag(np.diag(A))
        try:
            du = np.linalg.solve(M, r)
        except np.linalg.LinAlgError as exc:
            raise PreconditionerError(
                f"{spec.label or 'picard'}: singular preconditioner at inner iteration {i}",
                iteration=i,
            ) from exc
        u = u + du
        _guards(history, i, u, bounded, spec.label or "picard")
        if i % B == 0 and history[-1] < inp.eps:
            break
        if bounded and i >= inp.n_max:
            break
    return u, _report(history, inp.eps)


_DRIVERS = {DriverKind.NEWTON: newton_drive, DriverKind.PICARD: picard_drive}

_EXPECTED_ROLE = {SolverId.FLOW: FieldRole.TRACTION, SolverId.SOLID: FieldRole.DISPLACEMENT}


def call_solver(solver_id: SolverId, spec: NonlinearSystemSpec, inp: SolverCallInput):
    """Run one black-box solver call.

    Applies the coupling data to the right-hand side, runs the system's
    configured driver, extracts the interface output (traction for the flow
    solver, displacement for the solid solver), and attaches the measured wall
    time. Returns ``(output_field, report, final_u)``; ``final_u`` seeds the
    next call.
    """
    if spec.extract_output is None:
        raise ContractError("call_solver requires an extract_output map")
    start = time.perf_counter()
    try:
        u, report = _DRIVERS[spec.driver](spec, inp)
    except (LinearSolveError, PreconditionerError, DivergenceError) as exc:
        exc.args = (f"{solver_id.value} solver: {exc.args[0]}",) + exc.args[1:]
        raise
    output = spec.extract_output(u)
    if output.role is not _EXPECTED_ROLE[solver_id]:
        raise ContractError(
            f"{solver_id.value} solver must output a {_EXPECTED_ROLE[solver_id].value} field"
        )
    report = replace(report, wall_time=time.perf_counter() - start)
    return output, report, u
