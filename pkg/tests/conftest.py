"""Shared fixtures. The expensive tube cap sweep runs once per session."""

from __future__ import annotations

import math
import time
from dataclasses import replace

import pytest

from fsilab import CouplingConfig, CriterionKind, run_simulation
from fsilab.errors import DivergedStepError
from fsilab.models import Tube1DModel
from fsilab.models.tube import Tube1DParams

CAPS = (1, 2, 3, math.inf)


@pytest.fixture(scope="session")
def elapsed():
    """Wall-time bookkeeping for the acceptance runtime budgets."""
    return {}


@pytest.fixture(scope="session")
def tube_params():
    return Tube1DParams()  # shipped defaults: 100 cells, 100 steps


@pytest.fixture(scope="session")
def tube_config():
    return CouplingConfig()  # shipped defaults: IQN-ILS, first-residual criterion


@pytest.fixture(scope="session")
def tube_reference_run(tube_params, tube_config, elapsed):
    """Uncapped first-residual run of the full tube problem."""
    start = time.perf_counter()
    record = run_simulation(Tube1DModel(tube_params), tube_config)
    elapsed["tube_reference"] = time.perf_counter() - start
    return record


@pytest.fixture(scope="session")
def tube_fixed_point_run(tube_params, tube_config, elapsed):
    """Same problem under the legacy fixed-point criterion at 1e-10."""
    config = replace(tube_config, criterion=CriterionKind.FIXED_POINT_NORM, eps_c=1e-10)
    start = time.perf_counter()
    record = run_simulation(Tube1DModel(tube_params), config)
    elapsed["tube_fixed_point"] = time.perf_counter() - start
    return record


@pytest.fixture(scope="session")
def tube_cap_sweep(tube_params, tube_config, elapsed):
    """Records of the full {1,2,3,inf}^2 cap grid; None marks a diverged cell."""
    start = time.perf_counter()
    results = {}
    for cap_f in CAPS:
        for cap_s in CAPS:
            config = replace(tube_config, n_max_f=cap_f, n_max_s=cap_s)
            try:
                results[(cap_f, cap_s)] = run_simulation(Tube1DModel(tube_params), config)
            except DivergedStepError:
                results[(cap_f, cap_s)] = None
    elapsed["tube_cap_sweep"] = time.perf_counter() - start
    return results
