"""Shared fixtures: the default parameter set and small cached grid solves.

The solves are session scoped because several test modules probe the same
fields; 64 cells per side keeps each solve well under a second while still
exhibiting the free boundary, the pushed region and the enlargement logic.
"""
from __future__ import annotations

import numpy as np
import pytest

from quadctrl import (
    CostParams,
    GridSpec,
    ModelParams,
    extract_boundary,
    solve_control_value,
    solve_stopping_value,
)


@pytest.fixture(scope="session")
def model() -> ModelParams:
    return ModelParams(theta=(0.0, 0.0), sigma=np.eye(2), gamma=1.0)


@pytest.fixture(scope="session")
def cost() -> CostParams:
    return CostParams(a=1.0, b1=1.0, b2=0.0)


@pytest.fixture(scope="session")
def grid64() -> GridSpec:
    return GridSpec(L1=8.0, L2=8.0, n1=64, n2=64)


@pytest.fixture(scope="session")
def u64(model, cost, grid64):
    return solve_stopping_value(model, cost, grid64)


@pytest.fixture(scope="session")
def v64(model, cost, grid64):
    return solve_control_value(model, cost, grid64)


@pytest.fixture(scope="session")
def bnd64(u64):
    return extract_boundary(u64)
