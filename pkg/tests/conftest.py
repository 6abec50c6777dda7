"""Shared, session-scoped coefficient sequences (the expensive inputs)."""

from __future__ import annotations

import pytest

from krylov import coulomb_gas, weight_lanczos, weights


@pytest.fixture(scope="session")
def sech40():
    return weight_lanczos.stieltjes_coefficients(weights.sech(0.0), 40)


@pytest.fixture(scope="session")
def sech_half40():
    return weight_lanczos.stieltjes_coefficients(weights.sech(-0.5), 40)


@pytest.fixture(scope="session")
def sech40_measure():
    return coulomb_gas.equilibrium_density(weights.sech(0.0), 40, points=4001)


@pytest.fixture(scope="session")
def sech_half40_measure():
    return coulomb_gas.equilibrium_density(weights.sech(-0.5), 40, points=4001)
