"""Shared fixtures: the cached unit-coupling reference table, the boundary
profile built from it, and the big product-model eigenvalue table that the
asymptotic checks share."""

import math
import os

import pytest

os.environ.setdefault(
    "GRUSHIN_CACHE_DIR", os.path.join(os.path.expanduser("~"), ".cache", "grushin")
)

from grushin import (
    ModelOperator,
    assemble_spectrum,
    cached_reference_spectrum,
    circle_spectrum,
    compute_profile_B,
    derive_params,
    reference_spectrum,
    required_mu_max,
)

LADDER = (500.0, 1000.0, 2000.0, 4000.0)
X_MAX = 3.0
CIRCLE_LENGTH = 2.0 * math.pi


@pytest.fixture(scope="session")
def params13():
    return derive_params(1, 3)


@pytest.fixture(scope="session")
def ref200(params13):
    return cached_reference_spectrum(params13, k_max=200, certificate_tol=1e-4)


@pytest.fixture(scope="session")
def ref_critical():
    """Small critical-regime table (n=1, beta=2): the Calogero oracle case."""
    return reference_spectrum(derive_params(1, 2), k_max=5, certificate_tol=1e-4)


@pytest.fixture(scope="session")
def profile_b(ref200):
    return compute_profile_B(ref200)


@pytest.fixture(scope="session")
def model_big(params13):
    mu_star = required_mu_max(params13, LADDER[-1], x_max=X_MAX)
    cross = circle_spectrum(CIRCLE_LENGTH, 4.0 * mu_star)
    return ModelOperator(params=params13, cross=cross, x_max=X_MAX)


@pytest.fixture(scope="session")
def table4000(model_big):
    return assemble_spectrum(model_big, LADDER[-1], want_vectors=True, workers=4)


@pytest.fixture(scope="session")
def model_small(params13):
    """Quick unit-test model: default-size box, modest energy range."""
    mu_star = required_mu_max(params13, 300.0)
    cross = circle_spectrum(CIRCLE_LENGTH, 4.0 * mu_star)
    return ModelOperator(params=params13, cross=cross, x_max=1.0)


@pytest.fixture(scope="session")
def table_small(model_small):
    return assemble_spectrum(model_small, 300.0, want_vectors=True, workers=2)
