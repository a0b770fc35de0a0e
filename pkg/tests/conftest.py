"""Shared fixtures; heavy objects are session-scoped so the expensive
Lanczos/flow computations run once across the whole suite."""
from __future__ import annotations

import numpy as np
import pytest

import tqolab as T
from tqolab.config import DEFAULT


@pytest.fixture(scope="session")
def toric2():
    return T.build_toric_code(2)


@pytest.fixture(scope="session")
def toric2_ground(toric2):
    return T.ground_data(toric2)


@pytest.fixture(scope="session")
def toric3():
    return T.build_toric_code(3)


@pytest.fixture(scope="session")
def toric3_ground(toric3):
    return T.ground_data(toric3)


@pytest.fixture(scope="session")
def ising31():
    return T.build_ising(3, 1)


@pytest.fixture(scope="session")
def ising31_ground(ising31):
    return T.ground_data(ising31)


@pytest.fixture(scope="session")
def ising22():
    return T.build_ising(2, 2)


@pytest.fixture(scope="session")
def toric2_field():
    model = T.build_toric_code(2)
    return T.uniform_field(model, "X", 0.05)


@pytest.fixture(scope="session")
def toric2_flow(toric2, toric2_ground, toric2_field):
    """Full flow to s=1 on the perturbed toric code; reused by many tests."""
    return T.evolve_U(toric2, toric2_field, 1.0, toric2_ground, T.build_F(), DEFAULT)


@pytest.fixture(scope="session")
def toric2_conjugation(toric2, toric2_ground, toric2_field, toric2_flow):
    return T.conjugated_hamiltonian(toric2_flow, toric2, toric2_field, DEFAULT)


@pytest.fixture(scope="session")
def toric2_rewrite(toric2, toric2_ground, toric2_conjugation):
    return T.rewrite_global_to_local(toric2_conjugation.H_prime, toric2,
                                     toric2_ground, T.build_g(), DEFAULT)


@pytest.fixture(scope="session")
def toric2_decompositions(toric2, toric2_ground, toric2_rewrite):
    return [T.decompose_local(x_u, toric2, toric2_ground, site, DEFAULT)
            for site, x_u in toric2_rewrite.site_terms.items()]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(71)
