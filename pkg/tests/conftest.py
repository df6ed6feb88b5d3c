import math

import numpy as np
import pytest

from spacesplit.cocycle import build_frame
from spacesplit.expressions import field_from_expressions, observable_from_expression
from spacesplit.quadrature import run_chains
from spacesplit.torus import cat_map, perturbed_cat_map

LAMBDA_U = (3 + math.sqrt(5)) / 2
LAMBDA_S = (3 - math.sqrt(5)) / 2


def unstable_eigvec():
    # closed form: eigenvector (1, lambda_u - 2) of [[2, 1], [1, 1]]
    v = np.array([1.0, LAMBDA_U - 2.0])
    return v / np.linalg.norm(v)


@pytest.fixture(scope="session")
def cat():
    return cat_map()


@pytest.fixture(scope="session")
def shear():
    return field_from_expressions(["0", "sin(2*pi*x)"], name="shear")


@pytest.fixture(scope="session")
def cosx():
    return observable_from_expression("cos(2*pi*x)")


@pytest.fixture(scope="session")
def pert(shear):
    return perturbed_cat_map(1e-2, shear)


def orbits(model, n_chains=4, n_steps=200, seed=0):
    starts = np.random.default_rng(seed).random((n_chains, 2))
    return run_chains(model, starts, n_steps)


@pytest.fixture(scope="session")
def cat_frame(cat):
    return build_frame(cat, orbits(cat))


@pytest.fixture(scope="session")
def pert_frame(pert):
    return build_frame(pert, orbits(pert, n_chains=3, n_steps=260, seed=3))
