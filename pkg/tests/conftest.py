import numpy as np
import pytest

from lipcodesign.codesign import CoDesignConfig, run_codesign
from lipcodesign.manipulator import (
    D0,
    POLE_TARGETS,
    manipulator_plant,
    manipulator_transform,
)
from lipcodesign.plant import PlantFamily


@pytest.fixture(scope="session")
def manipulator():
    return manipulator_plant()


@pytest.fixture(scope="session")
def transform():
    return manipulator_transform()


@pytest.fixture(scope="session")
def manipulator_bar(manipulator, transform):
    return manipulator.transform(transform)


@pytest.fixture(scope="session")
def reference_config(transform):
    return CoDesignConfig(eta=1e-4, eta_bar=1e-4, mu=0.01, eps_g=1e-3,
                          transform=transform, pole_targets=POLE_TARGETS,
                          initial_d=np.array([D0]))


@pytest.fixture(scope="session")
def manipulator_run(manipulator, reference_config):
    return run_codesign(manipulator, reference_config)


def random_hurwitz(rng, n, shift=0.5):
    M = rng.normal(size=(n, n))
    return M - (np.max(np.linalg.eigvals(M).real) + shift + rng.uniform()) * np.eye(n)


def random_plant(rng, n_x, n_u=1, n_d=1, alpha=0.0):
    """Affine plant with C = [I; 0], D = [0; I] so that D^T C = 0 and R = I."""
    A0 = random_hurwitz(rng, n_x, shift=1.0)
    terms = tuple((i, 0.3 * rng.normal(size=(n_x, n_x))) for i in range(n_d))
    C = np.vstack([np.eye(n_x), np.zeros((n_u, n_x))])
    D = np.vstack([np.zeros((n_x, n_u)), np.eye(n_u)])
    return PlantFamily(A0=A0, A_terms=terms, B=rng.normal(size=(n_x, n_u)),
                       B_w=rng.normal(size=(n_x, 1)), C=C, D=D, alpha=alpha,
                       d_lower=-np.ones(n_d), d_upper=np.ones(n_d))
