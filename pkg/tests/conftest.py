"""Fixtures shared by the test modules."""
import os

import numpy as np
import pytest
import scipy.sparse

from amgmatch.problems import CoefficientField, gen_fd_diffusion

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SAMPLE_DATA = os.path.join(ROOT, 'sample_data')


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope='session')
def laplacian_12():
    return gen_fd_diffusion(12)


@pytest.fixture(scope='session')
def anisotropic_12():
    return gen_fd_diffusion(12, CoefficientField.anisotropic(100.0))


@pytest.fixture
def tridiagonal():
    def build(n):
        return scipy.sparse.diags(
            [-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)],
            [-1, 0, 1]).tocsr()
    return build


@pytest.fixture
def fixture_path():
    def path(name):
        return os.path.join(SAMPLE_DATA, 'fixtures', name)
    return path


@pytest.fixture
def mesh_path():
    def path(name):
        return os.path.join(SAMPLE_DATA, 'meshes', name)
    return path
