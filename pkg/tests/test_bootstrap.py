import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest

from amgmatch.bootstrap import (
    BootstrapConfig, CompositeSolver, bootstrap_build, initial_weight)
from amgmatch.coarsening import build_amg_hierarchy
from amgmatch.problems import CoefficientField, gen_fd_diffusion
from amgmatch.solver import SolverError, pcg_solve, refine_weight
from linalg_util.sparse_util import l1_jacobi_diagonal
from tests.util import dense_error_operator


@pytest.fixture(scope='module')
def jump_12():
    return gen_fd_diffusion(12, CoefficientField.jump())


@pytest.fixture(scope='module')
def jump_bootstrap(jump_12):
    return bootstrap_build(jump_12, BootstrapConfig(r=3, max_coarse=10))


@pytest.mark.parametrize('params', [
    {'r': 0}, {'m': 0}, {'sweeps': 0}, {'initial': 'zeros'},
    {'initial_steps': -1},
])
def test_config_errors(params):
    with pytest.raises(SolverError):
        BootstrapConfig(**params)


def test_initial_weights(jump_12):
    A = jump_12
    M = l1_jacobi_diagonal(A)
    assert_allclose(initial_weight(A, BootstrapConfig(initial='ones')), 1.0)
    assert_allclose(
        initial_weight(A, BootstrapConfig(initial='ones-refined',
                                          initial_steps=5)),
        refine_weight(A, M, np.ones(144), 5))
    random = initial_weight(A, BootstrapConfig(initial='random', seed=3))
    assert_allclose(random, initial_weight(
        A, BootstrapConfig(initial='random', seed=3)))
    assert np.abs(random).max() == 1.0
    assert np.any(random < 0)


def test_single_step_is_one_hierarchy(jump_12):
    config = BootstrapConfig(r=1, max_coarse=10)
    composite, history = bootstrap_build(jump_12, config)
    assert composite.r == 1
    assert len(history) == 1
    reference = build_amg_hierarchy(jump_12, initial_weight(jump_12, config),
                                    'exact', 2, 10)
    built = composite.cycles[0].hierarchy
    assert built.sizes == reference.sizes
    assert_array_equal(built.levels[0].aggregates.agg_of,
                       reference.levels[0].aggregates.agg_of)
    # with a single V(1,1) cycle, ||E||_A is the measured factor
    assert history[0].composite_factor == pytest.approx(history[0].factor,
                                                        abs=1e-2)


def test_history(jump_bootstrap):
    composite, history = jump_bootstrap
    assert composite.r == 3
    assert [step.step for step in history] == [0, 1, 2]
    for step in history:
        assert 0.0 < step.factor < 1.0
        assert step.mu_inv > 0.0
        assert step.sizes[0] == 144
    assert not np.allclose(history[0].weight, history[1].weight)
    factors = [step.composite_factor for step in history]
    assert all(later <= earlier + 1e-2
               for earlier, later in zip(factors, factors[1:]))
    assert factors[-1] <= history[0].factor + 1e-2


def test_default_bootstrap_improves_every_step(jump_12):
    # four exact two-sweep hierarchies from ones smoothed by five l1-Jacobi
    # steps, one V(1,1) cycle each
    composite, history = bootstrap_build(jump_12, BootstrapConfig())
    assert composite.r == 4
    factors = [step.composite_factor for step in history]
    assert all(later <= earlier + 1e-6
               for earlier, later in zip(factors, factors[1:]))
    assert_allclose(factors, [0.825, 0.640, 0.493, 0.399], atol=0.02)


def test_composite_error_operator(jump_12, jump_bootstrap, rng):
    composite, _ = jump_bootstrap
    A = jump_12
    E = dense_error_operator(composite.error_apply, 144)
    AE = A.toarray() @ E
    assert_allclose(AE, AE.T, atol=1e-10)
    assert np.linalg.eigvalsh(0.5 * (AE + AE.T)).min() >= -1e-10
    e = rng.standard_normal(144)
    assert_allclose(e - composite.apply(A @ e), composite.error_apply(e),
                    atol=1e-10)


def test_composite_preconditioner(jump_12, jump_bootstrap, rng):
    composite, _ = jump_bootstrap
    b = rng.uniform(-1.0, 1.0, 144)
    x, iterations = pcg_solve(jump_12, composite.apply, b, rtol=1e-8)
    assert np.linalg.norm(b - jump_12 @ x) <= 1e-8 * np.linalg.norm(b)
    assert iterations <= 10


def test_empty_composite(jump_12):
    with pytest.raises(SolverError, match='empty'):
        CompositeSolver(jump_12).conv_factor()
