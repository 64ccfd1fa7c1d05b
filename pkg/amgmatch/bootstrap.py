"""Bootstrap construction of a composite AMG solver.

Starting from a weight vector w_0, every step refines the current weight by
m applications of the composite error operator built so far, then builds a
new hierarchy from the refined weight and appends its V-cycle:

    w_j = prod_p (I - B_p A) w_(j-1)

Each step is recorded (weight, mu_c^-1 of its first coarsening, V-cycle
factor, composite factor), much like the per-epoch state of an EM fit.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from amgmatch.coarsening import MAX_COARSE, build_amg_hierarchy
from amgmatch.matching import get_matcher
from amgmatch.quality import mu_global
from amgmatch.solver import (
    SolverError, VCycle, measure_conv_factor, refine_weight)
from linalg_util.eigen_util import DEFAULT_SEED
from linalg_util.sparse_util import as_sparse_matrix, l1_jacobi_diagonal

logger = logging.getLogger(__name__)

INITIAL_WEIGHTS = ('ones', 'ones-refined', 'random', 'random-refined')


@dataclass(frozen=True)
class BootstrapConfig(object):
    """r hierarchies, m composite iterations per step, sweeps matching
    rounds per coarsening; the initial weight is all ones or seeded uniform
    random, optionally refined by initial_steps l1-Jacobi sweeps."""
    r: int = 4
    m: int = 1
    sweeps: int = 2
    matcher: str = 'exact'
    initial: str = 'ones-refined'
    initial_steps: int = 5
    seed: int = DEFAULT_SEED
    max_coarse: int = MAX_COARSE

    def __post_init__(self):
        if self.r < 1 or self.m < 1:
            raise SolverError('bootstrap needs r >= 1 and m >= 1, got '
                              'r=%d m=%d' % (self.r, self.m))
        if self.sweeps < 1:
            raise SolverError('sweeps must be >= 1, got %d' % self.sweeps)
        if self.initial not in INITIAL_WEIGHTS:
            raise SolverError('unknown initial weight "%s"' % self.initial)
        if self.initial_steps < 0:
            raise SolverError('initial_steps must be >= 0')


class CompositeSolver(object):
    """Multiplicative composition of V-cycles B_0 .. B_(r-1).

    One application runs the cycles forward and then backward, so the error
    operator F* F, with F = E_(r-1) ... E_0, is A-self-adjoint and the
    composite is a valid CG preconditioner.
    """

    def __init__(self, A, cycles=None):
        self.A = as_sparse_matrix(A)
        self.cycles = list(cycles or [])

    def add(self, cycle):
        self.cycles.append(cycle)

    @property
    def r(self):
        return len(self.cycles)

    def error_apply_forward(self, e):
        """F e."""
        for cycle in self.cycles:
            e = cycle.error_apply(e)
        return e

    def error_apply(self, e):
        """F* F e."""
        e = self.error_apply_forward(e)
        for cycle in reversed(self.cycles):
            e = cycle.error_apply(e)
        return e

    def apply(self, g):
        """B g with I - B A = F* F."""
        g = np.asarray(g, dtype=float)
        x = np.zeros_like(g)
        for cycle in self.cycles + self.cycles[::-1]:
            x += cycle.apply(g - self.A @ x)
        return x

    def conv_factor(self, tol=1e-6, maxiter=2000, seed=DEFAULT_SEED):
        """||F||_A, the square root of the factor of F* F."""
        if not self.cycles:
            raise SolverError('empty composite solver')
        return float(np.sqrt(measure_conv_factor(
            self.error_apply, self.A, tol=tol, maxiter=maxiter, seed=seed)))


@dataclass
class BootstrapStep(object):
    step: int
    weight: np.ndarray
    mu_inv: float
    factor: float
    composite_factor: float
    sizes: list = field(default_factory=list)


def initial_weight(A, config):
    n = A.shape[0]
    if config.initial.startswith('random'):
        w = np.random.default_rng(config.seed).uniform(-1.0, 1.0, size=n)
    else:
        w = np.ones(n)
    steps = config.initial_steps if config.initial.endswith('refined') else 0
    return refine_weight(A, l1_jacobi_diagonal(A), w, steps)


def bootstrap_build(A, config=None):
    """Build config.r hierarchies one after the other.

    Returns:
        (CompositeSolver, history), history holding one BootstrapStep per
        hierarchy. Raises SolverError when a V-cycle does not converge.
    """
    config = config or BootstrapConfig()
    A = as_sparse_matrix(A)
    matcher = get_matcher(config.matcher)
    composite = CompositeSolver(A)
    history = []
    w = initial_weight(A, config)
    for step in range(config.r):
        if step > 0:
            for _ in range(config.m):
                w = composite.error_apply_forward(w)
            w = refine_weight(A, l1_jacobi_diagonal(A), w, 0)
        hierarchy = build_amg_hierarchy(A, w, matcher, config.sweeps,
                                        config.max_coarse)
        cycle = VCycle(hierarchy)
        factor = measure_conv_factor(cycle.error_apply, A, seed=config.seed)
        if not factor < 1.0:
            raise SolverError(
                'hierarchy %d does not converge: factor %.6f, sizes %s' % (
                    step, factor, hierarchy.sizes))
        mu_inv, _ = mu_global(A, None, hierarchy.levels[0].P)
        composite.add(cycle)
        composite_factor = composite.conv_factor(seed=config.seed)
        history.append(BootstrapStep(step, w.copy(), mu_inv, factor,
                                     composite_factor, hierarchy.sizes))
        logger.info('bootstrap step %d: mu_inv %.4f, factor %.4f, composite '
                    '%.4f', step, mu_inv, factor, composite_factor)
    return composite, history
