"""Run coarsening experiments and collect their reports.

An experiment builds a problem, picks a weight vector, coarsens with a
matcher and measures the result. Batches of experiments are INI files: every
section is one experiment, and keys in the optional [defaults] section apply
to all of them, e.g.

    [defaults]
    problem = constant
    matcher = exact

    [n12_l1]
    n = 12
    sweeps = 1

Rows of a batch run in worker processes when threads > 1; a row that fails
records its error and the batch goes on.
"""
import configparser
from dataclasses import asdict, dataclass, fields
import json
import logging
import multiprocessing
import time

import numpy as np

from amgmatch.bootstrap import BootstrapConfig, bootstrap_build
from amgmatch.coarsening import coarsen_sweeps
from amgmatch.matching import MATCHER_NAMES, get_matcher
from amgmatch.meshes import gen_structured_trimesh, load_trimesh
from amgmatch.problems import (
    CoefficientField, GridGeometry, assemble_p1, gen_fd_diffusion)
from amgmatch.quality import (
    DAGGER, SymmetrizedSmoother, evaluate, mu_global, smallest_eigvec_Tbar)
from amgmatch.solver import (
    CoarseSolver, measure_conv_factor, refine_weight, tl_error_apply)
from linalg_util.eigen_util import DEFAULT_SEED
from linalg_util.file_util import ensure_parent_dir, write_csv
from linalg_util.matrix_market_util import read_matrix_market
from linalg_util.sparse_util import (
    NumericalError, galerkin_product, l1_jacobi_diagonal)

logger = logging.getLogger(__name__)

PROBLEMS = ('constant', 'anisotropy', 'jump', 'random', 'fem', 'matrix')
WEIGHTS = ('ones', 'random', 'ones-refined', 'eigenvector', 'bootstrap',
           'file')
REFINEMENT_STEPS = 80
REPORT_COLUMNS = ('name', 'problem', 'n', 'dofs', 'matcher', 'sweeps',
                  'weight', 'mu_inv', 'bound', 'splitting_verified', 'rho_f',
                  'conv_factor', 'seconds', 'error')


class ConfigError(NumericalError, ValueError):
    """Raise when an experiment description is invalid."""
    module = 'cli'


@dataclass(frozen=True)
class ExperimentConfig(object):
    """One experiment.

    problem: constant, anisotropy (epsilon, axis), jump, random (seed),
        fem (a mesh file or structured levels; theta and epsilon give the
        rotated tensor), or matrix (a Matrix Market file).
    weight: ones, random (seed), ones-refined, eigenvector, bootstrap
        (bootstrap_r, bootstrap_m) or file (weight_file); refine_steps
        l1-Jacobi sweeps are applied to ones and random weights.
    """
    name: str = 'experiment'
    problem: str = 'constant'
    n: int = 12
    mesh: str = ''
    levels: int = 3
    matrix: str = ''
    weight_file: str = ''
    epsilon: float = 0.0
    axis: str = 'x'
    theta: float = 0.0
    seed: int = DEFAULT_SEED
    matcher: str = 'exact'
    sweeps: int = 1
    weight: str = 'ones'
    refine_steps: int = 0
    bootstrap_r: int = 4
    bootstrap_m: int = 1
    rho: bool = False
    solver: bool = False

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError('unknown problem "%s"; choose from %s' % (
                self.problem, ', '.join(PROBLEMS)))
        if self.matcher not in MATCHER_NAMES:
            raise ConfigError('unknown matcher "%s"; choose from %s' % (
                self.matcher, ', '.join(MATCHER_NAMES)))
        if self.weight not in WEIGHTS:
            raise ConfigError('unknown weight "%s"; choose from %s' % (
                self.weight, ', '.join(WEIGHTS)))
        if self.problem in ('constant', 'anisotropy', 'jump', 'random') and \
                self.n < 2:
            raise ConfigError('n must be at least 2, got %d' % self.n)
        if self.problem == 'matrix' and not self.matrix:
            raise ConfigError('problem "matrix" needs a matrix file')
        if self.weight == 'file' and not self.weight_file:
            raise ConfigError('weight "file" needs a weight_file')
        if self.sweeps < 1 or self.refine_steps < 0:
            raise ConfigError('sweeps must be >= 1 and refine_steps >= 0')
        if self.epsilon < 0:
            raise ConfigError('epsilon must be positive')

    @property
    def effective_epsilon(self):
        """epsilon, defaulting to 100 for anisotropy and 1 otherwise."""
        if self.epsilon:
            return self.epsilon
        return 100.0 if self.problem == 'anisotropy' else 1.0

    @classmethod
    def from_section(cls, name, section):
        """Build from a configparser section; unknown keys are errors."""
        known = {f.name: f for f in fields(cls)}
        values = {'name': name}
        for key in section:
            if key not in known or key == 'name':
                raise ConfigError('[%s]: unknown key "%s"' % (name, key))
            kind = known[key].type
            try:
                if kind in (int, 'int'):
                    values[key] = section.getint(key)
                elif kind in (float, 'float'):
                    values[key] = section.getfloat(key)
                elif kind in (bool, 'bool'):
                    values[key] = section.getboolean(key)
                else:
                    values[key] = section.get(key).strip()
            except ValueError as exc:
                raise ConfigError('[%s] %s: %s' % (name, key, exc))
        return cls(**values)

    def to_dict(self):
        return asdict(self)


@dataclass
class ReportRow(object):
    """One line of a report. bound is None when no splitting was found and
    is printed as a dagger."""
    name: str
    problem: str
    n: int
    dofs: int
    matcher: str
    sweeps: int
    weight: str
    mu_inv: object = None
    bound: object = None
    splitting_verified: bool = False
    rho_f: object = None
    conv_factor: object = None
    seconds: float = 0.0
    error: str = ''

    @property
    def bound_label(self):
        if self.error:
            return ''
        return DAGGER if self.bound is None else '%.3f' % self.bound

    def to_dict(self, timing=True):
        data = asdict(self)
        data['bound'] = self.bound_label if self.bound is None else self.bound
        if not timing:
            data.pop('seconds')
        return data

    def csv_fields(self):
        def number(value):
            return '' if value is None else '%.6f' % value
        return (self.name, self.problem, self.n, self.dofs, self.matcher,
                self.sweeps, self.weight, number(self.mu_inv),
                self.bound_label, self.splitting_verified,
                number(self.rho_f), number(self.conv_factor),
                '%.3f' % self.seconds, self.error)


class ExperimentResult(object):
    """Everything run_experiment computed, for callers that also want the
    aggregates and geometry (the SVG writer does)."""

    def __init__(self, config, A, geometry, w, hierarchy, report, row):
        self.config = config
        self.A = A
        self.geometry = geometry
        self.w = w
        self.hierarchy = hierarchy
        self.report = report
        self.row = row

    @property
    def aggregates(self):
        return self.hierarchy.composite_aggregates()


def build_problem(config):
    """Return (A, geometry); geometry is a GridGeometry, a TriMesh or None."""
    if config.problem == 'matrix':
        return read_matrix_market(config.matrix), None
    if config.problem == 'fem':
        mesh = (load_trimesh(config.mesh) if config.mesh
                else gen_structured_trimesh(config.levels))
        field = CoefficientField.rotated(config.theta,
                                         config.effective_epsilon)
        return assemble_p1(mesh, field), mesh
    if config.problem == 'anisotropy':
        field = CoefficientField.anisotropic(config.effective_epsilon,
                                             config.axis)
    elif config.problem == 'jump':
        field = CoefficientField.jump()
    elif config.problem == 'random':
        field = CoefficientField.random(config.seed)
    else:
        field = CoefficientField.constant()
    return gen_fd_diffusion(config.n, field), GridGeometry(config.n)


def read_weight_file(path, n):
    """A plain text weight vector, one value per line."""
    try:
        w = np.loadtxt(path, ndmin=1)
    except (OSError, ValueError) as exc:
        raise ConfigError('cannot read weight file %s: %s' % (path, exc))
    if w.shape != (n,):
        raise ConfigError('weight file %s has %d values, the matrix has %d '
                          'rows' % (path, w.size, n))
    return w


def choose_weight(A, config):
    """The weight vector of a (non-bootstrap) experiment."""
    n = A.shape[0]
    if config.weight == 'file':
        return read_weight_file(config.weight_file, n)
    if config.weight == 'eigenvector':
        _, w = smallest_eigvec_Tbar(A, SymmetrizedSmoother(A))
        return w
    if config.weight == 'random':
        w = np.random.default_rng(config.seed).uniform(-1.0, 1.0, size=n)
    else:
        w = np.ones(n)
    steps = config.refine_steps
    if config.weight == 'ones-refined' and not steps:
        steps = 5
    if steps:
        w = refine_weight(A, l1_jacobi_diagonal(A), w, steps)
    return w


def two_level_factor(A, P, seed=DEFAULT_SEED):
    """A-norm factor of the post-smoothed two-level method."""
    M = l1_jacobi_diagonal(A)
    coarse = CoarseSolver(galerkin_product(P, A))
    return measure_conv_factor(
        lambda e: tl_error_apply(A, P, M, coarse, e), A, seed=seed)


def coarsen_experiment(config):
    """Run one experiment and keep its intermediate results."""
    start = time.perf_counter()
    A, geometry = build_problem(config)
    conv_factor = None
    if config.weight == 'bootstrap':
        composite, history = bootstrap_build(A, BootstrapConfig(
            r=config.bootstrap_r, m=config.bootstrap_m,
            sweeps=config.sweeps, matcher=config.matcher, seed=config.seed))
        w = history[-1].weight
        conv_factor = history[-1].composite_factor
    else:
        w = choose_weight(A, config)
    hierarchy = coarsen_sweeps(A, w, get_matcher(config.matcher),
                               config.sweeps)
    P = hierarchy.composite_prolongator()
    agg = hierarchy.composite_aggregates()
    complement = hierarchy.composite_complement() if config.rho else None
    report = evaluate(A, P, agg, complement, w,
                      metadata={'problem': config.problem,
                                'matcher': config.matcher,
                                'sweeps': config.sweeps,
                                'weight': config.weight})
    if config.solver and conv_factor is None:
        conv_factor = two_level_factor(A, P, config.seed)
    size = config.n if isinstance(geometry, GridGeometry) else A.shape[0]
    row = ReportRow(config.name, config.problem, size, A.shape[0],
                    config.matcher, config.sweeps, config.weight,
                    report.mu_inv, report.bound, report.splitting_verified,
                    report.rho_f, conv_factor, time.perf_counter() - start)
    logger.info('%s: mu_inv %.4f bound %s', config.name, row.mu_inv,
                row.bound_label)
    return ExperimentResult(config, A, geometry, w, hierarchy, report, row)


def run_experiment(config):
    """Run one experiment and return its ReportRow."""
    return coarsen_experiment(config).row


def _run_row(config):
    try:
        return run_experiment(config)
    except NumericalError as exc:
        logger.error('[%s] %s: %s', exc.module, config.name, exc)
        return ReportRow(config.name, config.problem, config.n, 0,
                         config.matcher, config.sweeps, config.weight,
                         error='[%s] %s' % (exc.module, exc))


def read_batch(path):
    """The ExperimentConfigs of an INI batch file, in file order."""
    parser = configparser.ConfigParser(default_section='defaults',
                                       interpolation=None)
    try:
        with open(path) as infile:
            parser.read_file(infile)
    except (OSError, configparser.Error) as exc:
        raise ConfigError('cannot read batch file %s: %s' % (path, exc))
    return [ExperimentConfig.from_section(name, parser[name])
            for name in parser.sections()]


def run_table(path, threads=1):
    """Run every experiment of a batch file; returns the ReportRows."""
    configs = read_batch(path)
    if threads > 1 and len(configs) > 1:
        pool = multiprocessing.Pool(threads)
        try:
            rows = pool.map(_run_row, configs)
        finally:
            pool.close()
            pool.join()
    else:
        rows = [_run_row(config) for config in configs]
    failed = sum(1 for row in rows if row.error)
    if failed:
        logger.warning('%d of %d rows failed', failed, len(rows))
    return rows


def write_rows(rows, path, fmt='csv', timing=True):
    """Write report rows as CSV, or as JSON with sorted keys."""
    if fmt == 'json':
        ensure_parent_dir(path)
        with open(path, 'w', encoding='utf-8') as outfile:
            json.dump([row.to_dict(timing) for row in rows], outfile,
                      indent=4, sort_keys=True, ensure_ascii=False)
            outfile.write('\n')
    elif fmt == 'csv':
        columns = REPORT_COLUMNS if timing else tuple(
            c for c in REPORT_COLUMNS if c != 'seconds')
        write_csv(path, columns, (
            [value for column, value in zip(REPORT_COLUMNS, row.csv_fields())
             if column in columns] for row in rows))
    else:
        raise ConfigError('unknown report format "%s"' % fmt)


def table_layout(rows):
    """Pivot rows into the (problem, matcher, n | bound and mu_inv per
    number of sweeps) table layout.

    Returns:
        (header, lines) ready for write_csv.
    """
    sweeps = sorted({row.sweeps for row in rows if not row.error})
    header = ['problem', 'matcher', 'n']
    for count in sweeps:
        header += ['bound_l%d' % count, 'mu_inv_l%d' % count]
    table = {}
    for row in rows:
        if row.error:
            continue
        key = (row.problem, row.matcher, row.n)
        table.setdefault(key, {})[row.sweeps] = row
    lines = []
    for key in sorted(table, key=lambda k: (k[0], MATCHER_NAMES.index(k[1]),
                                            k[2])):
        line = list(key)
        for count in sweeps:
            row = table[key].get(count)
            if row is None:
                line += ['', '']
            else:
                line += [row.bound_label, '%.3f' % row.mu_inv]
        lines.append(line)
    return header, lines


def refinement_study(config, steps=REFINEMENT_STEPS, path=None):
    """mu_c^-1 of the coarsening after each of steps refinement sweeps of
    the weight vector (ones or random start).

    Returns:
        a list of (step, mu_inv); also written as CSV when path is given.
    """
    A, _ = build_problem(config)
    M = l1_jacobi_diagonal(A)
    if config.weight == 'random':
        w = np.random.default_rng(config.seed).uniform(-1.0, 1.0,
                                                       size=A.shape[0])
    else:
        w = np.ones(A.shape[0])
    w = refine_weight(A, M, w, 0)
    matcher = get_matcher(config.matcher)
    curve = []
    for step in range(steps + 1):
        if step:
            w = refine_weight(A, M, w, 1)
        hierarchy = coarsen_sweeps(A, w, matcher, config.sweeps)
        mu_inv, _ = mu_global(A, None, hierarchy.composite_prolongator())
        curve.append((step, mu_inv))
        logger.debug('refinement step %d: mu_inv %.4f', step, mu_inv)
    if path is not None:
        write_csv(path, ('step', 'mu_inv'),
                  ((step, '%.6f' % mu) for step, mu in curve))
    return curve


def random_coefficient_study(config, seeds, path=None):
    """mu_c^-1 over random coefficient samples, one per seed.

    Returns:
        dict with the values and their median, quartiles and extremes.
    """
    values = []
    for seed in seeds:
        sample = ExperimentConfig(**dict(config.to_dict(), problem='random',
                                         seed=int(seed)))
        A, _ = build_problem(sample)
        w = choose_weight(A, sample)
        hierarchy = coarsen_sweeps(A, w, get_matcher(sample.matcher),
                                   sample.sweeps)
        mu_inv, _ = mu_global(A, None, hierarchy.composite_prolongator())
        values.append(mu_inv)
    values = np.array(values)
    if path is not None:
        write_csv(path, ('seed', 'mu_inv'),
                  ((seed, '%.6f' % mu) for seed, mu in zip(seeds, values)))
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return {'values': values.tolist(), 'median': float(median),
            'q1': float(q1), 'q3': float(q3), 'min': float(values.min()),
            'max': float(values.max())}
