#!/usr/bin/env python
"""This file takes you from a model problem (or a Matrix Market file) to
aggregates built by compatible weighted matching, and to the numbers that
tell how good those aggregates are.

Example Use:
    one experiment, constant coefficients on a 12 x 12 grid, two matching
    sweeps, with a map of the aggregates:
    ./start_amgmatch_pipeline.py --problem constant -n 12 --sweeps 2 \\
        --svg out/aggregates.svg

    a whole table, four worker processes, rows as CSV and pivoted by
    sweep count:
    ./start_amgmatch_pipeline.py --config tables/constant.cfg --threads 4 \\
        --out out/constant.csv --table-layout out/constant_layout.csv

    your own matrix, with a weight vector from a file:
    ./start_amgmatch_pipeline.py --matrix my.mtx --weight-file my.txt

    how the quality of the aggregates changes while the weight vector is
    refined by l1-Jacobi sweeps:
    ./start_amgmatch_pipeline.py --problem random -n 48 --weight random \\
        --study refinement --steps 80 --out out/refinement.csv

Exit codes: 0 on success, 1 when a numerical step fails, 2 on usage errors.
"""
import argparse
import logging
import multiprocessing
import os
import sys

import numpy as np

from amgmatch import coarsening, experiment, visualize
from amgmatch.bootstrap import BootstrapConfig, bootstrap_build
from amgmatch.matching import MATCHER_NAMES, InvalidMatcherParamsError
from amgmatch.solver import VCycle, pcg_solve
from linalg_util import file_util
from linalg_util.eigen_util import DEFAULT_SEED
from linalg_util.sparse_util import NumericalError

# Necessary on some systems to make sure all cores are used. If not all
# cores are being used and you'd like a speedup, pip install affinity
try:
    import affinity
    affinity.set_process_affinity_mask(0, 2 ** multiprocessing.cpu_count() - 1)
except (ImportError, NotImplementedError):
    pass

logger = logging.getLogger('amgmatch')

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2
STUDIES = ('refinement', 'random-coefficient')


def get_command_line_arguments(arguments=None):
    """Gets command line arguments passed in when called, or
    can be called from within a program.

    Parses input from the command line into options for one experiment, a
    batch of experiments (--config), or a study. For more fine-grained
    options, look at amgmatch/experiment.py.
    """
    parser = argparse.ArgumentParser(
        description='Coarsening based on compatible weighted matching.')
    parser.add_argument(
        '--config', default=None,
        help='An INI batch file; one experiment per section.')
    parser.add_argument(
        '--out', default=None,
        help='Where to write the report rows (or the study curve).')
    parser.add_argument(
        '--format', choices=('csv', 'json'), default='csv',
        help='Format of the --out report.')
    parser.add_argument(
        '--table-layout', default=None,
        help=('Also write the rows pivoted to one line per problem, '
              'matcher and n.'))
    parser.add_argument(
        '--svg', default=None,
        help='Write a colored map of the aggregates (single experiments).')
    parser.add_argument(
        '--aggregates', default=None,
        help='Write the aggregate map as (index, aggregate_id) CSV.')
    parser.add_argument(
        '--report-json', default=None,
        help='Write the full quality report, per aggregate spectra '
        'included, as JSON.')
    parser.add_argument(
        '--history', default=None,
        help='Solve A x = b with V-cycle preconditioned CG and write the '
        'residual history as CSV.')
    parser.add_argument(
        '--threads', type=int, default=1,
        help='Worker processes for the rows of a batch.')
    parser.add_argument(
        '--no-timing', action='store_true',
        help='Leave the timing column out of the report.')

    parser.add_argument(
        '--problem', choices=experiment.PROBLEMS, default='constant',
        help='The model problem.')
    parser.add_argument(
        '-n', type=int, default=12,
        help='Grid cells per direction for finite difference problems.')
    parser.add_argument(
        '--matrix', default=None,
        help='A Matrix Market file; implies --problem matrix.')
    parser.add_argument(
        '--mesh', default=None,
        help='A triangle mesh file for --problem fem.')
    parser.add_argument(
        '--levels', type=int, default=3,
        help='Refinements of the structured mesh when --mesh is not given.')
    parser.add_argument(
        '--epsilon', type=float, default=0.0,
        help='Anisotropy ratio; 100 for anisotropy and 1 otherwise when 0.')
    parser.add_argument(
        '--axis', choices=('x', 'y'), default='x',
        help='The direction scaled by epsilon.')
    parser.add_argument(
        '--theta', type=float, default=0.0,
        help='Rotation of the anisotropic tensor of fem problems.')
    parser.add_argument(
        '--seed', type=int, default=DEFAULT_SEED,
        help='Seed of random coefficients, random weights and eigensolvers.')

    parser.add_argument(
        '--matcher', choices=MATCHER_NAMES, default='exact',
        help='The matching algorithm.')
    parser.add_argument(
        '--sweeps', type=int, default=1,
        help='Matching sweeps per coarsening (aggregates of up to 2^sweeps).')
    parser.add_argument(
        '--weight', choices=experiment.WEIGHTS, default='ones',
        help='How the weight vector is chosen.')
    parser.add_argument(
        '--weight-file', default=None,
        help='A plain text weight vector, one value per line; implies '
        '--weight file.')
    parser.add_argument(
        '--refine-steps', type=int, default=0,
        help='l1-Jacobi sweeps applied to ones or random weights.')
    parser.add_argument(
        '--bootstrap-r', type=int, default=4,
        help='Hierarchies built by --weight bootstrap.')
    parser.add_argument(
        '--bootstrap-m', type=int, default=1,
        help='Composite iterations per bootstrap step.')
    parser.add_argument(
        '--rho', action='store_true',
        help='Also measure the compatible relaxation ratio.')
    parser.add_argument(
        '--solver', action='store_true',
        help='Also measure the two-level convergence factor.')

    parser.add_argument(
        '--study', choices=STUDIES, default=None,
        help='Run a study instead of a single experiment.')
    parser.add_argument(
        '--steps', type=int, default=experiment.REFINEMENT_STEPS,
        help='Refinement steps of the refinement study.')
    parser.add_argument(
        '--samples', type=int, default=20,
        help='Coefficient samples of the random-coefficient study.')
    parser.add_argument(
        '-v', '--verbose', action='store_true',
        help='Log debugging output.')

    arguments = parser.parse_args(arguments)

    # Support file paths in the form of "~/blah", which python
    # doesn't normally recognise
    for name in ('config', 'out', 'table_layout', 'svg', 'aggregates',
                 'report_json', 'history', 'matrix', 'mesh', 'weight_file'):
        value = getattr(arguments, name)
        if value:
            setattr(arguments, name, os.path.expanduser(value))

    if arguments.matrix:
        arguments.problem = 'matrix'
    if arguments.weight_file:
        arguments.weight = 'file'
    if arguments.threads < 1:
        parser.error('--threads must be at least 1')
    if arguments.config and (arguments.svg or arguments.history
                             or arguments.study):
        parser.error('--svg, --history and --study need a single experiment, '
                     'not --config')
    return arguments


def configure_logging(verbose=False):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: '
                                           '%(message)s'))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    logging.captureWarnings(True)


def config_from_arguments(arguments):
    """The ExperimentConfig described by the single-experiment flags."""
    return experiment.ExperimentConfig(
        name='%s_n%d_%s_l%d' % (arguments.problem, arguments.n,
                                arguments.matcher, arguments.sweeps),
        problem=arguments.problem,
        n=arguments.n,
        mesh=arguments.mesh or '',
        levels=arguments.levels,
        matrix=arguments.matrix or '',
        weight_file=arguments.weight_file or '',
        epsilon=arguments.epsilon,
        axis=arguments.axis,
        theta=arguments.theta,
        seed=arguments.seed,
        matcher=arguments.matcher,
        sweeps=arguments.sweeps,
        weight=arguments.weight,
        refine_steps=arguments.refine_steps,
        bootstrap_r=arguments.bootstrap_r,
        bootstrap_m=arguments.bootstrap_m,
        rho=arguments.rho,
        solver=arguments.solver)


def write_reports(rows, arguments):
    """Print the rows and write whatever outputs were asked for."""
    visualize.print_report(rows)
    if arguments.out:
        experiment.write_rows(rows, arguments.out, arguments.format,
                              timing=not arguments.no_timing)
        logger.info('wrote %d rows to %s', len(rows), arguments.out)
    if arguments.table_layout:
        header, lines = experiment.table_layout(rows)
        file_util.write_csv(arguments.table_layout, header, lines)


def run_history(result, arguments):
    """Solve with a V-cycle built from the experiment's weight vector and
    record the residuals."""
    if arguments.weight == 'bootstrap':
        composite, _ = bootstrap_build(result.A, BootstrapConfig(
            r=arguments.bootstrap_r, m=arguments.bootstrap_m,
            sweeps=arguments.sweeps, matcher=arguments.matcher,
            seed=arguments.seed))
        preconditioner = composite.apply
    else:
        hierarchy = coarsening.build_amg_hierarchy(
            result.A, result.w, arguments.matcher, arguments.sweeps)
        preconditioner = VCycle(hierarchy).apply
    b = np.random.default_rng(arguments.seed).uniform(
        -1.0, 1.0, size=result.A.shape[0])
    history = []
    _, iterations = pcg_solve(result.A, preconditioner, b, history=history)
    file_util.write_history_csv(history, arguments.history)
    logger.info('PCG converged in %d iterations; history in %s', iterations,
                arguments.history)


def run_study(arguments):
    config = config_from_arguments(arguments)
    if arguments.study == 'refinement':
        curve = experiment.refinement_study(config, arguments.steps,
                                            arguments.out)
        for step, mu_inv in curve:
            print('%4d %.4f' % (step, mu_inv))
        return curve
    seeds = list(range(arguments.seed, arguments.seed + arguments.samples))
    summary = experiment.random_coefficient_study(config, seeds,
                                                  arguments.out)
    print('mu_inv over %d samples: median %.3f, quartiles %.3f %.3f, '
          'range %.3f %.3f' % (len(seeds), summary['median'], summary['q1'],
                               summary['q3'], summary['min'],
                               summary['max']))
    return summary


def run_with_arguments(arguments):
    """Run a batch, a study or one experiment, and write its outputs."""
    if arguments.config:
        rows = experiment.run_table(arguments.config, arguments.threads)
        write_reports(rows, arguments)
        return rows
    if arguments.study:
        return run_study(arguments)

    result = experiment.coarsen_experiment(config_from_arguments(arguments))
    write_reports([result.row], arguments)
    if arguments.svg:
        visualize.emit_aggregate_svg(result.aggregates, result.geometry,
                                     arguments.svg, title=result.row.name)
    if arguments.aggregates:
        coarsening.write_aggregate_csv(result.aggregates,
                                       arguments.aggregates)
    if arguments.report_json:
        file_util.ensure_parent_dir(arguments.report_json)
        result.report.to_json(arguments.report_json)
    if arguments.history:
        run_history(result, arguments)
    return [result.row]


def main(arguments=None):
    """Get arguments from the command line and runs with those arguments.

    Returns the exit code.
    """
    arguments = get_command_line_arguments(arguments)
    configure_logging(arguments.verbose)
    try:
        run_with_arguments(arguments)
    except (experiment.ConfigError, InvalidMatcherParamsError) as exc:
        sys.stderr.write('[%s] %s\n' % (exc.module, exc))
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write('[%s] %s\n' % (exc.module, exc))
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
