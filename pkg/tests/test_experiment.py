import json
import os

import numpy as np
import pytest

from amgmatch import experiment
from amgmatch.experiment import (
    ConfigError, ExperimentConfig, ReportRow, read_batch, run_experiment,
    run_table, table_layout, write_rows)
from amgmatch.meshes import TriMesh
from amgmatch.problems import GridGeometry
from linalg_util.file_util import read_csv

BATCH = """# two sweeps of the 12 x 12 Laplacian, and a row that cannot run
[defaults]
problem = constant
n = 12

[exact_n12_l1]
matcher = exact
sweeps = 1

[suitor_n12_l2]
matcher = suitor
sweeps = 2

[too_big]
matcher = bruteforce
"""


@pytest.fixture
def batch_file(tmp_path):
    path = tmp_path / 'batch.cfg'
    path.write_text(BATCH)
    return str(path)


@pytest.mark.parametrize('params', [
    {'problem': 'poisson3d'},
    {'matcher': 'hungarian'},
    {'weight': 'heavy'},
    {'n': 1},
    {'problem': 'matrix'},
    {'weight': 'file'},
    {'sweeps': 0},
    {'refine_steps': -1},
    {'epsilon': -1.0},
])
def test_config_errors(params):
    with pytest.raises(ConfigError):
        ExperimentConfig(**params)


def test_effective_epsilon():
    assert ExperimentConfig(problem='anisotropy').effective_epsilon == 100.0
    assert ExperimentConfig(problem='fem').effective_epsilon == 1.0
    assert ExperimentConfig(problem='fem',
                            epsilon=0.01).effective_epsilon == 0.01


def test_read_batch(batch_file):
    configs = read_batch(batch_file)
    assert [c.name for c in configs] == ['exact_n12_l1', 'suitor_n12_l2',
                                         'too_big']
    assert all(c.problem == 'constant' and c.n == 12 for c in configs)
    assert configs[1].sweeps == 2
    assert configs[2].sweeps == 1


@pytest.mark.parametrize('body, message', [
    ('[row]\ncolour = red\n', 'unknown key'),
    ('[row]\nn = twelve\n', 'n'),
    ('[row]\nname = other\n', 'unknown key'),
    ('no section header\n', 'cannot read'),
])
def test_bad_batch_files(tmp_path, body, message):
    path = tmp_path / 'bad.cfg'
    path.write_text(body)
    with pytest.raises(ConfigError, match=message):
        read_batch(str(path))


def test_missing_batch_file(tmp_path):
    with pytest.raises(ConfigError, match='cannot read'):
        read_batch(str(tmp_path / 'nowhere.cfg'))


def test_shipped_tables_parse():
    root = os.path.join(os.path.dirname(os.path.dirname(
        os.path.abspath(__file__))), 'tables')
    for name in sorted(os.listdir(root)):
        configs = read_batch(os.path.join(root, name))
        assert configs, name
        assert len({c.name for c in configs}) == len(configs)


def test_constant_laplacian_row():
    result = experiment.coarsen_experiment(ExperimentConfig(
        name='c12', n=12, rho=True, solver=True))
    row = result.row
    assert (row.n, row.dofs) == (12, 144)
    assert row.mu_inv == pytest.approx(1.940, abs=0.02)
    assert row.bound == pytest.approx(2.0)
    assert row.bound_label == '2.000'
    assert row.splitting_verified
    assert 0.0 < row.rho_f < 1.0
    assert 0.0 < row.conv_factor < 1.0
    assert isinstance(result.geometry, GridGeometry)
    assert result.aggregates.n == 144
    assert result.report.metadata['matcher'] == 'exact'


def test_exact_anisotropy_two_sweeps():
    row = run_experiment(ExperimentConfig(problem='anisotropy', n=12,
                                          sweeps=2))
    assert row.mu_inv == pytest.approx(3.443, abs=0.01)


def test_eigenvector_weight_row():
    row = run_experiment(ExperimentConfig(n=12, weight='eigenvector'))
    assert row.mu_inv == pytest.approx(1.429, abs=0.02)
    assert row.mu_inv < run_experiment(ExperimentConfig(n=12)).mu_inv


def test_optional_measures_are_left_out():
    row = run_experiment(ExperimentConfig(n=6))
    assert row.rho_f is None
    assert row.conv_factor is None
    fields = row.csv_fields()
    assert fields[10] == '' and fields[11] == ''


def test_matrix_problem(fixture_path):
    result = experiment.coarsen_experiment(ExperimentConfig(
        problem='matrix', matrix=fixture_path('split_failure.mtx')))
    assert result.geometry is None
    assert (result.row.n, result.row.dofs) == (4, 4)


def test_structured_fem_problem():
    result = experiment.coarsen_experiment(ExperimentConfig(
        problem='fem', levels=2, matcher='suitor'))
    assert isinstance(result.geometry, TriMesh)
    assert result.row.dofs == 9
    assert result.row.n == 9


def test_weight_file(tmp_path):
    path = str(tmp_path / 'w.txt')
    np.savetxt(path, np.linspace(1.0, 2.0, 36))
    config = ExperimentConfig(n=6, weight='file', weight_file=path)
    result = experiment.coarsen_experiment(config)
    np.testing.assert_allclose(result.w, np.linspace(1.0, 2.0, 36))
    with pytest.raises(ConfigError, match='49 rows'):
        run_experiment(ExperimentConfig(n=7, weight='file', weight_file=path))
    with pytest.raises(ConfigError, match='cannot read'):
        run_experiment(ExperimentConfig(
            n=6, weight='file', weight_file=str(tmp_path / 'missing.txt')))


def test_weight_choices():
    A, _ = experiment.build_problem(ExperimentConfig(n=6))
    ones = experiment.choose_weight(A, ExperimentConfig(n=6))
    np.testing.assert_allclose(ones, 1.0)
    refined = experiment.choose_weight(
        A, ExperimentConfig(n=6, weight='ones-refined'))
    assert np.abs(refined).max() == pytest.approx(1.0)
    assert refined.min() < 1.0
    random = experiment.choose_weight(
        A, ExperimentConfig(n=6, weight='random', seed=5))
    np.testing.assert_allclose(random, experiment.choose_weight(
        A, ExperimentConfig(n=6, weight='random', seed=5)))
    eigenvector = experiment.choose_weight(
        A, ExperimentConfig(n=6, weight='eigenvector'))
    assert np.linalg.norm(eigenvector) == pytest.approx(1.0)
    assert np.all(eigenvector > 0)


def test_bootstrap_weight():
    row = run_experiment(ExperimentConfig(
        problem='jump', n=12, weight='bootstrap', bootstrap_r=2,
        sweeps=2))
    assert row.weight == 'bootstrap'
    assert 0.0 < row.conv_factor < 1.0


def test_run_table_keeps_going(batch_file):
    rows = run_table(batch_file)
    assert [row.name for row in rows] == ['exact_n12_l1', 'suitor_n12_l2',
                                          'too_big']
    assert not rows[0].error and not rows[1].error
    assert rows[2].error.startswith('[matching]')
    assert rows[2].bound_label == ''
    assert rows[1].mu_inv > rows[0].mu_inv


def test_run_table_in_parallel_matches_serial(batch_file):
    serial = run_table(batch_file, threads=1)
    parallel = run_table(batch_file, threads=2)
    assert [row.to_dict(timing=False) for row in parallel] == \
        [row.to_dict(timing=False) for row in serial]


def sample_rows():
    return [
        ReportRow('a', 'constant', 12, 144, 'exact', 1, 'ones', 1.94, 2.0,
                  True, None, None, 0.5),
        ReportRow('b', 'constant', 12, 144, 'exact', 2, 'ones', 2.5, None,
                  False, 0.9, None, 0.7),
        ReportRow('c', 'constant', 24, 576, 'suitor', 1, 'ones', 1.97, 2.0,
                  True, None, None, 0.1),
        ReportRow('d', 'constant', 24, 576, 'preis', 1, 'ones',
                  error='[matching] broken'),
    ]


def test_write_rows_json_is_deterministic(tmp_path):
    first, second = str(tmp_path / 'a.json'), str(tmp_path / 'b.json')
    write_rows(sample_rows(), first, 'json', timing=False)
    write_rows(sample_rows(), second, 'json', timing=False)
    with open(first, 'rb') as a, open(second, 'rb') as b:
        text = a.read()
        assert text == b.read()
    data = json.loads(text.decode('utf-8'))
    assert 'seconds' not in data[0]
    assert data[1]['bound'] == '†'
    assert data[0]['bound'] == 2.0


def test_write_rows_csv(tmp_path):
    path = str(tmp_path / 'out' / 'rows.csv')
    write_rows(sample_rows(), path)
    header, lines = read_csv(path)
    assert header == list(experiment.REPORT_COLUMNS)
    assert lines[0][:8] == ['a', 'constant', '12', '144', 'exact', '1',
                            'ones', '1.940000']
    assert lines[1][8] == '†'
    assert lines[3][-1] == '[matching] broken'

    write_rows(sample_rows(), path, timing=False)
    header, _ = read_csv(path)
    assert 'seconds' not in header
    with pytest.raises(ConfigError, match='format'):
        write_rows(sample_rows(), path, 'xml')


def test_empty_batch_writes_a_header(tmp_path):
    batch = tmp_path / 'empty.cfg'
    batch.write_text('[defaults]\nproblem = constant\n')
    rows = run_table(str(batch))
    assert rows == []
    path = str(tmp_path / 'empty.csv')
    write_rows(rows, path)
    header, lines = read_csv(path)
    assert header == list(experiment.REPORT_COLUMNS)
    assert lines == []


def test_table_layout():
    header, lines = table_layout(sample_rows())
    assert header == ['problem', 'matcher', 'n', 'bound_l1', 'mu_inv_l1',
                      'bound_l2', 'mu_inv_l2']
    assert lines == [
        ['constant', 'exact', 12, '2.000', '1.940', '†', '2.500'],
        ['constant', 'suitor', 24, '2.000', '1.970', '', ''],
    ]


def test_refinement_study(tmp_path):
    path = str(tmp_path / 'curve.csv')
    curve = experiment.refinement_study(
        ExperimentConfig(n=8, weight='random', matcher='suitor', seed=7),
        steps=3, path=path)
    assert [step for step, _ in curve] == [0, 1, 2, 3]
    assert all(mu > 0 for _, mu in curve)
    header, lines = read_csv(path)
    assert header == ['step', 'mu_inv']
    assert len(lines) == 4


def test_random_coefficient_study(tmp_path):
    path = str(tmp_path / 'samples.csv')
    summary = experiment.random_coefficient_study(
        ExperimentConfig(n=8, matcher='suitor'), [1, 2, 3], path)
    assert len(summary['values']) == 3
    assert summary['min'] <= summary['q1'] <= summary['median'] <= \
        summary['q3'] <= summary['max']
    header, lines = read_csv(path)
    assert [line[0] for line in lines] == ['1', '2', '3']
