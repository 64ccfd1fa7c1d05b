import json

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest
import scipy.linalg
import scipy.sparse

from amgmatch import quality
from amgmatch.coarsening import (
    AggregateSet, build_aggregates, build_prolongator, coarsen_sweeps,
    read_aggregate_csv)
from amgmatch.matching import compute_edge_weights, get_matcher
from amgmatch.quality import (
    QualityError, QualityReport, SymmetrizedSmoother, aggregate_spectrum,
    cr_ratio, epsilon_smoothness, local_bound, mu_global,
    smallest_eigvec_Tbar)
from linalg_util.matrix_market_util import read_matrix_market
from linalg_util.sparse_util import l1_jacobi_diagonal
from tests.util import dense_mu_inv, random_spd_graph


@pytest.fixture(scope='module')
def exact_pairs_12(laplacian_12):
    return coarsen_sweeps(laplacian_12, np.ones(144), 'exact')


def test_identity_coarsening_has_mu_zero(tridiagonal):
    A = tridiagonal(8)
    mu_inv, _ = mu_global(A, None, scipy.sparse.identity(8, format='csr'))
    assert mu_inv == pytest.approx(0.0, abs=1e-12)


def test_constant_laplacian_pairs(laplacian_12, exact_pairs_12):
    level = exact_pairs_12.levels[0]
    mu_inv, worst = mu_global(laplacian_12, None, level.P)
    assert mu_inv == pytest.approx(1.940, abs=0.02)
    assert worst.shape == (144,)

    local = local_bound(laplacian_12, level.aggregates)
    assert local.available
    assert local.splitting_verified
    assert local.bound == pytest.approx(2.0)
    assert local.delta_factor == 1.0
    assert local.bound >= mu_inv - 1e-8
    assert len(local.per_aggregate) == level.aggregates.n_aggregates


def test_mu_global_matches_dense_oracle(rng):
    for _ in range(5):
        A = random_spd_graph(40, 0.15, rng)
        w = rng.uniform(0.2, 1.0, 40) * rng.choice([-1.0, 1.0], 40)
        hierarchy = coarsen_sweeps(A, w, 'suitor', sweeps=2)
        P = hierarchy.composite_prolongator()
        mu_inv, _ = mu_global(A, None, P)
        assert_allclose(mu_inv, dense_mu_inv(A, P), rtol=1e-6)


def test_sparse_path_matches_dense(laplacian_12, exact_pairs_12):
    P = exact_pairs_12.levels[0].P
    dense, _ = mu_global(laplacian_12, None, P)
    sparse, x = mu_global(laplacian_12, None, P, tol=1e-12, dense_cap=0)
    assert_allclose(sparse, dense, rtol=1e-6)
    assert_allclose(x @ (laplacian_12 @ x), 1.0)


def test_mu_is_invariant_under_permutation(rng):
    A = random_spd_graph(30, 0.2, rng)
    w = rng.uniform(0.5, 1.0, 30)
    agg = coarsen_sweeps(A, w, 'exact').levels[0].aggregates
    P = build_prolongator(agg, w, A.diagonal())[0].P
    perm = rng.permutation(30)
    mu_inv, _ = mu_global(A, None, P)
    permuted, _ = mu_global(A[perm][:, perm], None, P[perm])
    assert abs(mu_inv - permuted) <= 1e-9


def test_mu_global_errors(tridiagonal):
    A = tridiagonal(4)
    with pytest.raises(quality.DimensionMismatchError):
        mu_global(A, None, scipy.sparse.identity(3, format='csr'))
    empty_column = scipy.sparse.csr_matrix(np.array([[1.0, 0.0]] * 4))
    with pytest.raises(QualityError, match='zero column'):
        mu_global(A, None, empty_column)


def test_projector_by_hand():
    P = scipy.sparse.csr_matrix(np.full((2, 1), 1 / np.sqrt(2)))
    Q = quality.projector_matrix(P, np.array([4.0, 4.0]))
    assert_allclose(Q.toarray(), [[0.5, 0.5], [0.5, 0.5]])


def test_projector_identities(laplacian_12, exact_pairs_12):
    diagnostics = quality.q_projector_check(
        exact_pairs_12.levels[0].P, laplacian_12.diagonal())
    assert diagnostics.idempotency <= 1e-12
    assert diagnostics.self_adjointness <= 1e-12
    assert diagnostics.range_error <= 1e-13
    assert diagnostics.worst <= 1e-12


def test_aggregate_spectrum_by_hand():
    shifted = np.array([[3.0, -1.0], [-1.0, 3.0]])
    spectrum = aggregate_spectrum(shifted, [4.0, 4.0])
    assert_allclose([spectrum.lambda_1, spectrum.lambda_2], [0.5, 1.0])
    assert spectrum.bound == pytest.approx(2.0)
    assert not spectrum.eigen_couple

    # the weight is the eigenvector of lambda_1
    coupled = aggregate_spectrum(shifted, [4.0, 4.0], w=[1.0, 1.0])
    assert coupled.eigen_couple
    assert coupled.bound == pytest.approx(1.0)


def test_singleton_and_singular_spectra():
    single = aggregate_spectrum([[4.0]], [4.0])
    assert single.bound == 1.0
    assert single.lambda_2 is None
    singular = aggregate_spectrum([[1.0, -1.0], [-1.0, 1.0]], [1.0, 1.0],
                                  w=[1.0, 2.0])
    assert singular.bound == np.inf
    assert singular.to_dict()['bound'] is None


def test_split_failure_fixture(fixture_path):
    A = read_matrix_market(fixture_path('split_failure.mtx'))
    agg = read_aggregate_csv(fixture_path('split_failure_aggregates.csv'))
    local = local_bound(A, agg)
    assert not local.available
    assert not local.splitting_verified
    assert local.bound is None
    assert quality.format_bound(local.bound) == quality.DAGGER


def test_split_failure_from_matchings(fixture_path):
    A = read_matrix_market(fixture_path('split_failure.mtx'))
    edges = compute_edge_weights(A, np.ones(4))
    exact = build_aggregates(get_matcher('exact')(edges))
    shipped = read_aggregate_csv(fixture_path('split_failure_aggregates.csv'))
    assert_array_equal(exact.agg_of, shipped.agg_of)
    assert not local_bound(A, exact).available

    # the locally dominant matching takes the middle edge and splits with
    # the full row sum
    suitor = build_aggregates(get_matcher('suitor')(edges))
    assert sorted(a.tolist() for a in suitor.aggregates) == [[0], [1, 2], [3]]
    local = local_bound(A, suitor)
    assert local.available
    assert local.delta_factor == 1.0


def test_local_bound_size_cap(tridiagonal):
    agg = AggregateSet([0, 0, 0, 1])
    with pytest.raises(QualityError, match='exceeds the cap'):
        local_bound(tridiagonal(4), agg, size_cap=2)
    with pytest.raises(quality.DimensionMismatchError):
        local_bound(tridiagonal(5), agg)


def test_verified_bound_dominates_mu(rng):
    checked = 0
    for _ in range(20):
        # the shift leaves room for delta on every aggregate
        A = (random_spd_graph(24, 0.15, rng) +
             12.0 * scipy.sparse.identity(24)).tocsr()
        w = rng.uniform(0.2, 1.0, 24)
        hierarchy = coarsen_sweeps(A, w, 'exact', sweeps=2)
        P = hierarchy.composite_prolongator()
        local = local_bound(A, hierarchy.composite_aggregates(), w=w)
        if local.splitting_verified:
            checked += 1
            assert local.bound >= mu_global(A, None, P)[0] - 1e-8
    assert checked > 0


def test_cr_ratio_matches_dense_oracle(rng):
    A = random_spd_graph(20, 0.25, rng)
    w = rng.uniform(0.5, 1.0, 20)
    agg = coarsen_sweeps(A, w, 'suitor').levels[0].aggregates
    _, complement = build_prolongator(agg, w, A.diagonal())
    M = l1_jacobi_diagonal(A)
    P_f = complement.P_f.toarray()
    A_ff = P_f.T @ A.toarray() @ P_f
    M_ff = P_f.T @ np.diag(M) @ P_f
    expected = np.max(np.abs(np.linalg.eigvals(
        np.eye(P_f.shape[1]) - np.linalg.solve(M_ff, A_ff))))
    assert_allclose(cr_ratio(A, complement, M), expected, rtol=1e-8)
    # a bare matrix works as well
    assert_allclose(cr_ratio(A, complement.P_f, M), expected, rtol=1e-8)


def test_cr_ratio_below_one(laplacian_12, anisotropic_12):
    for A in (laplacian_12, anisotropic_12):
        agg = coarsen_sweeps(A, np.ones(144), 'suitor').levels[0].aggregates
        _, complement = build_prolongator(agg, np.ones(144), A.diagonal())
        rho = cr_ratio(A, complement, l1_jacobi_diagonal(A))
        assert 0.0 <= rho < 1.0


def test_cr_ratio_of_exact_pairs(laplacian_12, anisotropic_12):
    # a pair joined by a coupling c keeps 2c of its l1-Jacobi diagonal in
    # every complement vector, and one interior pair gives the other side
    for A, lower, upper in ((laplacian_12, 0.375, 0.75),
                            (anisotropic_12, 0.4399, 204.0 / 404.0)):
        agg = coarsen_sweeps(A, np.ones(144), 'exact').levels[0].aggregates
        assert agg.n_singletons == 0
        _, complement = build_prolongator(agg, np.ones(144), A.diagonal())
        rho = cr_ratio(A, complement, l1_jacobi_diagonal(A))
        assert lower <= rho <= upper + 1e-6


def test_cr_ratio_without_pairs(tridiagonal):
    with pytest.warns(UserWarning, match='no pairs'):
        rho = cr_ratio(tridiagonal(3), scipy.sparse.csr_matrix((3, 0)),
                       np.full(3, 4.0))
    assert rho == 0.0


def test_smoother_must_converge(tridiagonal):
    A = tridiagonal(10)
    SymmetrizedSmoother(A).check_spd()
    too_small = SymmetrizedSmoother(A, M=np.ones(10))
    with pytest.raises(QualityError, match='does not converge'):
        too_small.check_spd()
    with pytest.raises(QualityError, match='does not converge'):
        epsilon_smoothness(np.ones(10), A, too_small)
    with pytest.raises(QualityError, match='positive'):
        SymmetrizedSmoother(A, M=np.zeros(10))


def test_smoothness_of_eigenvectors(tridiagonal):
    A = tridiagonal(30)
    M = l1_jacobi_diagonal(A)
    h, X = scipy.linalg.eigh(A.toarray(), np.diag(M))
    for k in (0, 7, 29):
        assert_allclose(epsilon_smoothness(X[:, k], A), h[k] * (2 - h[k]),
                        rtol=1e-8)


def test_smoothness_is_between_zero_and_one(laplacian_12, rng):
    for _ in range(10):
        ratio = epsilon_smoothness(rng.standard_normal(144), laplacian_12)
        assert 0.0 < ratio <= 1.0
    with pytest.raises(QualityError, match='zero vector'):
        epsilon_smoothness(np.zeros(144), laplacian_12)


def test_smoothest_vector_of_a_diagonal_matrix():
    A = scipy.sparse.diags([3.0, 1.0, 2.0]).tocsr()
    smoother = SymmetrizedSmoother(A, M=np.full(3, 10.0))
    t, x = smallest_eigvec_Tbar(A, smoother)
    assert_allclose(x, [0.0, 1.0, 0.0], atol=1e-12)
    assert t == pytest.approx(0.1 * 1.9)


def test_smoothest_vector_of_the_laplacian(laplacian_12):
    A = laplacian_12
    t, x = smallest_eigvec_Tbar(A)
    smoother = SymmetrizedSmoother(A)
    assert_allclose(np.linalg.norm(x), 1.0)
    Tx = smoother.apply(A @ x)
    assert np.linalg.norm(Tx - t * x) <= 1e-8
    assert epsilon_smoothness(x, A) == pytest.approx(t, rel=1e-6)
    # smooth means all of one sign for the Laplacian
    assert np.all(x > 0)


def test_quality_report_json(tmp_path):
    report = QualityReport(
        1.94, 2.0, True, 0.81,
        [quality.AggregateSpectrum(0.0, 0.5, 2.0, True)],
        {'problem': 'constant', 'sweeps': 1})
    path = str(tmp_path / 'report.json')
    text = report.to_json(path)
    with open(path) as infile:
        assert infile.read() == text
    data = json.loads(text)
    assert sorted(data) == ['bound', 'metadata', 'mu_inv', 'per_aggregate',
                            'rho_f', 'splitting_verified']
    again = QualityReport.from_json(text)
    assert again.mu_inv == 1.94
    assert again.bound_label == '2.000'
    assert again.per_aggregate[0]['eigen_couple'] is True


def test_quality_report_checks():
    assert QualityReport(1.0, None, False).bound_label == quality.DAGGER
    with pytest.raises(QualityError):
        QualityReport(-1.0, 2.0, True)
    with pytest.raises(QualityError):
        QualityReport(1.0, None, True)


def test_evaluate(laplacian_12, exact_pairs_12):
    level = exact_pairs_12.levels[0]
    _, complement = build_prolongator(level.aggregates, np.ones(144),
                                      laplacian_12.diagonal())
    report = quality.evaluate(laplacian_12, level.P, level.aggregates,
                              complement, w=np.ones(144),
                              metadata={'matcher': 'exact'})
    assert report.mu_inv == pytest.approx(1.940, abs=0.02)
    assert report.bound == pytest.approx(2.0)
    assert 0.0 < report.rho_f < 1.0
    assert report.metadata == {'matcher': 'exact'}
