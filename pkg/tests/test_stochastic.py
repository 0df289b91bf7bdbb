import numpy as np
import pytest

from config import set_thread_limit, thread_limit
from errors import DomainError, ReplicateCountWarning
from fraccalc import c_alpha
from paths import FbmSpec, sample_fbm
from stochastic import (
    McConfig,
    l2_bound,
    mc_l2,
    mc_pathwise_norms,
    mc_truncation_error,
    phi_gamma,
    probabilistic_remainder,
    tail_comparison,
)
from taylor import BoundParams, PathNorms, path_norms


def test_l2_bound_values():
    assert l2_bound(1, 1.0, 0.75) == pytest.approx(16.0 / 3.0, rel=1e-12)
    assert l2_bound(2, 0.5, 0.75) == pytest.approx((16.0 / 3.0) ** 2 / 2.0 * 0.5**3, rel=1e-12)
    with pytest.raises(DomainError):
        l2_bound(1, 1.0, 0.5)
    with pytest.raises(DomainError):
        l2_bound(0, 1.0, 0.75)


def test_phi_gamma_values():
    assert phi_gamma(0.0, 0.0) == 1.0
    assert phi_gamma(1.0, 0.0) == pytest.approx(3.4696, abs=1e-4)
    assert phi_gamma(2.0, 0.0) > phi_gamma(1.0, 0.0)
    assert phi_gamma(1.0, 0.3) > phi_gamma(1.0, 0.0)
    with pytest.raises(DomainError):
        phi_gamma(1.0, 0.5)
    with pytest.raises(DomainError):
        phi_gamma(-1.0, 0.0)


def test_probabilistic_remainder():
    assert probabilistic_remainder(3, 0.5, 0.7, 0.0, 0.0, 1).value == 0.0
    values = [probabilistic_remainder(N, 0.5, 0.7, 1.0, 0.1, 2).value for N in range(0, 10)]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    for N in (1, 4, 8):
        bound = probabilistic_remainder(N, 0.5, 0.7, 1.0, 0.1, 2)
        assert bound.value <= bound.displayed * (1 + 1e-12)
    short = probabilistic_remainder(2, 0.5, 0.7, 1.0, 0.0, 1, time_exponent="l2")
    long = probabilistic_remainder(2, 0.5, 0.7, 1.0, 0.0, 1)
    # t < 1, so t^H > t^{2H}
    assert short.value > long.value
    with pytest.raises(DomainError):
        probabilistic_remainder(2, 0.5, 0.7, 1.0, 0.0, 1, time_exponent="sqrt")


def test_probabilistic_tail_is_much_smaller_than_pathwise_tail():
    path = sample_fbm(FbmSpec(hurst=0.6, dimension=1, horizon=0.1, grid_size=129, seed=8, beta_hint=0.58))
    norms = path_norms(path, 0.45, 0.1)
    M = 0.25 / (norms.lambda_alpha * norms.c_alpha)
    params = BoundParams(alpha=0.45, gamma=0.0, M=M, d=1)
    rows = tail_comparison(params, norms, hurst=0.6, t=0.1, orders=range(2, 9))
    ratios = [row[3] for row in rows]
    assert ratios[0] < 0.01
    assert all(later < earlier for earlier, later in zip(ratios, ratios[1:]))
    assert all(row[1] > 0 and 0 < row[2] < np.inf for row in rows)


def test_tail_comparison_reports_divergent_pathwise_tail():
    # huge Lambda C: the pathwise series does not decay within the term budget
    norms = PathNorms(lambda_alpha=1e3, c_alpha=1e3, sup_norm=1.0)
    rows = tail_comparison(BoundParams(alpha=0.45, gamma=0.0, M=1.0, d=1), norms, hurst=0.6, t=0.1, orders=[2])
    N, prob, det, ratio = rows[0]
    assert N == 2 and prob > 0
    assert det == np.inf
    assert ratio == 0.0


def test_mc_config_validation():
    spec = FbmSpec(hurst=0.75, dimension=2, horizon=1.0, grid_size=33)
    with pytest.raises(DomainError):
        McConfig(spec, [[0, 1]])
    with pytest.raises(DomainError):
        McConfig(spec, [[3]])
    with pytest.raises(DomainError):
        McConfig(spec, [[1]], confidence=1.0)
    config = McConfig(spec.with_seed(7), [[1, 2]], replicates=5, t=0.5)
    assert config.words == [(1, 2)]
    assert config.time == 0.5
    assert list(config.seeds) == [7, 8, 9, 10, 11]


def test_mc_l2_small_run_warns():
    spec = FbmSpec(hurst=0.75, dimension=2, horizon=1.0, grid_size=33, seed=0)
    with pytest.warns(ReplicateCountWarning):
        report = mc_l2(McConfig(spec, [[1], [1, 2]], replicates=20))
    assert [row.m for row in report.rows] == [1, 2]
    assert report.seeds == list(range(20))
    assert report.rows[0].bound == pytest.approx(16.0 / 3.0)
    assert report.rows[0].csv_row()[0] == "1"
    assert all(row.empirical > 0 for row in report.rows)


def test_mc_l2_does_not_depend_on_thread_count():
    spec = FbmSpec(hurst=0.7, dimension=2, horizon=1.0, grid_size=17, seed=3)
    config = McConfig(spec, [[1], [2, 1]], replicates=600)
    previous = thread_limit()
    try:
        set_thread_limit(1)
        serial = mc_l2(config)
        set_thread_limit(4)
        threaded = mc_l2(config)
    finally:
        set_thread_limit(previous)
    assert [r.empirical for r in serial.rows] == [r.empirical for r in threaded.rows]
    assert [r.ci_halfwidth for r in serial.rows] == [r.ci_halfwidth for r in threaded.rows]


@pytest.mark.slow
def test_mc_l2_full_run_passes():
    spec = FbmSpec(hurst=0.75, dimension=2, horizon=1.0, grid_size=65, seed=0)
    report = mc_l2(McConfig(spec, [[1], [1, 1], [1, 2], [1, 2, 1]], replicates=10_000))
    assert report.all_passed
    first = report.rows[0]
    # E|B_1|^2 = 1
    assert abs(first.empirical - 1.0) < 5 * first.standard_error


def test_pathwise_norms_respect_chain_estimate():
    spec = FbmSpec(hurst=0.75, dimension=1, horizon=1.0, grid_size=129, seed=2, beta_hint=0.72)
    stats = mc_pathwise_norms(spec, 20, alpha=0.3)
    assert stats.sup_norm.shape == (20,)
    assert np.all(stats.lambda_alpha <= stats.chain_bound * (1 + 1e-12))
    summary = stats.summary()
    assert summary["chain_violations"] == 0
    assert summary["c_alpha"] == pytest.approx(c_alpha(1.0, 0.3))


def test_truncation_error_below_probabilistic_remainder(scalar_linear_system):
    spec = FbmSpec(hurst=0.75, dimension=1, horizon=0.5, grid_size=257, seed=20)
    rows = mc_truncation_error(scalar_linear_system, spec, 100, t=0.5, orders=[1, 2, 4], M=1.0)
    assert [row.N for row in rows] == [1, 2, 4]
    assert all(row.passed for row in rows)
    rms = [row.rms for row in rows]
    assert rms[0] > rms[1] > rms[2]


def test_truncation_error_needs_driftless_system(polynomial_system):
    spec = FbmSpec(hurst=0.75, dimension=2, horizon=0.5, grid_size=33)
    with pytest.raises(DomainError):
        mc_truncation_error(polynomial_system, spec, 10, t=0.5, orders=[1], M=1.0)
