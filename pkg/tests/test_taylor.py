import itertools
import math

import numpy as np
import pytest

from errors import DivergentTailError, DomainError
from jets import build_table
from paths import PathGrid, smooth_path
from taylor import (
    BoundParams,
    PathNorms,
    bound_trace,
    detect_tc,
    domination_bound,
    expansion_levels,
    inductive_levels,
    iterated_integral,
    iterated_integrals,
    log_tail_sum,
    path_norm_profile,
    path_norms,
    remainder_bound,
    truncated_solution,
)
from young import picard_solve


def test_single_letter_words_give_powers(linear_path):
    t = linear_path.times
    for k in range(1, 5):
        integral = iterated_integral(linear_path, [1] * k)
        assert np.allclose(integral, t**k / math.factorial(k), atol=1e-5)
    assert np.allclose(iterated_integral(linear_path, [0]), t)


def test_second_order_word_is_exact_for_repeated_letter(fbm_path):
    y = fbm_path.values[:, 1]
    assert np.allclose(iterated_integral(fbm_path, [1, 1]), 0.5 * y**2, atol=1e-12)


def test_first_letter_is_integrated_first():
    times = np.linspace(0.0, 1.0, 1025)
    path = PathGrid.from_drive(times, np.column_stack([times, times**2]))
    # int_0^1 u d(u^2) and int_0^1 u^2 du
    assert iterated_integral(path, [1, 2])[-1] == pytest.approx(2.0 / 3.0, rel=1e-5)
    assert iterated_integral(path, [2, 1])[-1] == pytest.approx(1.0 / 3.0, rel=1e-5)
    with pytest.raises(DomainError):
        iterated_integral(path, [3])


def test_shuffle_relation(fbm_path_2d):
    a = iterated_integral(fbm_path_2d, [1])
    b = iterated_integral(fbm_path_2d, [2])
    both = iterated_integral(fbm_path_2d, [1, 2]) + iterated_integral(fbm_path_2d, [2, 1])
    assert np.allclose(a * b, both, atol=1e-12)


@pytest.mark.parametrize("split", [1, 300, 512, 1000])
def test_chen_relation(fbm_path_2d, split):
    last = fbm_path_2d.grid_size - 1
    tail_path = fbm_path_2d.window(split, last)

    def head(word):
        return 1.0 if not word else iterated_integral(fbm_path_2d, word)[split]

    def tail(word):
        return 1.0 if not word else iterated_integral(tail_path, word)[-1]

    for length in range(1, 4):
        for word in itertools.product(range(3), repeat=length):
            whole = iterated_integral(fbm_path_2d, word)[-1]
            joined = sum(head(word[:i]) * tail(word[i:]) for i in range(length + 1))
            assert whole == pytest.approx(joined, abs=1e-12)


def test_integral_table_matches_single_words(fbm_path_2d):
    table = iterated_integrals(fbm_path_2d, 3)
    assert len(table) == 3 + 9 + 27
    for word in [(0,), (1, 2), (2, 0, 1), (1, 1, 1)]:
        assert np.allclose(table[word], iterated_integral(fbm_path_2d, word), atol=1e-14)
    restricted = iterated_integrals(fbm_path_2d, 2, letters=[1, 2])
    assert set(restricted) == {(1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)}


def test_linear_system_levels(linear_path, scalar_linear_system):
    table = build_table(scalar_linear_system, 4)
    levels = expansion_levels(linear_path, table, 4)
    t = linear_path.times
    for level in levels:
        expected = t**level.order / math.factorial(level.order)
        assert np.allclose(level.values[:, 0], expected, atol=1e-5)
    rows = list(levels[1].rows())
    assert rows[-1][:3] == [2, 1.0, 1]


def test_expansion_levels_keep_words(fbm_path_2d, polynomial_system):
    table = build_table(polynomial_system, 2)
    levels = expansion_levels(fbm_path_2d, table, 2, keep_words=True)
    assert len(levels[1].per_word) == 9
    rebuilt = sum(levels[1].per_word[w][:, None] * table[w][None, :] for w in table.words(2))
    assert np.allclose(rebuilt, levels[1].values, atol=1e-13)
    with pytest.raises(DomainError):
        expansion_levels(fbm_path_2d, table, 3)


def test_inductive_levels_match_linear_expansion(fbm_path, scalar_linear_system):
    table = build_table(scalar_linear_system, 5)
    direct = expansion_levels(fbm_path, table, 5)
    inductive = inductive_levels(scalar_linear_system, fbm_path, 5)
    for a, b in zip(direct, inductive):
        assert a.order == b.order
        assert np.allclose(a.values, b.values, rtol=1e-10, atol=1e-14)


def test_inductive_levels_match_nonlinear_expansion(polynomial_system):
    path = smooth_path("sine", [1.0, 0.5], 1.0, 1025)
    table = build_table(polynomial_system, 4)
    direct = expansion_levels(path, table, 4)
    inductive = inductive_levels(polynomial_system, path, 4)
    for a, b in zip(direct, inductive):
        assert np.allclose(a.values, b.values, atol=1e-4)


def test_truncations_approach_the_solution(fbm_path, scalar_linear_system):
    table = build_table(scalar_linear_system, 10)
    levels = expansion_levels(fbm_path, table, 10)
    solution = picard_solve(scalar_linear_system, fbm_path).trajectory
    errors = [
        np.max(np.abs(truncated_solution(levels, [1.0], N) - solution))
        for N in range(1, 11)
    ]
    assert errors[-1] < 1e-4
    assert errors[-1] < errors[0]
    assert np.all(truncated_solution(levels, [1.0], 0) == 1.0)
    with pytest.raises(DomainError):
        truncated_solution(levels, [1.0], 11)


def test_bound_params_domain():
    with pytest.raises(DomainError):
        BoundParams(alpha=0.5, gamma=0.0, M=1.0, d=1)
    with pytest.raises(DomainError):
        BoundParams(alpha=0.25, gamma=0.5, M=1.0, d=1)
    with pytest.raises(DomainError):
        BoundParams(alpha=0.25, gamma=0.0, M=1.0, d=1, r=1.0)
    params = BoundParams(alpha=0.25, gamma=0.2, M=1.0, d=1)
    assert params.delta == pytest.approx(0.3)
    assert params.with_M(3.0).M == 3.0


def test_log_tail_sum_of_geometric_series():
    log_total, used = log_tail_sum(lambda k: k * math.log(0.5), 1)
    assert log_total == pytest.approx(0.0, abs=1e-12)
    assert used > 0
    with pytest.raises(DivergentTailError):
        log_tail_sum(lambda k: k * math.log(2.0), 1, max_terms=100)


def test_remainder_bound_properties():
    params = BoundParams(alpha=0.25, gamma=0.0, M=1.0, d=1)
    norms = PathNorms(lambda_alpha=0.5, c_alpha=1.0, sup_norm=1.0)
    bounds = [remainder_bound(params, norms, N) for N in range(1, 12)]
    values = [b.value for b in bounds]
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    assert all(b.value <= b.closed_form for b in bounds)
    assert bounds[0].log_value == pytest.approx(math.log(bounds[0].value))

    assert remainder_bound(params.with_M(0.0), norms, 3).value == 0.0
    assert remainder_bound(params, PathNorms(0.0, 1.0, 1.0), 3).value == 0.0
    with pytest.raises(DomainError):
        remainder_bound(params, norms, 0)
    with pytest.raises(DivergentTailError):
        remainder_bound(params, PathNorms(100.0, 1.0, 1.0), 2, max_terms=10)


def test_remainder_bound_scales_with_sup_norm():
    params = BoundParams(alpha=0.3, gamma=0.1, M=0.8, d=2)
    one = remainder_bound(params, PathNorms(0.4, 2.0, 1.0), 5)
    three = remainder_bound(params, PathNorms(0.4, 2.0, 3.0), 5)
    assert three.value == pytest.approx(3.0 * one.value, rel=1e-12)


def test_bound_trace_rows():
    params = BoundParams(alpha=0.25, gamma=0.0, M=1.0, d=1)
    rows = bound_trace(params, PathNorms(0.5, 1.0, 1.0), [2, 4, 6])
    assert [row[0] for row in rows] == [2, 4, 6]
    assert all(row[1] <= row[2] for row in rows)


def test_convergence_window_of_linear_equation(linear_path, scalar_linear_system):
    # sum_k 2^k t^k / k! = e^{2t} - 1 reaches 1 at t = ln(2)/2
    levels = expansion_levels(linear_path, build_table(scalar_linear_system, 10), 10)
    params = BoundParams(alpha=0.25, gamma=0.0, M=1.0, d=1, r=2.0, C=1.0)
    window = detect_tc(levels, params)
    assert window.crossed
    assert window.time >= math.log(2.0) / 2.0
    assert window.time - math.log(2.0) / 2.0 <= linear_path.mesh

    never = detect_tc(levels, BoundParams(alpha=0.25, gamma=0.0, M=1.0, d=1))
    assert not never.crossed
    assert never.time == 1.0


def test_convergence_window_with_tail_closes_earlier(linear_path, scalar_linear_system):
    levels = expansion_levels(linear_path, build_table(scalar_linear_system, 3), 3)
    params = BoundParams(alpha=0.25, gamma=0.0, M=1.0, d=1, r=2.0, C=1.0)
    profile = path_norm_profile(linear_path, 0.25)
    assert detect_tc(levels, params, profile).index <= detect_tc(levels, params).index


@pytest.mark.parametrize("alpha", [0.2, 0.3])
def test_iterated_integrals_below_domination_bound(alpha):
    path = smooth_path("sine", [1.0, 0.5], 1.0, 257)
    norms = path_norms(path, alpha, 1.0)
    for length in (1, 2, 3):
        bound = domination_bound(length, alpha, norms)
        for word in itertools.product(range(3), repeat=length):
            assert abs(iterated_integral(path, word)[-1]) <= bound * (1 + 1e-12)


def test_fbm_integrals_below_domination_bound(fbm_path_2d):
    alpha = 0.4
    norms = path_norms(fbm_path_2d, alpha, 0.5)
    for length in (1, 2, 3):
        bound = domination_bound(length, alpha, norms)
        for word in itertools.product(range(1, 3), repeat=length):
            assert abs(iterated_integral(fbm_path_2d, word)[-1]) <= bound * (1 + 1e-12)
