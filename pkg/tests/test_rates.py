import itertools

import numpy as np
import pytest

from beamsched import (
    NoiseModel,
    evaluate_slot,
    mmse_sic_sinr,
    optimal_ordering,
    per_user_rates,
    sum_rate,
)
from beamsched.rates import batch_evaluate_slots, per_user_bound

from conftest import random_complex_matrix
from exact_oracle import ExactSicOracle


def test_single_user_sinr_is_snr():
    s = 10.0 ** 1.5
    h = np.array([[np.sqrt(s)]], dtype=complex)
    assert mmse_sic_sinr(h, (0,), 0) == pytest.approx(s, rel=1e-12)


def test_last_decoded_user_sees_no_interference():
    rng = np.random.default_rng(3)
    h = random_complex_matrix(rng, 4, scale=2.0)
    order = (2, 1, 3, 0)
    sinr = mmse_sic_sinr(h, order, 0)  # user 0 decoded last
    assert sinr == pytest.approx(np.linalg.norm(h[:, 0]) ** 2, rel=1e-12)


def test_sinr_matches_direct_mmse_filter_construction():
    # independent oracle: build the MMSE filter explicitly and evaluate its
    # output SINR from first principles
    rng = np.random.default_rng(7)
    for _ in range(25):
        h = random_complex_matrix(rng, 3, scale=3.0)
        order = tuple(rng.permutation(3))
        for pos, j in enumerate(order):
            later = order[pos + 1 :]
            cov = np.eye(3, dtype=complex)
            for i in later:
                cov += np.outer(h[:, i], h[:, i].conj())
            w = np.linalg.solve(cov, h[:, j])
            signal = np.abs(w.conj() @ h[:, j]) ** 2
            noise_power = np.real(w.conj() @ w)
            interference = sum(np.abs(w.conj() @ h[:, i]) ** 2 for i in later)
            direct = signal / (noise_power + interference)
            assert mmse_sic_sinr(h, order, j) == pytest.approx(direct, rel=1e-10)


def test_rate_one_at_unit_sinr():
    h = np.array([[1.0]], dtype=complex)
    rates = per_user_rates(h, (0,))
    assert rates.rates[0] == pytest.approx(1.0, rel=1e-12)


def test_single_user_rate_at_15db():
    h = np.array([[np.sqrt(10.0 ** 1.5)]], dtype=complex)
    assert per_user_rates(h, (0,)).rates[0] == pytest.approx(
        np.log2(1 + 10.0 ** 1.5), rel=1e-12
    )
    assert sum_rate(h) == pytest.approx(np.log2(1 + 10.0 ** 1.5), rel=1e-12)


def test_per_user_rates_match_scalar_sinr_calls():
    rng = np.random.default_rng(11)
    h = random_complex_matrix(rng, 4, scale=2.0)
    order = (3, 0, 2, 1)
    rates = per_user_rates(h, order)
    for j in range(4):
        expected = np.log2(1.0 + mmse_sic_sinr(h, order, j))
        assert rates.rates[j] == pytest.approx(expected, rel=1e-12)


def test_sum_capacity_conservation_any_order():
    rng = np.random.default_rng(13)
    for _ in range(40):
        b = int(rng.integers(2, 6))
        h = random_complex_matrix(rng, b, scale=10 ** rng.uniform(-0.5, 1.0))
        capacity = sum_rate(h)
        for _ in range(3):
            order = tuple(rng.permutation(b))
            total = per_user_rates(h, order).rates.sum()
            assert total == pytest.approx(capacity, rel=1e-9)


def test_sum_rate_of_zero_matrix():
    assert sum_rate(np.zeros((3, 3), dtype=complex)) == 0.0


def test_sum_rate_column_permutation_invariant():
    rng = np.random.default_rng(17)
    h = random_complex_matrix(rng, 5, scale=3.0)
    base = sum_rate(h)
    for _ in range(5):
        perm = rng.permutation(5)
        assert sum_rate(h[:, perm]) == pytest.approx(base, rel=1e-12)


def test_per_user_bound_is_sum_rate_over_users():
    rng = np.random.default_rng(19)
    h = random_complex_matrix(rng, 5, scale=2.0)
    assert per_user_bound(h) == pytest.approx(sum_rate(h) / 5, rel=1e-12)


def test_ordering_identity_for_single_user():
    h = np.array([[2.0 + 1.0j]])
    assert optimal_ordering(h) == (0,)


def test_ordering_tie_break_on_diagonal_matrix():
    # equal-gain interference-free users: all orders tie, lowest index first
    h = 3.0 * np.eye(4, dtype=complex)
    assert optimal_ordering(h) == (0, 1, 2, 3)
    rates = per_user_rates(h, (0, 1, 2, 3))
    assert np.allclose(rates.rates, rates.rates[0])


def test_greedy_ordering_matches_exact_brute_force():
    # exact-rational oracle: matrix determinant lemma over dyadic entries
    rng = np.random.default_rng(23)
    for _ in range(30):
        b = int(rng.integers(2, 5))
        h = random_complex_matrix(rng, b, scale=10 ** rng.uniform(0, 1))
        oracle = ExactSicOracle(h)
        greedy = optimal_ordering(h)
        assert oracle.min_sinr(greedy) == oracle.brute_force_max_min()


def test_greedy_ordering_matches_float_brute_force():
    # same check in float arithmetic: ties across orders may round apart,
    # so the greedy value must sit within float jitter of the maximum
    rng = np.random.default_rng(29)
    for _ in range(60):
        b = int(rng.integers(2, 5))
        h = random_complex_matrix(rng, b, scale=10 ** rng.uniform(0, 1.5))
        greedy_min = per_user_rates(h, optimal_ordering(h)).min_rate
        best = max(
            per_user_rates(h, perm).min_rate
            for perm in itertools.permutations(range(b))
        )
        assert greedy_min == pytest.approx(best, rel=1e-12)


def test_interference_removal_never_hurts():
    rng = np.random.default_rng(31)
    for _ in range(20):
        h = random_complex_matrix(rng, 4, scale=2.0)
        order = tuple(rng.permutation(4))
        j = order[0]  # first decoded: all others interfere
        base = mmse_sic_sinr(h, order, j)
        for removed in range(4):
            if removed == j:
                continue
            h2 = h.copy()
            h2[:, removed] = 0.0
            assert mmse_sic_sinr(h2, order, j) >= base - 1e-12


def test_batch_matches_single_slot_evaluation():
    rng = np.random.default_rng(37)
    hs = np.stack([random_complex_matrix(rng, 5, scale=2.0) for _ in range(8)])
    orders, rates = batch_evaluate_slots(hs)
    for k in range(8):
        single = evaluate_slot(hs[k])
        assert tuple(orders[k]) == single.order
        assert np.array_equal(rates[k], single.rates)


def test_rates_positive_and_finite():
    rng = np.random.default_rng(41)
    h = random_complex_matrix(rng, 6, scale=5.0)
    slot = evaluate_slot(h)
    assert np.all(np.isfinite(slot.rates))
    assert np.all(slot.rates > 0)
    assert slot.min_rate == slot.rates.min()


def test_zero_column_gets_zero_rate():
    rng = np.random.default_rng(43)
    h = random_complex_matrix(rng, 3, scale=2.0)
    h[:, 1] = 0.0
    slot = evaluate_slot(h)
    assert slot.rates[1] == 0.0


def test_invalid_order_rejected():
    h = np.eye(3, dtype=complex)
    with pytest.raises(ValueError):
        mmse_sic_sinr(h, (0, 0, 1), 0)


def test_noise_scaling():
    h = np.array([[2.0]], dtype=complex)
    quiet = mmse_sic_sinr(h, (0,), 0, NoiseModel(1.0))
    loud = mmse_sic_sinr(h, (0,), 0, NoiseModel(4.0))
    assert quiet == pytest.approx(4.0 * loud, rel=1e-12)
