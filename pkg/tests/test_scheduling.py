import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamsched import (
    EnumerationCapError,
    GroupingError,
    NoiseModel,
    OracleCapError,
    SchedulingError,
    color_grouping,
    counting,
    enumerate_paths,
    exhaustive_search,
    min_deletion_schedule,
    schedule_generations,
    synthesize_generations,
    write_allocation_csv,
)
from beamsched.scheduling import PathCombination, evaluate_assignments
from beamsched import build_hex_layout


def brute_force_systems(keys, m):
    """All sets of m pairwise-disjoint keys covering every node exactly once."""
    n_pos = len(keys[0])
    systems = []

    def rec(chosen, used, start):
        if len(chosen) == m:
            systems.append(tuple(chosen))
            return
        for i in range(start, len(keys)):
            k = keys[i]
            if all(k[p] not in used[p] for p in range(n_pos)):
                for p in range(n_pos):
                    used[p].add(k[p])
                rec(chosen + [i], used, i + 1)
                for p in range(n_pos):
                    used[p].remove(k[p])

    rec([], [set() for _ in range(n_pos)], 0)
    return systems


# ------------------------------------------------------------- counting --


def test_counting_spot_values():
    c = counting(3, 3)
    assert c["n_alloc"] == 36
    assert c["n_paths"] == 27
    assert c["n_eval_es"] == 108
    assert c["n_eval_bg"] == 27
    assert c["n_users_sched"] == 9
    assert counting(2, 2)["n_alloc_fsa"] == 4
    assert counting(1, 5)["n_alloc"] == 1
    assert counting(1, 5)["n_paths"] == 1


@given(st.integers(1, 8), st.integers(1, 8))
@settings(deadline=None, max_examples=64)
def test_counting_formulas(m, b):
    c = counting(m, b)
    f = math.factorial(m)
    assert c["n_alloc"] == f ** (b - 1)
    assert c["n_paths"] == m**b == c["n_eval_bg"]
    assert c["n_eval_es"] == m * c["n_alloc"]
    assert c["n_alloc_fsa"] == math.factorial(m + 1) ** (b - 1) - f ** (b - 1)
    assert c["n_users_sched"] == m * b


def test_counting_arbitrary_precision():
    c = counting(10, 7)
    assert c["n_alloc"] == math.factorial(10) ** 6  # far beyond 64-bit range
    assert c["n_alloc"] > 2**63


def test_allocation_count_matches_enumeration():
    # independent check of (M!)^(B-1): enumerate disjoint systems directly
    for m, b in [(1, 1), (2, 2), (2, 3), (3, 2), (3, 3)]:
        keys = list(itertools.product(range(m), repeat=b))
        systems = brute_force_systems(keys, m)
        assert len(systems) == counting(m, b)["n_alloc"]


def test_fsa_allocation_count_matches_enumeration():
    # Eq-style count for the free-slot variant at m=2, b=2: silent index 2,
    # all-silent path excluded, systems of 3 disjoint paths
    m, b = 2, 2
    keys = [k for k in itertools.product(range(m + 1), repeat=b) if k != (m, m)]
    systems = brute_force_systems(keys, m + 1)
    assert len(systems) == counting(m, b)["n_alloc_fsa"] == 4


# ------------------------------------------------------- path enumeration --


@pytest.fixture(scope="module")
def noise():
    return NoiseModel()


def gens(b, m, seed):
    layout = build_hex_layout(b)
    return synthesize_generations(layout, m, NoiseModel(), 15.0, seed=seed)[1]


def test_enumerate_path_count(noise):
    mats = gens(3, 2, seed=1)
    paths = enumerate_paths(mats, noise)
    assert len(paths) == 8  # M^B
    keys = {p.key for p in paths}
    assert keys == set(itertools.product(range(2), repeat=3))


def test_single_generation_path_is_identity(noise):
    mats = gens(3, 1, seed=2)
    paths = enumerate_paths(mats, noise)
    assert len(paths) == 1
    assert paths[0].user_per_beam == (0, 0, 0)
    assert paths[0].min_rate == paths[0].rates.min()


def test_enumeration_cap(noise):
    mats = gens(7, 3, seed=3)
    with pytest.raises(EnumerationCapError):
        enumerate_paths(mats, noise, cap=100)


def test_grouped_enumeration_count(noise):
    layout = build_hex_layout(7)
    groups = color_grouping(layout, 3)
    mats = gens(7, 3, seed=4)
    paths = enumerate_paths(mats, noise, groups=groups, pairing_seed=0)
    assert len(paths) == 27  # M^C instead of M^B
    # disjointness keys live at group level; expansion covers every beam
    for p in paths:
        assert len(p.key) == 3
        assert len(p.user_per_beam) == 7
    # each beam uses each generation exactly once across a group index sweep
    for beam in range(7):
        for gi in range(3):
            picks = {p.user_per_beam[beam] for p in paths if p.key[gi] == 0}
            assert picks <= set(range(3))


def test_grouped_never_beats_ungrouped_and_stays_close(noise):
    layout = build_hex_layout(7)
    groups = color_grouping(layout, 3)
    grouped_mins, ungrouped_mins = [], []
    for t in range(50):
        mats = gens(7, 3, seed=100 + t)
        ag = schedule_generations(mats, noise, groups=groups, pairing_seed=t)
        au = schedule_generations(mats, noise)
        grouped_mins.append(ag.min_rate)
        ungrouped_mins.append(au.min_rate)
        assert ag.min_rate <= au.min_rate + 1e-9  # grouped paths are a subset
    # the shortcut should track the full search closely on average
    assert np.mean(grouped_mins) >= 0.9 * np.mean(ungrouped_mins)


# --------------------------------------------------------- color grouping --


def test_color_grouping_hex():
    layout = build_hex_layout(7)
    groups = color_grouping(layout, 3)
    assert groups == [[0], [1, 3, 5], [2, 4, 6]]
    assert sorted(len(g) for g in groups) == [1, 3, 3]


def test_color_grouping_no_adjacent_pairs():
    layout = build_hex_layout(7)
    adj = layout.adjacency()
    for c in (3, 4, 5, 7):
        for g in color_grouping(layout, c):
            for a, b in itertools.combinations(g, 2):
                assert not adj[a, b]


def test_color_grouping_two_beams():
    layout = build_hex_layout(2)
    assert color_grouping(layout, 2) == [[0], [1]]


def test_color_grouping_errors():
    layout = build_hex_layout(7)
    with pytest.raises(GroupingError):
        color_grouping(layout, 2)  # hex needs at least 3 colors
    with pytest.raises(GroupingError):
        color_grouping(layout, 8)
    with pytest.raises(GroupingError):
        color_grouping(build_hex_layout(2), 3)


# -------------------------------------------------------- min deletion --


def synthetic_path(key, min_rate):
    b = len(key)
    return PathCombination(
        user_per_beam=tuple(key),
        rates=np.full(b, min_rate),
        order=tuple(range(b)),
        min_rate=min_rate,
        key=tuple(key),
    )


def test_min_deletion_single_path():
    paths = [synthetic_path((0, 0, 0), 2.5)]
    alloc = min_deletion_schedule(paths, 1)
    assert len(alloc.paths) == 1 and alloc.min_rate == 2.5


def test_min_deletion_avoids_greedy_trap():
    # the globally best path forces a terrible partner; minimum deletion
    # must discard it for the balanced pair
    paths = [
        synthetic_path((0, 0), 5.0),   # best single path
        synthetic_path((1, 1), 0.1),   # its forced partner
        synthetic_path((0, 1), 1.0),
        synthetic_path((1, 0), 1.1),
    ]
    alloc = min_deletion_schedule(paths, 2)
    keys = {p.key for p in alloc.paths}
    assert keys == {(0, 1), (1, 0)}
    assert alloc.min_rate == 1.0


def test_min_deletion_infeasible_input():
    paths = [synthetic_path((0, 0), 1.0), synthetic_path((0, 1), 2.0)]
    with pytest.raises(SchedulingError):
        min_deletion_schedule(paths, 2)  # node (0,1) of beam 0 never covered


def test_min_deletion_disjointness(noise):
    for t in range(10):
        mats = gens(4, 3, seed=60 + t)
        alloc = schedule_generations(mats, noise)
        assert alloc.check_disjoint()
        assert len(alloc.paths) == 3
        assert alloc.n_evaluations == 3**4
        for beam in range(4):
            assert sorted(p.user_per_beam[beam] for p in alloc.paths) == [0, 1, 2]


def test_min_deletion_matches_exhaustive_max_min(noise):
    for m, b, trials in [(2, 2, 30), (2, 3, 30), (3, 3, 20), (2, 4, 20)]:
        for t in range(trials):
            mats = gens(b, m, seed=1000 * m + 10 * b + t)
            bg = schedule_generations(mats, noise)
            es = exhaustive_search(mats, noise)
            assert bg.min_rate == es.min_rate  # same float universe: exact


def test_min_deletion_worst_slot_equals_first_lock(noise):
    # the first locked path carries the allocation bottleneck
    mats = gens(3, 3, seed=9)
    alloc = schedule_generations(mats, noise)
    assert alloc.paths[0].min_rate == alloc.min_rate


# ---------------------------------------------------- exhaustive search --


def test_exhaustive_single_generation(noise):
    mats = gens(3, 1, seed=11)
    alloc = exhaustive_search(mats, noise)
    assert len(alloc.paths) == 1
    assert alloc.n_evaluations == 1


def test_exhaustive_two_by_two_picks_better_of_both(noise):
    mats = gens(2, 2, seed=13)
    es = exhaustive_search(mats, noise)
    paths = evaluate_assignments(mats, np.array(list(itertools.product(range(2), repeat=2))), noise)
    by_key = {p.key: p.min_rate for p in paths}
    straight = min(by_key[(0, 0)], by_key[(1, 1)])
    crossed = min(by_key[(0, 1)], by_key[(1, 0)])
    assert es.min_rate == max(straight, crossed)


def test_exhaustive_evaluation_count(noise):
    mats = gens(3, 3, seed=17)
    alloc = exhaustive_search(mats, noise)
    assert alloc.n_evaluations == counting(3, 3)["n_eval_es"] == 108


def test_exhaustive_cap(noise):
    mats = gens(4, 4, seed=19)
    with pytest.raises(OracleCapError):
        exhaustive_search(mats, noise, cap=100)


def test_redundancy_distinct_paths_below_total_slots(noise):
    # distinct combinations across all allocations stay below M * N_alloc
    m, b = 3, 3
    keys = list(itertools.product(range(m), repeat=b))
    systems = brute_force_systems(keys, m)
    assert len(systems) == 36
    distinct = {keys[i] for system in systems for i in system}
    assert len(distinct) < m * len(systems)  # 27 < 108: shared combinations


def test_monotone_improvement_with_depth(noise):
    # matched generations: deeper scheduling shifts the worst-slot CDF up
    layout = build_hex_layout(4)
    _, stream = synthesize_generations(layout, 240, NoiseModel(), 15.0, seed=555)
    samples = {}
    for m in (1, 2, 3):
        mins = []
        for start in range(0, 240, m):
            group = stream[start : start + m]
            if len(group) < m:
                break
            if m == 1:
                from beamsched.rates import batch_evaluate_slots

                _, rates = batch_evaluate_slots(group[0].entries[None], noise)
                mins.append(float(rates.min()))
            else:
                alloc = schedule_generations(group, noise)
                mins.extend(p.min_rate for p in alloc.paths)
        samples[m] = np.array(mins)
    deciles = np.arange(0.1, 0.91, 0.1)
    q1 = np.quantile(samples[1], deciles)
    q2 = np.quantile(samples[2], deciles)
    q3 = np.quantile(samples[3], deciles)
    assert np.all(q2 >= q1 - 0.05)
    assert np.all(q3 >= q2 - 0.05)
    assert samples[2].mean() > samples[1].mean()
    assert samples[3].mean() > samples[2].mean()


def test_allocation_csv(tmp_path, noise):
    mats = gens(3, 2, seed=23)
    alloc = schedule_generations(mats, noise)
    path = tmp_path / "alloc.csv"
    write_allocation_csv(alloc, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3  # header + 2 slots
    header = lines[0].split(",")
    assert header[:3] == ["beam_0_user", "beam_1_user", "beam_2_user"]
    assert header[-1] == "slot_min_rate"
    for line in lines[1:]:
        cells = line.split(",")
        assert float(cells[-1]) == min(float(c) for c in cells[3:6])
