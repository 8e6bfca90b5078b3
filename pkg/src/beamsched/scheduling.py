"""Bipartite-graph scheduling: path enumeration and minimum-deletion selection.

Vocabulary: with M generations of users over B beams, a *path* picks one
user (generation index) per beam and is evaluated as one slot; an
*allocation* is a system of M node-disjoint paths covering every
(beam, generation) node exactly once. Slot order carries no meaning.

Counting identities (arbitrary precision):

    n_alloc     = (M!)^(B-1)          allocations
    n_paths     = M^B                 paths (= slot evaluations, graph route)
    n_eval_es   = M * (M!)^(B-1)      slot evaluations, exhaustive search
    n_alloc_fsa = ((M+1)!)^(B-1) - (M!)^(B-1)   free-slot variant

With fictitious-color grouping, beams that never interfere strongly are
merged: paths are drawn per color group (M^C instead of M^B) after users
inside a group are tied together by a fixed seeded pairing.

Internally paths live as flat integer arrays (assignments, keys) plus rate
matrices; PathCombination objects are materialized at the API boundary and
for selected slots, which keeps large free-slot enumerations cheap.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import NoiseModel
from .errors import (
    ConfigError,
    EnumerationCapError,
    GroupingError,
    OracleCapError,
    SchedulingError,
)
from .rates import batch_evaluate_slots

SILENT = -1  # user_per_beam marker for a free (unused) beam-slot cell

DEFAULT_ENUMERATION_CAP = 10**6
DEFAULT_ORACLE_CAP = 10**5


def counting(m, b):
    """Exact combinatorics of the scheduling problem for M users x B beams."""
    if m < 1 or b < 1:
        raise ConfigError("counting needs m >= 1 and b >= 1")
    f = math.factorial(m)
    return {
        "n_users_sched": m * b,
        "n_alloc": f ** (b - 1),
        "n_paths": m**b,
        "n_eval_es": m * f ** (b - 1),
        "n_eval_bg": m**b,
        "n_alloc_fsa": math.factorial(m + 1) ** (b - 1) - f ** (b - 1),
    }


@dataclass
class PathCombination:
    """One slot candidate: a user (or silent cell) per beam plus its rates."""

    user_per_beam: tuple      # generation index per beam, SILENT for free cells
    rates: np.ndarray         # (B,) bits/s/Hz per beam column
    order: tuple              # decode permutation used
    min_rate: float           # min over occupied beams
    key: tuple = None         # disjointness tuple (per beam, or per color group)

    def __post_init__(self):
        if self.key is None:
            self.key = self.user_per_beam

    @property
    def active(self):
        return tuple(u != SILENT for u in self.user_per_beam)


@dataclass
class Allocation:
    """A system of node-disjoint paths; one slot per path."""

    paths: list
    n_evaluations: int | None = None

    @property
    def slot_min_rates(self):
        return np.array([p.min_rate for p in self.paths])

    @property
    def min_rate(self):
        return float(self.slot_min_rates.min())

    def check_disjoint(self):
        for pos in range(len(self.paths[0].key)):
            seen = [p.key[pos] for p in self.paths]
            if len(set(seen)) != len(seen):
                return False
        return True


@dataclass
class _RawPaths:
    """Array-backed path set: row i is one candidate slot."""

    assignments: np.ndarray  # (K, B) generation per beam, SILENT for free cells
    keys: np.ndarray         # (K, C) disjointness indices, 0..n_idx-1
    orders: np.ndarray       # (K, B)
    rates: np.ndarray        # (K, B)
    min_rates: np.ndarray    # (K,) min over occupied beams

    def __len__(self):
        return len(self.keys)

    def to_path(self, row):
        return PathCombination(
            user_per_beam=tuple(int(u) for u in self.assignments[row]),
            rates=self.rates[row],
            order=tuple(int(o) for o in self.orders[row]),
            min_rate=float(self.min_rates[row]),
            key=tuple(int(v) for v in self.keys[row]),
        )

    def to_paths(self):
        return [self.to_path(i) for i in range(len(self))]


def _compose_slots(stack, assignments):
    """Slot matrices from per-beam generation picks.

    stack: (M+1, B, B) where index M is an all-zero matrix backing SILENT
    cells. assignments: (K, B) integer picks with SILENT mapped to M.
    Returns (K, B, B) where column b of slot k is column b of the picked
    generation.
    """
    cols = stack.transpose(0, 2, 1)[assignments, np.arange(stack.shape[1])[None, :], :]
    return cols.transpose(0, 2, 1)


def _matrix_stack(matrices, with_silent):
    arrs = [np.asarray(getattr(m, "entries", m), dtype=complex) for m in matrices]
    b = arrs[0].shape[0]
    for a in arrs:
        if a.shape != (b, b):
            raise ConfigError("all channel matrices must share the same dimension")
    if with_silent:
        arrs = arrs + [np.zeros((b, b), dtype=complex)]
    return np.stack(arrs, axis=0)


_EVAL_CHUNK = 8192


def _evaluate_raw(matrices, assignments, noise, keys=None):
    assignments = np.asarray(assignments, dtype=int)
    keys = assignments if keys is None else np.asarray(keys, dtype=int)
    silent_mask = assignments == SILENT
    stack = _matrix_stack(matrices, with_silent=bool(silent_mask.any()))
    picks = np.where(silent_mask, len(matrices), assignments)

    k = len(picks)
    b = stack.shape[1]
    orders = np.empty((k, b), dtype=np.intp)
    rates = np.empty((k, b))
    # chunked for memory; per-slot results do not depend on the chunking
    for start in range(0, k, _EVAL_CHUNK):
        chunk = slice(start, min(start + _EVAL_CHUNK, k))
        slots = _compose_slots(stack, picks[chunk])
        orders[chunk], rates[chunk] = batch_evaluate_slots(slots, noise)
    occupied_rates = np.where(silent_mask, np.inf, rates)
    min_rates = occupied_rates.min(axis=1)
    return _RawPaths(assignments, keys, orders, rates, min_rates)


def evaluate_assignments(matrices, assignments, noise=NoiseModel(), keys=None):
    """Compose and rate-evaluate one slot per assignment row.

    assignments rows hold generation indices per beam with SILENT for free
    cells; the path min rate only considers occupied beams. Returns
    PathCombination objects.
    """
    return _evaluate_raw(matrices, assignments, noise, keys).to_paths()


def color_grouping(layout, c):
    """Partition beams into c fictitious colors with no hex-adjacent pair.

    Deterministic first-fit over beam index; oversized results are split
    (subsets of an independent set stay independent) to reach exactly c
    groups. Raises GroupingError when no partition exists.
    """
    b = layout.b
    if not 1 <= c <= b:
        raise GroupingError(f"cannot split {b} beams into {c} color groups")
    adj = layout.adjacency()
    groups = []
    for beam in range(b):
        for g in groups:
            if not any(adj[beam, other] for other in g):
                g.append(beam)
                break
        else:
            groups.append([beam])
    if len(groups) > c:
        raise GroupingError(
            f"hex adjacency requires at least {len(groups)} colors, got {c}"
        )
    while len(groups) < c:
        largest = max(groups, key=len)
        if len(largest) == 1:
            raise GroupingError(f"cannot split {b} beams into {c} non-empty groups")
        groups.append([largest.pop()])
    return [sorted(g) for g in groups]


def _group_pairings(groups, m, seed):
    """Per-beam permutations tying same-color beams together.

    The first beam of each group keeps the identity so that group choice c
    means "generation c" there; other beams get a seeded random bijection.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0x5EED, int(seed)]))
    pairing = {}
    for g in groups:
        for i, beam in enumerate(g):
            pairing[beam] = np.arange(m) if i == 0 else rng.permutation(m)
    return pairing


def _enumerate_raw(matrices, noise, groups, pairing_seed, cap):
    m = len(matrices)
    b = np.asarray(getattr(matrices[0], "entries", matrices[0])).shape[0]
    if groups is None:
        total = m**b
        if total > cap:
            raise EnumerationCapError(
                f"{total} paths exceed the cap {cap}; enable color grouping"
            )
        assignments = np.array(list(itertools.product(range(m), repeat=b)), dtype=int)
        return _evaluate_raw(matrices, assignments, noise)

    flat = sorted(beam for g in groups for beam in g)
    if flat != list(range(b)):
        raise GroupingError("groups must partition the beam set")
    c = len(groups)
    total = m**c
    if total > cap:
        raise EnumerationCapError(f"{total} grouped paths exceed the cap {cap}")
    pairing = _group_pairings(groups, m, pairing_seed)
    choices = np.array(list(itertools.product(range(m), repeat=c)), dtype=int)
    assignments = np.empty((len(choices), b), dtype=int)
    for gi, g in enumerate(groups):
        for beam in g:
            assignments[:, beam] = pairing[beam][choices[:, gi]]
    return _evaluate_raw(matrices, assignments, noise, keys=choices)


def enumerate_paths(
    matrices,
    noise=NoiseModel(),
    groups=None,
    pairing_seed=0,
    cap=DEFAULT_ENUMERATION_CAP,
):
    """All candidate paths with their evaluated rates.

    Without grouping this is the full M^B product. With `groups` (a beam
    partition from color_grouping) enumeration runs over M^C group-level
    choices; the disjointness key of each path is the group-choice tuple.
    """
    return _enumerate_raw(matrices, noise, groups, pairing_seed, cap).to_paths()


class _SubPool:
    """Compact packed-bitset view of the alive rows of one query."""

    def __init__(self, rows, keys, cell_masks, n_cells):
        self.rows = rows              # absolute row indices, ascending
        self.keys = keys              # (n, P) keys of those rows
        self.cell_masks = cell_masks  # per-row cell masks (python ints)
        self.n = len(rows)
        self.words = max(1, (self.n + 63) // 64)
        self.cell_rows = np.zeros((n_cells, self.words), dtype=np.uint64)
        n_idx = n_cells // keys.shape[1]
        for pos in range(keys.shape[1]):
            for idx in np.unique(keys[:, pos]):
                self.cell_rows[pos * n_idx + int(idx)] = self._pack(keys[:, pos] == idx)
        self._compat_cache = {}

    def _pack(self, bools):
        padded = np.zeros(self.words * 64, dtype=bool)
        padded[: self.n] = bools
        return np.packbits(padded, bitorder="little").view(np.uint64)

    def unpack(self, bitset):
        bits = np.unpackbits(bitset.view(np.uint8), bitorder="little")[: self.n]
        return np.flatnonzero(bits)

    def all_rows(self):
        return self._pack(np.ones(self.n, dtype=bool))

    def compat(self, sub_row):
        cached = self._compat_cache.get(sub_row)
        if cached is None:
            conflicts = (self.keys == self.keys[sub_row]).any(axis=1)
            cached = self._pack(~conflicts)
            self._compat_cache[sub_row] = cached
        return cached


class _CoverSolver:
    """Feasibility of disjoint-path systems over suffixes of a sorted pool.

    A query asks whether rows `start:` contain `need` pairwise-disjoint
    paths covering every cell of `remaining`; it returns a witness of
    absolute row indices (preferring high rows) or None. Each query runs a
    most-constrained-cell exact-cover DFS over a compact bitset view of
    its alive rows. Infeasible coverage states are memoized globally: the
    deletion loop only ever shrinks the pool, which keeps the memo sound,
    and the memo key (the uncovered-cell mask) is independent of row
    numbering.
    """

    _PROBE_POOL = 4096  # look for a witness among the best rows first

    def __init__(self, keys, n_idx):
        self.keys = np.ascontiguousarray(keys)
        self.n = len(keys)
        self.n_pos = keys.shape[1]
        self.n_idx = n_idx
        self.n_cells = self.n_pos * n_idx
        shifts = (np.arange(self.n_pos) * n_idx)[None, :] + keys
        self.cell_masks = np.bitwise_or.reduce(
            np.left_shift(np.uint64(1), shifts.astype(np.uint64)), axis=1
        )
        self.full = (1 << self.n_cells) - 1
        self.memo = set()

    def _search(self, pool, cand, remaining, need, memo):
        """DFS for `need` disjoint rows within `cand` covering `remaining`."""
        if need == 0:
            return [] if remaining == 0 else None
        if remaining in memo:
            return None
        best_count, best_rows = None, None
        probe = remaining
        while probe:
            bit = probe & (-probe)
            probe ^= bit
            rows = cand & pool.cell_rows[bit.bit_length() - 1]
            count = int(np.bitwise_count(rows).sum())
            if need == 1 and count > 0:
                # a candidate subset of an n_pos-bit remaining equals it
                best_count, best_rows = count, rows
                break
            if best_count is None or count < best_count:
                best_count, best_rows = count, rows
                if count <= 1:
                    break
        if best_count == 0:
            memo.add(remaining)
            return None
        for sub_row in pool.unpack(best_rows)[::-1]:  # best rows first
            sub_row = int(sub_row)
            sub = self._search(
                pool,
                cand & pool.compat(sub_row),
                remaining ^ pool.cell_masks[sub_row],
                need - 1,
                memo,
            )
            if sub is not None:
                return [sub_row] + sub
        memo.add(remaining)
        return None

    def _query_pool(self, rows, remaining, need):
        pool = _SubPool(
            rows,
            self.keys[rows],
            [int(mk) for mk in self.cell_masks[rows]],
            self.n_cells,
        )
        witness = self._search(pool, pool.all_rows(), remaining, need, self.memo)
        if witness is None:
            return None
        return [int(rows[i]) for i in witness]

    def query(self, start, remaining, need):
        """Witness rows (absolute, any order) or None."""
        if need == 0:
            return [] if remaining == 0 else None
        dead_cells = np.uint64(self.full ^ remaining)
        alive = (self.cell_masks & dead_cells) == 0
        alive[:start] = False
        rows = np.flatnonzero(alive)
        if len(rows) < need:
            return None
        if len(rows) > self._PROBE_POOL:
            # dense pools almost surely contain a system among their best
            # rows; a witness found there is valid for the full pool. The
            # probe uses a private memo: its smaller pool proves nothing
            # about the full one.
            probe_rows = rows[-self._PROBE_POOL :]
            pool = _SubPool(
                probe_rows,
                self.keys[probe_rows],
                [int(mk) for mk in self.cell_masks[probe_rows]],
                self.n_cells,
            )
            witness = self._search(pool, pool.all_rows(), remaining, need, set())
            if witness is not None:
                return [int(probe_rows[i]) for i in witness]
        return self._query_pool(rows, remaining, need)


def _min_deletion_raw(keys, min_rates, m):
    """Core of the minimum-deletion algorithm on array-backed paths.

    Returns the original row indices of the m locked paths, in lock order.
    Paths sort ascending by min rate with lexicographic key tie-break. The
    loop chases witnesses upward: every row below the current witness is
    deletable, and a row whose removal kills feasibility is locked, which
    reproduces one-at-a-time worst-path deletion with one infeasibility
    proof per lock.
    """
    keys = np.asarray(keys, dtype=np.int64)
    n_pos = keys.shape[1]
    if len(keys) and (keys.min() < 0 or keys.max() >= m):
        raise SchedulingError("path key index outside 0..m-1")
    if n_pos * m > 60:
        raise SchedulingError("cell universe too large for mask encoding")

    order = np.lexsort(
        tuple(keys[:, pos] for pos in range(n_pos - 1, -1, -1)) + (min_rates,)
    )
    solver = _CoverSolver(keys[order], m)

    remaining = solver.full
    need = m
    locked = []
    witness = solver.query(0, remaining, need)
    if witness is None:
        raise SchedulingError("path set admits no complete disjoint system")

    while need > 0:
        while True:
            cursor = min(witness)  # rows below are deletable: witness survives
            next_witness = solver.query(cursor + 1, remaining, need)
            if next_witness is None:
                break  # deleting row `cursor` breaks feasibility: lock it
            witness = next_witness
        locked.append(int(order[cursor]))
        remaining ^= int(solver.cell_masks[cursor])
        need -= 1
        if need:
            witness = solver.query(cursor + 1, remaining, need)
            if witness is None:
                raise SchedulingError("pruned path set lost feasibility")

    return locked


def min_deletion_schedule(paths, m):
    """Select m node-disjoint paths by iterated worst-path deletion.

    Paths are sorted ascending by min rate (ties: lexicographic key). The
    worst remaining path is deleted whenever a complete system of disjoint
    paths still exists without it; otherwise it is locked into the
    allocation and everything overlapping its nodes is pruned.
    """
    if not paths:
        raise SchedulingError("no paths to schedule")
    keys = np.array([p.key for p in paths], dtype=int)
    min_rates = np.array([p.min_rate for p in paths])
    locked = _min_deletion_raw(keys, min_rates, m)
    return Allocation(paths=[paths[i] for i in locked], n_evaluations=len(paths))


def schedule_generations(
    matrices,
    noise=NoiseModel(),
    groups=None,
    pairing_seed=0,
    cap=DEFAULT_ENUMERATION_CAP,
):
    """Enumerate paths for M generations and run minimum deletion."""
    raw = _enumerate_raw(matrices, noise, groups, pairing_seed, cap)
    locked = _min_deletion_raw(raw.keys, raw.min_rates, len(matrices))
    return Allocation(paths=[raw.to_path(i) for i in locked], n_evaluations=len(raw))


def _leximin_key(slot_mins):
    return tuple(sorted(slot_mins))


def exhaustive_search(matrices, noise=NoiseModel(), cap=DEFAULT_ORACLE_CAP):
    """Best allocation by enumerating all (M!)^(B-1) of them.

    Maximizes the minimum per-user rate over all slots; ties resolved by
    the lexicographically largest sorted vector of slot minima (leximin),
    then by enumeration order. Performs exactly M * (M!)^(B-1) slot-rate
    evaluations, matching the exhaustive-search cost formula.
    """
    m = len(matrices)
    stack = _matrix_stack(matrices, with_silent=False)
    b = stack.shape[1]
    n_alloc = math.factorial(m) ** (b - 1)
    if n_alloc > cap:
        raise OracleCapError(f"{n_alloc} allocations exceed the oracle cap {cap}")

    perms = list(itertools.permutations(range(m)))
    best_key, best_paths = None, None
    n_eval = 0
    # Slot order is irrelevant: beam 0 keeps the identity assignment.
    for combo in itertools.product(perms, repeat=b - 1):
        assignments = np.empty((m, b), dtype=int)
        assignments[:, 0] = np.arange(m)
        for beam, perm in enumerate(combo, start=1):
            assignments[:, beam] = perm
        slots = _compose_slots(stack, assignments)
        orders, rates = batch_evaluate_slots(slots, noise)
        n_eval += m
        slot_mins = rates.min(axis=1)
        key = _leximin_key(slot_mins)
        if best_key is None or key > best_key:
            best_key = key
            best_paths = [
                PathCombination(
                    user_per_beam=tuple(int(u) for u in assignments[s]),
                    rates=rates[s],
                    order=tuple(int(o) for o in orders[s]),
                    min_rate=float(slot_mins[s]),
                )
                for s in range(m)
            ]
    return Allocation(paths=best_paths, n_evaluations=n_eval)


def write_allocation_csv(allocation, path):
    """One row per slot: beam -> generation picks, per-user rates, slot min."""
    b = len(allocation.paths[0].user_per_beam)
    header = (
        [f"beam_{i}_user" for i in range(b)]
        + [f"beam_{i}_rate" for i in range(b)]
        + ["slot_min_rate"]
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for p in allocation.paths:
            cells = [str(u) for u in p.user_per_beam]
            cells += [repr(float(r)) for r in p.rates]
            cells += [repr(float(p.min_rate))]
            fh.write(",".join(cells) + "\n")
