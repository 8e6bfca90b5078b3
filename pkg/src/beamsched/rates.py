"""Per-user rates under MMSE filtering with successive interference cancellation.

Decode ordering convention: `order[p]` is the matrix column decoded at
position p. The user at position p sees the users at positions > p as
residual interference; everything decoded earlier is perfectly cancelled.
Its SINR is

    sinr_p = h_p^H (n0 I + sum_{q > p} h_q h_q^H)^{-1} h_p

and the achievable rate is log2(1 + sinr_p) bits/s/Hz. Summed over users the
rates equal log2 det(I + H H^H / n0) for every ordering (the architecture is
capacity achieving), which the test suite enforces.

The batch functions are the canonical kernels; the single-matrix API wraps
them with K=1 so that every consumer sees bit-identical numbers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import NoiseModel
from .errors import NumericalError

_CONDITION_GUARD = 1e12


@dataclass
class SlotRates:
    """Evaluated rates of one slot, indexed by original matrix column."""

    rates: np.ndarray        # (B,) bits/s/Hz
    order: tuple             # decode position -> column index
    min_rate: float
    matrix_ref: str | None = None

    @property
    def sum_rate(self):
        return float(self.rates.sum())


def _as_matrix(h):
    entries = getattr(h, "entries", h)
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("slot matrix must be square")
    return m


def _guard_conditioning(hs, n0):
    # lambda_max(A) <= n0 + total column power, so this bounds cond(A).
    power = np.einsum("kij,kij->k", hs.conj(), hs).real
    worst = 1.0 + float(power.max(initial=0.0)) / n0
    if worst > _CONDITION_GUARD:
        raise NumericalError(
            f"interference-plus-noise matrix conditioning bound {worst:.3g} "
            f"exceeds guard {_CONDITION_GUARD:.0e}"
        )


def batch_optimal_orderings(hs, noise=NoiseModel()):
    """Greedy max-min decode orders for a batch of slot matrices.

    At each stage the not-yet-placed column with the largest MMSE SINR
    (treating the other unplaced columns as interference) is decoded next;
    ties go to the lowest column index. This greedy attains the max-min
    optimum over all B! orderings, which the tests check by enumeration.

    hs: (K, B, B) complex. Returns (K, B) integer orders.
    """
    hs = np.asarray(hs, dtype=complex)
    k, b, _ = hs.shape
    _guard_conditioning(hs, noise.n0)
    eye = noise.n0 * np.eye(b, dtype=complex)
    remaining = np.ones((k, b), dtype=bool)
    order = np.empty((k, b), dtype=np.intp)
    rows = np.arange(k)
    for pos in range(b):
        cols = np.where(remaining[:, None, :], hs, 0.0)
        a = eye + cols @ cols.conj().transpose(0, 2, 1)
        x = np.linalg.solve(a, hs)
        # q_j = h_j^H A^{-1} h_j in [0, 1); sinr_j = q_j / (1 - q_j) is
        # monotone in q_j, so ranking by q is ranking by SINR.
        q = np.einsum("kij,kij->kj", hs.conj(), x).real
        q = np.where(remaining, q, -np.inf)
        pick = np.argmax(q, axis=1)
        order[:, pos] = pick
        remaining[rows, pick] = False
    return order


def batch_rates_for_orders(hs, orders, noise=NoiseModel()):
    """Per-user rates for given decode orders; (K, B) by original column."""
    hs = np.asarray(hs, dtype=complex)
    k, b, _ = hs.shape
    _guard_conditioning(hs, noise.n0)
    rates = np.empty((k, b))
    rows = np.arange(k)
    a = np.broadcast_to(noise.n0 * np.eye(b, dtype=complex), (k, b, b)).copy()
    for pos in range(b - 1, -1, -1):
        j = orders[:, pos]
        hj = hs[rows, :, j]  # (K, B) column decoded at this position
        x = np.linalg.solve(a, hj[..., None])[..., 0]
        sinr = np.einsum("ki,ki->k", hj.conj(), x).real
        rates[rows, j] = np.log2(1.0 + sinr)
        a = a + hj[:, :, None] * hj.conj()[:, None, :]
    return rates


def batch_evaluate_slots(hs, noise=NoiseModel()):
    """Optimal orders plus their rates for a batch of slot matrices."""
    orders = batch_optimal_orderings(hs, noise)
    return orders, batch_rates_for_orders(hs, orders, noise)


def mmse_sic_sinr(h_slot, order, j, noise=NoiseModel()):
    """SINR of column j under the given decode order (linear scale).

    Direct evaluation of the MMSE-SIC quadratic form: columns decoded after
    j remain as interference, earlier ones are cancelled.
    """
    h = _as_matrix(h_slot)
    b = h.shape[0]
    order = list(order)
    if sorted(order) != list(range(b)):
        raise ValueError("order must be a permutation of 0..B-1")
    pos = order.index(j)
    a = noise.n0 * np.eye(b, dtype=complex)
    for p in range(b - 1, pos, -1):
        hv = h[:, order[p]]
        a = a + np.outer(hv, hv.conj())
    _guard_conditioning(h[None, ...], noise.n0)
    x = np.linalg.solve(a, h[:, j])
    return float(np.real(np.vdot(h[:, j], x)))


def per_user_rates(h_slot, order, noise=NoiseModel(), matrix_ref=None):
    """Rates of all users of one slot under a given decode order."""
    h = _as_matrix(h_slot)
    orders = np.asarray(order, dtype=np.intp)[None, :]
    rates = batch_rates_for_orders(h[None, ...], orders, noise)[0]
    return SlotRates(rates, tuple(int(i) for i in order), float(rates.min()), matrix_ref)


def optimal_ordering(h_slot, noise=NoiseModel()):
    """Max-min optimal decode order of one slot matrix."""
    h = _as_matrix(h_slot)
    order = batch_optimal_orderings(h[None, ...], noise)[0]
    return tuple(int(i) for i in order)


def evaluate_slot(h_slot, noise=NoiseModel(), matrix_ref=None):
    """Optimal ordering plus its rates for one slot matrix."""
    h = _as_matrix(h_slot)
    order = batch_optimal_orderings(h[None, ...], noise)[0]
    rates = batch_rates_for_orders(h[None, ...], order[None, :], noise)[0]
    return SlotRates(rates, tuple(int(i) for i in order), float(rates.min()), matrix_ref)


def sum_rate(h_slot, noise=NoiseModel()):
    """Slot sum capacity log2 det(I + H H^H / n0) in bits/s/Hz."""
    h = _as_matrix(h_slot)
    b = h.shape[0]
    gram = np.eye(b) + h @ h.conj().T / noise.n0
    sign, logdet = np.linalg.slogdet(gram)
    if sign.real <= 0:
        raise NumericalError("non-positive determinant in sum-rate evaluation")
    return float(logdet / np.log(2.0))


def per_user_bound(h_slot, noise=NoiseModel()):
    """Sum rate split evenly across users: the per-user upper bound."""
    h = _as_matrix(h_slot)
    return sum_rate(h, noise) / h.shape[0]
