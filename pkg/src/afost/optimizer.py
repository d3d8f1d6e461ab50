"""Per-flow utility maximisation under a link throughput cap.

The budget constraint ``r <= T`` is dualised: for a multiplier ``lambda``
the flow picks the rate-distortion breakpoint maximising ``U(r) - lambda r``,
and ``lambda`` follows the projected subgradient
``max(0, lambda + delta (r - T))``. The packets sent are the prefix of the
importance order at the final breakpoint, which is exactly the set whose
utility gradient beats ``lambda``.
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .media import MediaPacket, importance_order, rd_curve

MAX_ITER = 500
STEP_FRACTION = 0.01


@dataclass
class LagrangeState:
    """Multiplier bookkeeping for one link; rates are in bits/s."""
    lam: float = 0.0
    delta_step: float = 0.0
    last_rate: float = 0.0
    throughput_cap: float = 0.0


@dataclass
class SlotAllocation:
    assignment: np.ndarray  # (senders, slots) 0/1

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if not np.isin(a, (0, 1)).all():
            raise ValueError("slot assignment must be binary")


@dataclass
class ScheduleDecision:
    selected_packets: List[int]
    mode: str
    rate_used: float
    lam: float = 0.0
    iterations: int = 0
    converged: bool = True
    budget_bytes: float = float("inf")
    # rate (bits/s) of the last Lagrangian iterate, before snapping to the budget
    iterate_rate: float = 0.0


def allocate_rate(state: LagrangeState, curve: Tuple[np.ndarray, np.ndarray]) -> float:
    """Breakpoint of the curve maximising ``U(r) - lambda r`` (smallest on ties).

    ``curve`` is the cumulative (rate, utility) pair from :func:`rd_curve`;
    the origin is always a candidate.
    """
    r = np.concatenate([[0.0], np.asarray(curve[0], dtype=float)])
    u = np.concatenate([[0.0], np.asarray(curve[1], dtype=float)])
    return float(r[int(np.argmax(u - state.lam * r))])


def update_multiplier(state: LagrangeState) -> LagrangeState:
    lam = max(0.0, state.lam + state.delta_step * (state.last_rate - state.throughput_cap))
    return replace(state, lam=lam)


def _breakpoint_index(cum_r: np.ndarray, r: float) -> int:
    """Number of packets in the prefix ending at breakpoint ``r``."""
    return int(np.searchsorted(cum_r, r, side="right"))


def schedule_flow(packets: Sequence[MediaPacket], cap_bps: float, state: LagrangeState,
                  window: float, mode: str = "AFOST",
                  max_iter: int = MAX_ITER) -> Tuple[ScheduleDecision, LagrangeState]:
    """Lagrangian packet selection for one flow over one window.

    Iterates rate allocation and multiplier update until the allocated
    rate is within ``max(largest packet, 1% of budget)`` of the cap, then
    sends the longest importance-ordered prefix that fits the byte budget
    ``cap_bps * window / 8``. The returned multiplier is the dual price of
    that selection: the gradient of the first packet left out, or 0 when
    everything fits.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    if not packets:
        return ScheduleDecision([], mode, 0.0, state.lam), replace(state, throughput_cap=cap_bps)
    ordered = importance_order(packets)
    cum_r, cum_d = rd_curve(ordered)
    budget = max(0.0, cap_bps) * window / 8.0
    to_bps = 8.0 / window
    g_max = max(p.gradient for p in ordered)
    total_bps = cum_r[-1] * to_bps
    delta = STEP_FRACTION * g_max / total_bps
    tol = max(max(p.delta_r for p in ordered), 0.01 * budget)
    st = replace(state, delta_step=delta, throughput_cap=cap_bps)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = allocate_rate(st, (cum_r, cum_d))
        st = replace(st, last_rate=r * to_bps)
        if abs(r - budget) <= tol or (st.lam == 0.0 and r <= budget):
            converged = True
            break
        st = update_multiplier(st)
    # Snap to the largest breakpoint inside the byte budget. On a concave
    # curve this is the Lagrangian solution at the optimal multiplier, which
    # the subgradient iterate only approaches to within the tolerance; that
    # multiplier is the gradient of the first packet left out.
    j = _breakpoint_index(cum_r, budget)
    st = replace(st, lam=ordered[j].gradient if j < len(ordered) else 0.0)
    chosen = ordered[:j]
    used = float(sum(p.delta_r for p in chosen))
    st = replace(st, last_rate=used * to_bps)
    return (ScheduleDecision([p.packet_id for p in chosen], mode, used * to_bps, st.lam, it,
                             converged, budget, r * to_bps), st)


def schedule_presentation(packets: Sequence[MediaPacket], window: float,
                          mode: str = "AFOST") -> ScheduleDecision:
    """No optimisation: every packet, in presentation order."""
    ordered = sorted(packets, key=lambda p: p.packet_id)
    used = float(sum(p.delta_r for p in ordered))
    return ScheduleDecision([p.packet_id for p in ordered], mode, used * 8.0 / window)


def schedule_afost(traces: Sequence[Sequence[MediaPacket]], rate_estimates: Sequence[float],
                   states: Sequence[LagrangeState], window: float):
    """Independent per-flow selection against each link's AFOST throughput.

    Returns the decisions and the updated states, both indexed like ``traces``.
    """
    out, new_states = [], []
    for pk, cap, st in zip(traces, rate_estimates, states):
        d, s = schedule_flow(pk, cap, st, window, "AFOST")
        out.append(d)
        new_states.append(s)
    return out, new_states


def equal_slot_allocation(n_senders: int) -> SlotAllocation:
    """Each sender owns one of the N slots of a phase."""
    return SlotAllocation(np.eye(n_senders, dtype=int))


def schedule_coop(traces: Sequence[Sequence[MediaPacket]], dir_rates: Optional[Sequence[float]],
                  coop_rates: Sequence[float], states: Sequence[LagrangeState],
                  n_senders: int, window: float):
    """Equal TDMA share, local DIR/COOP choice, then the Lagrangian selection.

    ``dir_rates`` of None restricts every link to cooperative transmission.
    Returns the slot allocation, the per-flow decisions and updated states.
    """
    alloc = equal_slot_allocation(n_senders)
    out, new_states = [], []
    for n, (pk, st) in enumerate(zip(traces, states)):
        t_coop = coop_rates[n]
        t_dir = -np.inf if dir_rates is None else dir_rates[n]
        mode, cap = ("DIR", t_dir) if t_dir > t_coop else ("COOP", t_coop)
        d, s = schedule_flow(pk, cap, st, window, mode)
        out.append(d)
        new_states.append(s)
    return alloc, out, new_states
