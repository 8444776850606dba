"""Per-agent distributed update: one message iteration per simulation step.

Every step an agent reads the previous step's broadcasts, refreshes its
r and q messages under the selected variant, decides whether its update
window allows a reassignment, re-estimates its arrival time, and publishes
a new packet. Reading and writing are strictly phase-separated: an agent
only ever consumes packets stamped with an earlier step.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Mapping

import numpy as np

from .env import (LateralRegionSet, RoadConfig, VehicleState,
                  predict_arrival, safe_region)
from .messages import (BroadcastPacket, DecisionDomain, FactorNode,
                       compute_q, compute_r_conditional, compute_r_fixed,
                       compute_r_standard, partition_variables,
                       select_assignment)


class Variant(Enum):
    """Message-update rule used by the coordination layer."""

    MAX_SUM = "max-sum"
    COND_MAX_SUM = "cond-max-sum"
    NO_MAX_SUM = "no-max-sum"
    MOBIL = "mobil"

    @property
    def is_dcop(self) -> bool:
        return self is not Variant.MOBIL


@dataclass(frozen=True)
class AgentTimingState:
    """Reassignment window bookkeeping, in steps.

    A scenario's initial phase offset is folded into ``last_update_step``
    (negative offsets make the first window open earlier).
    """

    last_update_step: int
    t_min: float = 4.0
    t_max: float = 6.0

    def __post_init__(self):
        if not (0 < self.t_min <= self.t_max):
            raise ValueError("need 0 < t_min <= t_max")


def should_update(timing: AgentTimingState, now: int, dt: float, y: float,
                  y_d: float, y_e: float) -> bool:
    """Whether the agent may reassign at step ``now``.

    True once the window floor has passed and the current lateral target is
    reached within ``y_e``, or unconditionally once the window is exhausted.
    """
    elapsed = (now - timing.last_update_step) * dt
    if elapsed >= timing.t_max:
        return True
    return elapsed >= timing.t_min and abs(y - y_d) <= y_e


def next_update_estimate(timing: AgentTimingState, now: int, dt: float,
                         arrival_s: float) -> float:
    """Seconds until this agent expects to reassign.

    The window ceiling forces a reassignment regardless of progress, so the
    broadcast estimate is the arrival prediction capped by the remaining
    window. An agent already at its target advertises an imminent update
    even if its window floor has not passed: treating it as movable is the
    safer assumption for partners, and matches arrival-based estimation.
    """
    elapsed = (now - timing.last_update_step) * dt
    rem_max = max(timing.t_max - elapsed, 0.0)
    return min(arrival_s, rem_max)


@dataclass
class AgentView:
    """Frozen per-step inputs for one agent's update."""

    state: VehicleState
    factors: List[FactorNode]
    regions: LateralRegionSet
    committed_target: float
    assignment: float
    road: RoadConfig


@dataclass(frozen=True)
class StepContext:
    """Run-wide constants shared by every agent step."""

    domain: DecisionDomain
    dt: float
    t_e_const: float
    y_e: float
    k_p: float
    k_d: float
    b_safe: float
    horizon_steps: int


@dataclass
class AgentStepResult:
    packet: BroadcastPacket
    updated: bool
    committed_target: float
    control_target: float
    timing: AgentTimingState


def _factor_r(factor: FactorNode, agent_id: int,
              snapshot: Mapping[int, BroadcastPacket], variant: Variant,
              now: int, ctx: StepContext) -> np.ndarray:
    others = [k for k in factor.variable_ids if k != agent_id]
    incoming_q: Dict[int, np.ndarray] = {}
    for k in others:
        pkt = snapshot.get(k)
        if pkt is None:
            continue
        if pkt.step >= now:
            raise ValueError(
                f"agent {agent_id} read a packet from the current step")
        q = pkt.q_messages.get(factor.id)
        if q is not None:
            incoming_q[k] = q
    if variant is Variant.MAX_SUM or not others:
        return compute_r_standard(factor, agent_id, incoming_q, ctx.domain)
    # Deviations are measured from broadcast-informed targets, so a neighbor
    # holding its committed target sits at deviation zero.
    clamped = {k: 0.0 for k in others}
    if variant is Variant.NO_MAX_SUM:
        return compute_r_fixed(factor, agent_id, incoming_q, clamped,
                               ctx.domain)
    estimates = {agent_id: snapshot[agent_id].time_estimate}
    for k in others:
        pkt = snapshot.get(k)
        if pkt is not None:
            estimates[k] = pkt.time_estimate
    partition = partition_variables(factor, agent_id, estimates,
                                    ctx.t_e_const)
    clamped = {k: 0.0 for k in partition.clamp_set}
    return compute_r_conditional(factor, agent_id, incoming_q, partition,
                                 clamped, ctx.domain)


def agent_step(agent_id: int, snapshot: Mapping[int, BroadcastPacket],
               view: AgentView, variant: Variant, timing: AgentTimingState,
               now: int, ctx: StepContext) -> AgentStepResult:
    """Run one distributed update for ``agent_id`` and build its packet.

    The snapshot must hold only packets from earlier steps; the caller
    commits the returned packet at the step boundary.
    """
    state = view.state
    incoming_r: Dict[str, np.ndarray] = {}
    for factor in sorted(view.factors, key=lambda f: f.id):
        incoming_r[factor.id] = _factor_r(factor, agent_id, snapshot,
                                          variant, now, ctx)

    q_new = {fid: compute_q(fid, incoming_r) for fid in sorted(incoming_r)}

    updated = should_update(timing, now, ctx.dt, state.y, state.y_d, ctx.y_e)
    if updated:
        x_star, _ = select_assignment(incoming_r, ctx.domain)
        lo, hi = view.road.band(state.width)
        committed = min(max(view.committed_target + x_star, lo), hi)
        timing = replace(timing, last_update_step=now)
        assignment = x_star
    else:
        committed = view.committed_target
        assignment = view.assignment

    _, control_target = safe_region(view.regions, committed, ctx.b_safe,
                                    view.road.y_thr)
    arrival = predict_arrival(state.y, state.v_y, control_target, ctx.k_p,
                              ctx.k_d, ctx.dt, ctx.y_e, ctx.horizon_steps)
    t_e = next_update_estimate(timing, now, ctx.dt, arrival)
    packet = BroadcastPacket(agent_id, now, q_new, assignment, t_e)
    return AgentStepResult(packet, updated, committed, control_target, timing)
