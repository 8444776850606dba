"""Lane-free factor definitions and pairwise-connection management.

Each vehicle owns one single factor (road-bound penalty) and forms pairwise
factors with nearby vehicles. A pairwise factor couples a rear vehicle with a
front one and scores candidate lateral deviations by the rear's overtaking
regret plus a comfort penalty on deviation magnitude.

Factor utilities are evaluated from broadcast-informed positions: while a
vehicle maneuvers, its committed target stands in for its instantaneous
lateral position, so deviations are measured from where vehicles will be,
not where they momentarily are.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .env import (IdmParams, RoadConfig, VehicleState, free_flow_accel,
                  pair_accel)
from .messages import DecisionDomain, FactorNode


@dataclass(frozen=True)
class FactorParams:
    """Coefficients and limits of the lane-free factor formulation."""

    r_c: float = 5.0
    c_c: float = 0.05
    b_c: float = 12.0
    y_range: float = 3.5
    c_range: float = 1.25
    y_safe: float = 0.2
    n_front_max: int = 6
    n_back_max: int = 6
    t_e: float = 1.0
    domain_size: int = 15

    def __post_init__(self):
        if min(self.r_c, self.c_c, self.b_c, self.c_range, self.y_safe) < 0:
            raise ValueError("factor coefficients must be non-negative")
        if self.n_front_max < 1 or self.n_back_max < 1:
            raise ValueError("connection limits must be at least 1")

    def make_domain(self) -> DecisionDomain:
        return DecisionDomain.from_range(self.y_range, self.domain_size)

    @property
    def connect_threshold(self) -> float:
        """Max edge-to-edge lateral distance for a candidate connection."""
        return self.c_range * self.y_range + self.y_safe


@dataclass(frozen=True)
class PairLink:
    """An instantiated pairwise connection, rear following front."""

    rear_id: int
    front_id: int
    a_ij: float
    a_i_free: float

    def __post_init__(self):
        if self.a_i_free < self.a_ij - 1e-12:
            raise ValueError("free-flow estimate below constrained estimate")

    @property
    def factor_id(self) -> str:
        return f"p{self.rear_id}-{self.front_id}"


def single_factor_id(agent_id: int) -> str:
    return f"s{agent_id}"


def single_factor_value(x_i: float, ego: VehicleState, road: RoadConfig,
                        params: FactorParams) -> float:
    """0 if the candidate position stays on the road, else ``-b_c``.

    The boundary itself counts as in bounds.
    """
    lo, hi = road.band(ego.width)
    y_new = ego.y + x_i
    return 0.0 if lo <= y_new <= hi else -params.b_c


def single_factor_table(domain: DecisionDomain, y_base: float, width: float,
                        road: RoadConfig, params: FactorParams) -> np.ndarray:
    lo, hi = road.band(width)
    y_new = y_base + domain.values
    return np.where((y_new >= lo) & (y_new <= hi), 0.0, -params.b_c)


def overlap_class(x_i: float, x_j: float, y_i: float, y_j: float,
                  widths: Tuple[float, float], y_safe: float) -> float:
    """Interaction class of a candidate configuration: 1.0, 0.75 or 0.0.

    1.0 when the destination lateral extents (inflated by ``y_safe``)
    intersect; 0.75 when the destinations are clear but the vehicles swap
    relative lateral order, so one must cross the other mid-maneuver;
    0.0 otherwise. ``y_i``/``y_j`` are the maneuver start positions,
    ``x_i``/``x_j`` the candidate deviations.
    """
    w_i, w_j = widths
    margin = (w_i + w_j) / 2.0 + y_safe
    d_i, d_j = y_i + x_i, y_j + x_j
    if abs(d_i - d_j) <= margin:
        return 1.0
    if (d_i - d_j) * (y_i - y_j) <= 0:
        return 0.75
    return 0.0


def overlap_table(domain: DecisionDomain, y_i: float, y_j: float,
                  w_i: float, w_j: float, y_safe: float) -> np.ndarray:
    """Vectorized ``overlap_class`` over the joint grid (axis 0 = rear)."""
    v = domain.values
    d_i = y_i + v[:, None]
    d_j = y_j + v[None, :]
    margin = (w_i + w_j) / 2.0 + y_safe
    in_range = np.abs(d_i - d_j) <= margin
    crossing = (d_i - d_j) * (y_i - y_j) <= 0
    return np.where(in_range, 1.0, np.where(crossing, 0.75, 0.0))


def regret(x_i: float, x_j: float, link: PairLink,
           states: Tuple[VehicleState, VehicleState],
           params: FactorParams) -> float:
    """Penalty for the rear vehicle keeping the front one as its leader."""
    rear, front = states
    ov = overlap_class(x_i, x_j, rear.y, front.y, (rear.width, front.width),
                       params.y_safe)
    return -params.r_c * (link.a_i_free - link.a_ij) ** 2 * ov


def comfort(x_i: float, x_j: float, params: FactorParams) -> float:
    """Penalty on deviation magnitude, discouraging pointless maneuvers."""
    return -params.c_c * (abs(x_i) + abs(x_j))


def pairwise_factor_value(x_i: float, x_j: float, link: PairLink,
                          states: Tuple[VehicleState, VehicleState],
                          params: FactorParams) -> float:
    return regret(x_i, x_j, link, states, params) + comfort(x_i, x_j, params)


def comfort_table(domain: DecisionDomain, params: FactorParams) -> np.ndarray:
    v = np.abs(domain.values)
    return -params.c_c * (v[:, None] + v[None, :])


def pairwise_factor_table(domain: DecisionDomain, link: PairLink,
                          y_i: float, y_j: float, w_i: float, w_j: float,
                          params: FactorParams,
                          comfort_tab: Optional[np.ndarray] = None,
                          overlap_tab: Optional[np.ndarray] = None) -> np.ndarray:
    """Full utility table of a pairwise factor (axis 0 = rear deviation)."""
    if overlap_tab is None:
        overlap_tab = overlap_table(domain, y_i, y_j, w_i, w_j, params.y_safe)
    if comfort_tab is None:
        comfort_tab = comfort_table(domain, params)
    coeff = -params.r_c * (link.a_i_free - link.a_ij) ** 2
    return coeff * overlap_tab + comfort_tab


def lateral_edge_distance(a: VehicleState, b: VehicleState) -> float:
    """Edge-to-edge lateral distance, floored at zero."""
    return max(0.0, abs(a.y - b.y) - (a.width + b.width) / 2.0)


def candidate_connections(ego: VehicleState,
                          neighbors: Sequence[VehicleState], obs_x: float,
                          params: FactorParams
                          ) -> List[Tuple[Tuple[int, int], str]]:
    """Connection candidates from the ego's perspective.

    Returns ``((rear_id, front_id), direction)`` pairs, direction being
    "down" when the neighbor is ahead of the ego and "up" otherwise.
    Longitudinal ties are ordered by id so both sides agree on direction.
    """
    out = []
    for k in neighbors:
        if k.id == ego.id or abs(k.x - ego.x) > obs_x:
            continue
        if lateral_edge_distance(ego, k) > params.connect_threshold:
            continue
        if (k.x, k.id) > (ego.x, ego.id):
            out.append(((ego.id, k.id), "down"))
        else:
            out.append(((k.id, ego.id), "up"))
    return out


def prune_connections(candidates: Iterable[Tuple[Tuple[int, int], str]],
                      estimates: Mapping[Tuple[int, int], float],
                      n_front_max: int, n_back_max: int
                      ) -> set:
    """Keep the lowest-estimate candidates per direction, ties toward lower id.

    ``estimates`` maps (rear, front) pairs to the rear's acceleration with
    the front as leader.
    """
    down = sorted((p for p, d in candidates if d == "down"),
                  key=lambda p: (estimates[p], p[1]))
    up = sorted((p for p, d in candidates if d == "up"),
                key=lambda p: (estimates[p], p[0]))
    return set(down[:n_front_max]) | set(up[:n_back_max])


def form_links(states: Mapping[int, VehicleState],
               neighbor_ids: Mapping[int, Sequence[int]], obs_x: float,
               params: FactorParams, idm: IdmParams) -> List[PairLink]:
    """Instantiate the pairwise links every agent agrees to keep.

    Each agent prunes its own candidate list; a link survives only if both
    endpoints retained it. The result is independent of agent order.
    """
    accel_cache: Dict[Tuple[int, int], float] = {}

    def accel(pair):
        a = accel_cache.get(pair)
        if a is None:
            a = pair_accel(states[pair[0]], states[pair[1]], idm)
            accel_cache[pair] = a
        return a

    retained: Dict[int, set] = {}
    for i in sorted(states):
        cands = candidate_connections(
            states[i], [states[k] for k in neighbor_ids.get(i, ())],
            obs_x, params)
        est = {p: accel(p) for p, _ in cands}
        retained[i] = prune_connections(cands, est, params.n_front_max,
                                        params.n_back_max)

    links = []
    for i in sorted(states):
        for pair in sorted(retained[i]):
            rear, front = pair
            if rear != i:
                continue
            if pair in retained[front]:
                a_free = free_flow_accel(states[rear].v_x, states[rear].v_d,
                                         idm)
                links.append(PairLink(rear, front, accel(pair), a_free))
    return links


def evaluation_bases(states: Mapping[int, VehicleState],
                     committed_targets: Mapping[int, float]) -> Dict[int, float]:
    """Lateral positions factors evaluate from: committed targets, or the
    observed position for agents that never broadcast one."""
    return {i: committed_targets.get(i, s.y) for i, s in states.items()}


def build_factors(agent_ids: Sequence[int], links: Sequence[PairLink],
                  states: Mapping[int, VehicleState],
                  bases: Mapping[int, float], road: RoadConfig,
                  domain: DecisionDomain, params: FactorParams,
                  comfort_tab: Optional[np.ndarray] = None,
                  overlap_memo: Optional[dict] = None
                  ) -> Dict[int, List[FactorNode]]:
    """One single factor per agent plus the shared pairwise factors.

    Both endpoints of a link receive the same FactorNode instance, so their
    views of the factor's utilities are identical by construction.
    """
    if comfort_tab is None:
        comfort_tab = comfort_table(domain, params)
    by_agent: Dict[int, List[FactorNode]] = {}
    for i in agent_ids:
        tab = single_factor_table(domain, bases[i], states[i].width, road,
                                  params)
        by_agent[i] = [FactorNode(single_factor_id(i), (i,), table=tab)]
    for link in links:
        i, j = link.rear_id, link.front_id
        y_i, y_j = bases[i], bases[j]
        w_i, w_j = states[i].width, states[j].width
        ov = None
        if overlap_memo is not None:
            key = (y_i, y_j, w_i, w_j)
            cached = overlap_memo.get((i, j))
            if cached is not None and cached[0] == key:
                ov = cached[1]
            else:
                ov = overlap_table(domain, y_i, y_j, w_i, w_j, params.y_safe)
                overlap_memo[(i, j)] = (key, ov)
        tab = pairwise_factor_table(domain, link, y_i, y_j, w_i, w_j, params,
                                    comfort_tab=comfort_tab, overlap_tab=ov)
        node = FactorNode(link.factor_id, (i, j), table=tab)
        by_agent[i].append(node)
        by_agent[j].append(node)
    return by_agent
