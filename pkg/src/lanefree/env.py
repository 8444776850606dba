"""Lane-free vehicle environment: kinematics, lateral regions, and control.

Vehicles move on a 2-D road (longitudinal x, lateral y) under a discrete
double-integrator. Lateral space is partitioned into regions induced by
observed traffic; each region carries car-following acceleration estimates
that feed the safety rule, the longitudinal controller (with nudging from
the vehicle behind), and the factor utilities built on top of this module.

Positive lateral speed means movement toward the left (increasing y).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple


@dataclass
class VehicleState:
    """Kinematic state and objectives of one vehicle.

    Attributes
    ----------
    x, y : float
        Center position in meters (longitudinal, lateral).
    v_x, v_y : float
        Speeds in m/s. ``v_x`` is kept non-negative by the dynamics.
    length, width : float
        Footprint in meters.
    v_d : float
        Desired speed objective, m/s.
    y_d : float
        Current desired lateral position (control target), m.
    a_x, a_y : float
        Last applied accelerations, m/s^2.
    """

    id: int
    x: float
    y: float
    v_x: float
    v_y: float = 0.0
    length: float = 5.0
    width: float = 2.0
    v_d: float = 30.0
    y_d: float = 0.0
    a_x: float = 0.0
    a_y: float = 0.0


@dataclass(frozen=True)
class RoadConfig:
    """Straight road segment; ``y_thr`` keeps targets off region edges."""

    length: float
    width: float
    y_thr: float = 0.1

    def __post_init__(self):
        if self.width <= 0 or self.length <= 0:
            raise ValueError("road dimensions must be positive")

    def band(self, width: float) -> Tuple[float, float]:
        """Lateral interval the center of a vehicle this wide may occupy."""
        return width / 2.0, self.width - width / 2.0


@dataclass(frozen=True)
class IdmParams:
    """Car-following parameters (desired-speed tracking + gap keeping).

    ``a_severe`` is the floor on any returned acceleration and doubles as the
    marker for critical situations (gap already closed).
    """

    a_max: float = 1.5
    b_safe: float = 2.0
    a_severe: float = -5.0
    t_x: float = 0.4
    s0: float = 0.3
    delta: float = 4.0

    def __post_init__(self):
        if self.a_max <= 0 or self.b_safe <= 0:
            raise ValueError("a_max and b_safe must be positive")


def desired_gap(v: float, dv: float, p: IdmParams) -> float:
    """Desired bumper-to-bumper distance for a follower at speed ``v``."""
    dyn = v * p.t_x + v * dv / (2.0 * math.sqrt(p.a_max * p.b_safe))
    return p.s0 + max(0.0, dyn)


def idm_accel(v: float, v_d: float, gap: Optional[float], dv: float,
              p: IdmParams) -> float:
    """Longitudinal acceleration toward ``v_d`` while respecting the gap.

    Parameters
    ----------
    v : float
        Own speed, m/s.
    v_d : float
        Desired speed, m/s (must be positive).
    gap : float or None
        Bumper-to-bumper distance to the leader; ``None`` for free flow.
    dv : float
        Approach rate ``v - v_leader`` (ignored in free flow).

    Returns
    -------
    float
        Acceleration clamped to ``[a_severe, a_max]``. A non-positive gap
        signals an already critical overlap and returns ``a_severe``.
    """
    if v_d <= 0:
        raise ValueError("desired speed must be positive")
    a = p.a_max * (1.0 - (v / v_d) ** p.delta)
    if gap is not None:
        if gap <= 0:
            return p.a_severe
        s_star = desired_gap(v, dv, p)
        a -= p.a_max * (s_star / gap) ** 2
    return min(max(a, p.a_severe), p.a_max)


def free_flow_accel(v: float, v_d: float, p: IdmParams) -> float:
    """Acceleration with no leader; reflects only the desired-speed goal."""
    return idm_accel(v, v_d, None, 0.0, p)


def gap_between(rear: VehicleState, front: VehicleState) -> float:
    """Bumper-to-bumper longitudinal distance between two vehicles."""
    return front.x - rear.x - (front.length + rear.length) / 2.0


def pair_accel(rear: VehicleState, front: VehicleState, p: IdmParams) -> float:
    """Estimated acceleration of ``rear`` when following ``front``."""
    return idm_accel(rear.v_x, rear.v_d, gap_between(rear, front),
                     rear.v_x - front.v_x, p)


def step_dynamics(s: VehicleState, a_x: float, a_y: float,
                  dt: float) -> VehicleState:
    """Advance one step under the discrete double-integrator.

    Lateral motion is the exact update ``y += v_y*dt + 0.5*a_y*dt^2``,
    ``v_y += a_y*dt``. Longitudinal motion is analogous, except the vehicle
    stops (never rolls backward) when the speed would cross zero.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = s.y + (s.v_y * dt + 0.5 * a_y * dt * dt)
    v_y = s.v_y + a_y * dt
    v_x_new = s.v_x + a_x * dt
    if v_x_new < 0.0:
        # stop exactly where the speed reaches zero within the step
        t_stop = s.v_x / -a_x if a_x < 0 else 0.0
        x = s.x + (s.v_x * t_stop + 0.5 * a_x * t_stop * t_stop)
        v_x_new = 0.0
    else:
        x = s.x + (s.v_x * dt + 0.5 * a_x * dt * dt)
    return replace(s, x=x, y=y, v_x=v_x_new, v_y=v_y, a_x=a_x, a_y=a_y)


@dataclass
class LateralRegion:
    """One lateral interval with its per-direction acceleration estimates.

    ``a_down`` estimates the ego's acceleration when residing here (free-flow
    value if the region has no downstream occupant); ``a_up`` estimates the
    follower's acceleration with the ego here (``a_max`` if nobody is behind).
    Index 0 is the region currently containing the ego.
    """

    y_low: float
    y_high: float
    leader_id: Optional[int]
    follower_id: Optional[int]
    a_down: float
    a_up: float
    index: int = 0

    @property
    def width(self) -> float:
        return self.y_high - self.y_low


@dataclass
class LateralRegionSet:
    """Ordered (by y) regions tiling the ego's reachable lateral band."""

    regions: List[LateralRegion]
    band: Tuple[float, float]

    def __post_init__(self):
        self._by_index = {r.index: r for r in self.regions}

    def by_index(self, idx: int) -> LateralRegion:
        return self._by_index[idx]

    @property
    def current(self) -> LateralRegion:
        return self._by_index[0]

    @property
    def min_index(self) -> int:
        return self.regions[0].index

    @property
    def max_index(self) -> int:
        return self.regions[-1].index

    def region_at(self, y: float) -> LateralRegion:
        y = min(max(y, self.band[0]), self.band[1])
        for r in self.regions:
            if y <= r.y_high:
                return r
        return self.regions[-1]


def blocked_interval(k: VehicleState, ego_width: float, y_safe: float,
                     t_y: float) -> Tuple[float, float]:
    """Lateral interval around ``k`` that the ego's center must avoid.

    Widened by both half-widths plus ``y_safe``, and extended on the side
    ``k`` is moving toward by ``t_y`` times that lateral speed component.
    """
    v_right = -k.v_y if k.v_y < 0 else 0.0
    v_left = k.v_y if k.v_y > 0 else 0.0
    half = k.width / 2.0 + ego_width / 2.0 + y_safe
    return (k.y - half - t_y * v_right, k.y + half + t_y * v_left)


def build_regions(ego: VehicleState, downstream: Sequence[VehicleState],
                  upstream: Sequence[VehicleState], obs_x: float,
                  y_safe: float, t_y: float, road: RoadConfig,
                  idm: IdmParams) -> LateralRegionSet:
    """Partition the ego's lateral band from observed traffic.

    ``downstream``/``upstream`` must already be restricted to vehicles within
    ``obs_x`` longitudinally (downstream ahead of the ego, upstream behind).
    Where blocked intervals overlap, the occupant with the lowest
    acceleration estimate claims the space.
    """
    band_lo, band_hi = road.band(ego.width)

    # A vehicle running alongside (no longitudinal gap either way) is a hard
    # lateral wall, not a leader or follower: the reachable band ends at its
    # blocked interval, never closer than the ego already is.
    walls = []
    for k in list(downstream) + list(upstream):
        rear, front = (ego, k) if k.x >= ego.x else (k, ego)
        if gap_between(rear, front) <= 0:
            walls.append(k)
    for k in walls:
        lo, hi = blocked_interval(k, ego.width, y_safe, t_y)
        if k.y <= ego.y:
            band_lo = max(band_lo, min(hi, ego.y))
        else:
            band_hi = min(band_hi, max(lo, ego.y))
    if band_lo > band_hi:
        band_lo = band_hi = min(max(ego.y, band_lo), band_hi)
    wall_ids = {k.id for k in walls}
    cuts = {band_lo, band_hi}

    # the ego's own lateral momentum widens intervals it is approaching,
    # mirroring the time-gap term for the observed vehicle's motion
    ego_up = t_y * ego.v_y if ego.v_y > 0 else 0.0
    ego_down = -t_y * ego.v_y if ego.v_y < 0 else 0.0

    def side_intervals(vehicles, estimate):
        out = []
        for k in vehicles:
            if k.id in wall_ids or abs(k.x - ego.x) > obs_x:
                continue
            lo, hi = blocked_interval(k, ego.width, y_safe, t_y)
            if k.y > ego.y:
                lo -= ego_up
            elif k.y < ego.y:
                hi += ego_down
            lo, hi = max(lo, band_lo), min(hi, band_hi)
            if lo >= hi:
                continue
            out.append((lo, hi, estimate(k), k.id))
            cuts.add(lo)
            cuts.add(hi)
        return out

    down = side_intervals(
        downstream, lambda k: pair_accel(ego, k, idm))
    up = side_intervals(
        upstream, lambda k: idm_accel(k.v_x, k.v_d, gap_between(k, ego),
                                      k.v_x - ego.v_x, idm))

    a_free = free_flow_accel(ego.v_x, ego.v_d, idm)
    edges = sorted(cuts)

    def claim(intervals, mid, default):
        best = None
        for lo, hi, a, kid in intervals:
            if lo <= mid <= hi and (best is None or (a, kid) < best):
                best = (a, kid)
        return best if best else (default, None)

    atoms = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 1e-12:
            continue
        mid = 0.5 * (lo + hi)
        a_down, leader = claim(down, mid, a_free)
        a_up, follower = claim(up, mid, idm.a_max)
        atoms.append(LateralRegion(lo, hi, leader, follower, a_down, a_up))

    # regions split at every blocked-interval edge (no merging): equal
    # estimates from different occupants must stay separate regions, or the
    # region holding the ego could swallow another vehicle's blocked space
    # and the safety walk would never see it
    if not atoms:
        # walls may pinch the reachable band to a point
        atoms = [LateralRegion(band_lo, band_hi, None, None, a_free,
                               idm.a_max)]

    y_ego = min(max(ego.y, band_lo), band_hi)
    ego_i = len(atoms) - 1
    for i, r in enumerate(atoms):
        if y_ego <= r.y_high:
            ego_i = i
            break
    for i, r in enumerate(atoms):
        r.index = i - ego_i
    return LateralRegionSet(atoms, (band_lo, band_hi))


def safe_region(regions: LateralRegionSet, y_star: float, b_safe: float,
                y_thr: float) -> Tuple[int, float]:
    """Farthest safely reachable region toward ``y_star`` and the clamped target.

    Walks outward from the current region; every traversed region (including
    the destination, excluding the current one) must have both acceleration
    estimates no worse than ``-b_safe``. The returned target keeps ``y_thr``
    clear of the chosen region's edges.
    """
    y_star = min(max(y_star, regions.band[0]), regions.band[1])
    target = regions.region_at(y_star).index
    step = 1 if target > 0 else -1
    reach = 0
    for idx in range(step, target + step, step) if target != 0 else ():
        r = regions.by_index(idx)
        if r.a_down < -b_safe or r.a_up < -b_safe:
            break
        reach = idx
    r_d = regions.by_index(reach)
    if r_d.width <= 2.0 * y_thr:
        return reach, 0.5 * (r_d.y_low + r_d.y_high)
    y_d = max(min(y_star, r_d.y_high - y_thr), r_d.y_low + y_thr)
    return reach, y_d


def longitudinal_control(ego: VehicleState, leader: Optional[VehicleState],
                         follower: Optional[VehicleState], p: IdmParams,
                         gamma: float) -> float:
    """Gas/brake command: car-following plus nudging from the vehicle behind.

    The nudging term scales the follower's gap pressure ``(s*/s)^2`` by
    ``a_max * gamma``, so a tailgating vehicle pushes the ego forward.
    """
    if leader is not None:
        a = pair_accel(ego, leader, p)
    else:
        a = free_flow_accel(ego.v_x, ego.v_d, p)
    if follower is not None:
        s = gap_between(follower, ego)
        s_star = desired_gap(follower.v_x, follower.v_x - ego.v_x, p)
        s = max(s, 1e-3)
        a += p.a_max * gamma * (s_star / s) ** 2
    return min(max(a, p.a_severe), p.a_max)


def lateral_control(y: float, v_y: float, y_d: float, k_p: float,
                    k_d: float) -> float:
    """PD steering acceleration toward the desired lateral position."""
    return k_p * (y_d - y) + k_d * (-v_y)


def predict_arrival(y: float, v_y: float, y_d: float, k_p: float, k_d: float,
                    dt: float, y_e: float, horizon_steps: int) -> float:
    """Seconds until the PD-controlled maneuver reaches ``y_d`` within ``y_e``.

    Replays the exact closed-loop dynamics, so for an unobstructed maneuver
    the prediction matches the simulated trajectory step for step. Returns
    ``horizon_steps * dt`` if the tolerance is never met within the horizon.
    """
    if abs(y_d - y) <= y_e:
        return 0.0
    for k in range(1, horizon_steps + 1):
        a = k_p * (y_d - y) + k_d * (-v_y)
        y = y + (v_y * dt + 0.5 * a * dt * dt)
        v_y = v_y + a * dt
        if abs(y_d - y) <= y_e:
            return k * dt
    return horizon_steps * dt


def rectangles_overlap(a: VehicleState, b: VehicleState) -> bool:
    """Axis-aligned footprint overlap test used for collision accounting."""
    return (abs(a.x - b.x) < (a.length + b.length) / 2.0 and
            abs(a.y - b.y) < (a.width + b.width) / 2.0)
