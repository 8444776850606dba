"""Communication-free baseline: lateral-region MOBIL.

The classic lane-change rule carried over to lane-free traffic: candidate
lateral regions replace adjacent lanes, and the incentive test weighs the
ego's acceleration benefit against the impact on the followers at the
origin and destination regions, scaled by a politeness coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

from .env import (IdmParams, LateralRegionSet, VehicleState, free_flow_accel,
                  pair_accel)


@dataclass(frozen=True)
class MobilParams:
    politeness: float = 0.5
    a_thr: float = 0.8
    b_safe: float = 2.0
    search_range: float = 3.5

    def __post_init__(self):
        if not 0.0 <= self.politeness <= 1.0:
            raise ValueError("politeness must be in [0, 1]")
        if self.a_thr < 0:
            raise ValueError("a_thr must be non-negative")


@dataclass(frozen=True)
class RegionEstimate:
    """Acceleration estimates attached to one candidate region.

    ``a_up_with_ego``/``a_up_without_ego`` describe the follower in that
    region for the two outcomes of the ego's shift decision; both are zero
    when the region has no follower.
    """

    a_ego: float
    a_up_with_ego: float = 0.0
    a_up_without_ego: float = 0.0


def build_region_estimates(ego: VehicleState, regions: LateralRegionSet,
                           states: Mapping[int, VehicleState],
                           idm: IdmParams) -> Dict[int, RegionEstimate]:
    """Per-region estimates for the incentive test.

    The follower's no-ego acceleration comes from the next downstream
    claimant of the same lateral span (free flow if the span is empty).
    """
    out: Dict[int, RegionEstimate] = {}
    for r in regions.regions:
        if r.follower_id is None:
            out[r.index] = RegionEstimate(r.a_down)
            continue
        u = states[r.follower_id]
        if r.leader_id is not None:
            without = pair_accel(u, states[r.leader_id], idm)
        else:
            without = free_flow_accel(u.v_x, u.v_d, idm)
        out[r.index] = RegionEstimate(r.a_down, r.a_up, without)
    return out


def _path_safe(regions: LateralRegionSet, target: int, b_safe: float) -> bool:
    step = 1 if target > 0 else -1
    for idx in range(step, target + step, step):
        r = regions.by_index(idx)
        if r.a_down < -b_safe or r.a_up < -b_safe:
            return False
    return True


def mobil_decide(ego: VehicleState, regions: LateralRegionSet,
                 estimates: Mapping[int, RegionEstimate],
                 params: MobilParams, y_thr: float
                 ) -> Optional[Tuple[int, float]]:
    """Pick the best lateral region worth shifting to, or None to stay.

    A candidate must beat the politeness-weighted upstream impact by more
    than ``a_thr`` and have a safely traversable path; among qualifiers the
    highest own benefit wins, nearer regions first on ties.
    """
    base = estimates[0]
    best: Optional[Tuple[float, int]] = None
    for idx in sorted(estimates, key=lambda i: (abs(i), i)):
        if idx == 0:
            continue
        r = regions.by_index(idx)
        dist = max(r.y_low - ego.y, ego.y - r.y_high, 0.0)
        if dist > params.search_range:
            continue
        est = estimates[idx]
        benefit = est.a_ego - base.a_ego
        impact = ((est.a_up_without_ego - est.a_up_with_ego) +
                  (base.a_up_with_ego - base.a_up_without_ego))
        if not benefit > params.politeness * impact + params.a_thr:
            continue
        if not _path_safe(regions, idx, params.b_safe):
            continue
        if best is None or benefit > best[0]:
            best = (benefit, idx)
    if best is None:
        return None
    r = regions.by_index(best[1])
    y_d = max(min(ego.y, r.y_high - y_thr), r.y_low + y_thr)
    return best[1], y_d
