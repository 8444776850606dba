"""Scenario configuration and the discrete-time simulation loop.

Each step runs in two phases: every agent reads the same frozen snapshot
(states and previous-step broadcasts) and computes its update, then packets,
targets and controls are committed together and the dynamics advance. The
loop is deterministic for a fixed configuration and seed.
"""
from __future__ import annotations

import configparser
import csv
import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agent import (AgentTimingState, AgentView, StepContext, Variant,
                    agent_step, next_update_estimate, should_update)
from .env import (IdmParams, RoadConfig, VehicleState, blocked_interval,
                  build_regions, lateral_control, longitudinal_control,
                  predict_arrival, rectangles_overlap, safe_region,
                  step_dynamics)
from .factors import (FactorParams, build_factors, comfort_table,
                      evaluation_bases, form_links)
from .messages import BroadcastPacket
from .metrics import MetricsAccumulator, MetricsReport
from .mobil import MobilParams, build_region_estimates, mobil_decide

TRAJECTORY_HEADER = ("step", "time_s", "vehicle_id", "x_m", "y_m", "vx_mps",
                     "vy_mps", "ax_mps2", "ay_mps2", "vd_mps", "yd_m",
                     "xstar_m", "te_s")


@dataclass(frozen=True)
class EnvParams:
    """Observation, region and control constants of the environment."""

    idm: IdmParams = field(default_factory=IdmParams)
    obs_x: float = 30.0
    y_safe: float = 0.2
    t_y: float = 0.4
    gamma: float = 0.7
    # critically damped pair: a full-range shift settles within about the
    # reassignment window, so arrival-gated updates actually engage
    k_p: float = 1.44
    k_d: float = 2.4


@dataclass(frozen=True)
class TimingParams:
    t_min: float = 4.0
    t_max: float = 6.0
    y_e: float = 0.01


@dataclass(frozen=True)
class VehicleSpec:
    """Initial condition of one fixed-fleet vehicle."""

    id: int
    x: float
    y: float
    v_x: float
    v_d: float
    offset_s: float = 0.0
    length: float = 5.0
    width: float = 2.0


@dataclass(frozen=True)
class InflowSpec:
    """Entry-point demand for the open-highway mode."""

    flow_veh_h: float
    v_lo: float = 25.0
    v_hi: float = 35.0
    poisson: bool = False
    length: float = 5.0
    width: float = 2.0

    def __post_init__(self):
        if self.flow_veh_h < 0:
            raise ValueError("flow must be non-negative")
        if not 0 < self.v_lo <= self.v_hi:
            raise ValueError("need 0 < v_lo <= v_hi")


@dataclass(frozen=True)
class JitterSpec:
    """Seeded perturbation of fleet initial conditions (x, y, v_x)."""

    x: float = 0.0
    y: float = 0.0
    v: float = 0.0


@dataclass
class ScenarioConfig:
    road: RoadConfig
    duration_s: float
    variant: Variant
    seed: int = 0
    dt: float = 0.2
    mode: str = "fleet"
    fleet: List[VehicleSpec] = field(default_factory=list)
    inflow: Optional[InflowSpec] = None
    fg: FactorParams = field(default_factory=FactorParams)
    envp: EnvParams = field(default_factory=EnvParams)
    timing: TimingParams = field(default_factory=TimingParams)
    mobil: MobilParams = field(default_factory=MobilParams)
    jitter: JitterSpec = field(default_factory=JitterSpec)
    force_equal_time_estimates: bool = False

    def validate(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.duration_s < 0:
            raise ValueError("duration must be non-negative")
        if self.mode not in ("fleet", "inflow"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "inflow" and self.inflow is None:
            raise ValueError("inflow mode needs an [inflow] section")
        if self.mode == "fleet":
            ids = [v.id for v in self.fleet]
            if len(ids) != len(set(ids)):
                raise ValueError("duplicate vehicle ids in fleet")
            lo_hi = [self.road.band(v.width) for v in self.fleet]
            for v, (lo, hi) in zip(self.fleet, lo_hi):
                if not lo <= v.y <= hi:
                    raise ValueError(f"vehicle {v.id} starts off the road")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s / self.dt))


def coordination_scenario(variant: Variant = Variant.COND_MAX_SUM,
                          seed: int = 0) -> ScenarioConfig:
    """Six vehicles in three rows of two on a 1 km road.

    The rear row wants to overtake the middle and front rows. Window phase
    offsets stagger the vehicles' reassignment times. Desired speeds and
    initial coordinates are configuration defaults chosen to satisfy the
    rear-faster-than-front layout; edit the config file to change them.
    """
    rows = [
        (1, 0.0, 3.4, 33.0, -1.0),
        (2, 0.0, 6.8, 31.0, -2.0),
        (3, 15.0, 2.0, 29.0, -1.4),
        (4, 15.0, 8.2, 27.0, -2.4),
        (5, 30.0, 5.8, 25.0, 0.0),
        (6, 30.0, 8.6, 24.0, -3.6),
    ]
    fleet = [VehicleSpec(id=i, x=x, y=y, v_x=min(v_d, 25.0), v_d=v_d,
                         offset_s=off) for i, x, y, v_d, off in rows]
    return ScenarioConfig(
        road=RoadConfig(length=1000.0, width=10.2),
        duration_s=40.0, variant=variant, seed=seed, mode="fleet",
        fleet=fleet, jitter=JitterSpec(x=0.5, y=0.05, v=0.1))


def open_highway_scenario(variant: Variant = Variant.COND_MAX_SUM,
                          seed: int = 0, flow_veh_h: float = 10000.0,
                          duration_s: float = 600.0) -> ScenarioConfig:
    """Open 2 km highway with constant inflow and uniform desired speeds."""
    return ScenarioConfig(
        road=RoadConfig(length=2000.0, width=10.2),
        duration_s=duration_s, variant=variant, seed=seed, mode="inflow",
        inflow=InflowSpec(flow_veh_h=flow_veh_h))


class Simulation:
    """Stateful runner for one scenario."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.now = 0
        self.states: Dict[int, VehicleState] = {}
        self.packets: Dict[int, BroadcastPacket] = {}
        self.committed: Dict[int, float] = {}
        self.assignment: Dict[int, float] = {}
        self.timing: Dict[int, AgentTimingState] = {}
        self.ctx = StepContext(
            domain=cfg.fg.make_domain(), dt=cfg.dt, t_e_const=cfg.fg.t_e,
            y_e=cfg.timing.y_e, k_p=cfg.envp.k_p, k_d=cfg.envp.k_d,
            b_safe=cfg.envp.idm.b_safe,
            horizon_steps=max(int(round(cfg.timing.t_max / cfg.dt)), 1))
        self._comfort = comfort_table(self.ctx.domain, cfg.fg)
        self._overlap_memo: dict = {}
        self.acc = MetricsAccumulator(cfg.dt,
                                      domain_size=cfg.fg.domain_size)
        self._next_id = 1
        self._pending: List[float] = []  # queued desired speeds
        self._next_entry_time = 0.0
        self.rows: List[tuple] = []
        self._record = False
        self._residence_steps: Dict[int, int] = {}
        if cfg.mode == "fleet":
            self._init_fleet()

    # -- setup -----------------------------------------------------------

    def _init_fleet(self):
        cfg = self.cfg
        j = cfg.jitter
        for spec in cfg.fleet:
            dx = self.rng.uniform(-j.x, j.x) if j.x else 0.0
            dy = self.rng.uniform(-j.y, j.y) if j.y else 0.0
            dv = self.rng.uniform(-j.v, j.v) if j.v else 0.0
            lo, hi = cfg.road.band(spec.width)
            y0 = min(max(spec.y + dy, lo), hi)
            s = VehicleState(id=spec.id, x=spec.x + dx, y=y0,
                             v_x=max(spec.v_x + dv, 0.0), v_y=0.0,
                             length=spec.length, width=spec.width,
                             v_d=spec.v_d, y_d=y0)
            self._admit(s, offset_s=spec.offset_s)

    def _admit(self, s: VehicleState, offset_s: float = 0.0):
        self.states[s.id] = s
        self.committed[s.id] = s.y
        self.assignment[s.id] = 0.0
        self.timing[s.id] = AgentTimingState(
            last_update_step=self.now + int(round(offset_s / self.cfg.dt)),
            t_min=self.cfg.timing.t_min, t_max=self.cfg.timing.t_max)
        self.packets[s.id] = BroadcastPacket(
            s.id, self.now - 1, {}, 0.0, 0.0)
        self._residence_steps[s.id] = 0

    def _drop(self, vid: int):
        for d in (self.states, self.packets, self.committed, self.assignment,
                  self.timing):
            d.pop(vid, None)
        self._overlap_memo = {k: v for k, v in self._overlap_memo.items()
                              if vid not in k}

    # -- per-step machinery ----------------------------------------------

    def _neighbor_table(self, ids):
        xs = np.array([self.states[i].x for i in ids])
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ids_sorted = [ids[k] for k in order]
        obs = self.cfg.envp.obs_x
        table = {}
        for pos, i in enumerate(ids_sorted):
            x_i = xs_sorted[pos]
            lo = int(np.searchsorted(xs_sorted, x_i - obs, side="left"))
            hi = int(np.searchsorted(xs_sorted, x_i + obs, side="right"))
            table[i] = [ids_sorted[k] for k in range(lo, hi)
                        if ids_sorted[k] != i]
        return table

    def _split_sides(self, ego: VehicleState, neigh_ids):
        down, up = [], []
        for k in neigh_ids:
            s = self.states[k]
            if (s.x, s.id) > (ego.x, ego.id):
                down.append(s)
            else:
                up.append(s)
        return down, up

    def step(self):
        cfg = self.cfg
        now = self.now
        ids = sorted(self.states)
        envp = cfg.envp
        staged: Dict[int, tuple] = {}
        new_packets: Dict[int, BroadcastPacket] = {}
        n_links = 0
        self.last_links = []
        self.last_agent_count = len(ids)

        if ids:
            neighbors = self._neighbor_table(ids)
            factors_by_agent = None
            if cfg.variant.is_dcop:
                links = form_links(self.states, neighbors, envp.obs_x,
                                   cfg.fg, envp.idm)
                self.last_links = links
                n_links = len(links)
                bases = evaluation_bases(self.states, self.committed)
                factors_by_agent = build_factors(
                    ids, links, self.states, bases, cfg.road, self.ctx.domain,
                    cfg.fg, comfort_tab=self._comfort,
                    overlap_memo=self._overlap_memo)

            for i in ids:
                ego = self.states[i]
                down, up = self._split_sides(ego, neighbors[i])
                regions = build_regions(ego, down, up, envp.obs_x,
                                        envp.y_safe, envp.t_y, cfg.road,
                                        envp.idm)
                if cfg.variant.is_dcop:
                    view = AgentView(ego, factors_by_agent[i], regions,
                                     self.committed[i], self.assignment[i],
                                     cfg.road)
                    res = agent_step(i, self.packets, view, cfg.variant,
                                     self.timing[i], now, self.ctx)
                    if cfg.force_equal_time_estimates:
                        res.packet.time_estimate = 0.0
                    new_packets[i] = res.packet
                    committed_i = res.committed_target
                    y_ctl = res.control_target
                    timing_i = res.timing
                    assignment_i = res.packet.assignment
                    te_i = res.packet.time_estimate
                else:
                    timing_i = self.timing[i]
                    committed_i = self.committed[i]
                    assignment_i = 0.0
                    if should_update(timing_i, now, cfg.dt, ego.y, ego.y_d,
                                     cfg.timing.y_e):
                        est = build_region_estimates(ego, regions,
                                                     self.states, envp.idm)
                        dec = mobil_decide(ego, regions, est, cfg.mobil,
                                           cfg.road.y_thr)
                        if dec is not None:
                            committed_i = dec[1]
                        timing_i = replace(timing_i, last_update_step=now)
                    _, y_ctl = safe_region(regions, committed_i,
                                           envp.idm.b_safe, cfg.road.y_thr)
                    arrival = predict_arrival(ego.y, ego.v_y, y_ctl,
                                              envp.k_p, envp.k_d, cfg.dt,
                                              cfg.timing.y_e,
                                              self.ctx.horizon_steps)
                    te_i = next_update_estimate(timing_i, now, cfg.dt,
                                                arrival)
                cur = regions.current
                leader = self.states.get(cur.leader_id)
                follower = self.states.get(cur.follower_id)
                a_x = longitudinal_control(ego, leader, follower, envp.idm,
                                           envp.gamma)
                a_y = lateral_control(ego.y, ego.v_y, y_ctl, envp.k_p,
                                      envp.k_d)
                staged[i] = (committed_i, y_ctl, a_x, a_y, timing_i,
                             assignment_i, te_i)

        # commit phase
        if cfg.variant.is_dcop:
            self.packets = new_packets
        obs_rows = []
        for i in ids:
            committed_i, y_ctl, a_x, a_y, timing_i, assignment_i, te_i = \
                staged[i]
            self.committed[i] = committed_i
            self.timing[i] = timing_i
            self.assignment[i] = assignment_i
            s = step_dynamics(replace(self.states[i], y_d=y_ctl), a_x, a_y,
                              cfg.dt)
            lo, hi = cfg.road.band(s.width)
            if s.y < lo - 1e-9 or s.y > hi + 1e-9:
                self.acc.bound_breaches += 1
                s = replace(s, y=min(max(s.y, lo), hi), v_y=0.0)
            self.states[i] = s
            self._residence_steps[i] += 1
            obs_rows.append((i, s.v_x, s.v_d, s.a_y))
            if self._record:
                self.rows.append((now, (now + 1) * cfg.dt, i, s.x, s.y,
                                  s.v_x, s.v_y, s.a_x, s.a_y, s.v_d, s.y_d,
                                  assignment_i, te_i))

        self.acc.collisions += self._count_collisions(ids)
        self.last_link_count = n_links
        self.acc.observe_step(
            now, obs_rows,
            n_links=n_links if cfg.variant.is_dcop else None)

        for i in list(ids):
            s = self.states[i]
            if s.x - s.length / 2.0 >= cfg.road.length:
                self._drop(i)
        if cfg.mode == "inflow":
            self._spawn_inflow()
        self.now += 1

    def _count_collisions(self, ids) -> int:
        if len(ids) < 2:
            return 0
        states = [self.states[i] for i in ids]
        states.sort(key=lambda s: (s.x, s.id))
        count = 0
        for a_idx, a in enumerate(states):
            for b in states[a_idx + 1:]:
                if b.x - a.x >= (a.length + b.length) / 2.0:
                    break
                if rectangles_overlap(a, b):
                    count += 1
        return count

    def _spawn_inflow(self):
        cfg = self.cfg
        spec = cfg.inflow
        if spec.flow_veh_h <= 0:
            return
        t_now = self.now * cfg.dt
        headway = 3600.0 / spec.flow_veh_h
        while self._next_entry_time <= t_now + 1e-9:
            self._pending.append(
                float(self.rng.uniform(spec.v_lo, spec.v_hi)))
            if spec.poisson:
                self._next_entry_time += float(
                    self.rng.exponential(headway))
            else:
                self._next_entry_time += headway
        if not self._pending:
            return
        entry = self._entry_slot(spec)
        if entry is None:
            return  # blocked; demand stays queued
        y0, v_cap = entry
        v_d = self._pending.pop(0)
        s = VehicleState(id=self._next_id, x=0.0, y=y0,
                         v_x=max(min(v_d, v_cap), 0.0), v_y=0.0,
                         length=spec.length, width=spec.width, v_d=v_d,
                         y_d=y0)
        self._next_id += 1
        self._admit(s)

    def _entry_slot(self, spec: InflowSpec) -> Optional[Tuple[float, float]]:
        """Widest unblocked lateral interval at the entry point.

        Returns its center and a speed cap from the nearest leader in that
        interval, or None when every interval is blocked.
        """
        cfg = self.cfg
        lo_band, hi_band = cfg.road.band(spec.width)
        near = [s for s in self.states.values() if s.x <= cfg.envp.obs_x]
        cuts = {lo_band, hi_band}
        blocked = []
        for k in near:
            lo, hi = blocked_interval(k, spec.width, cfg.envp.y_safe,
                                      cfg.envp.t_y)
            lo, hi = max(lo, lo_band), min(hi, hi_band)
            if lo < hi:
                blocked.append((lo, hi))
                cuts.update((lo, hi))
        edges = sorted(cuts)
        best = None
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo <= 1e-9:
                continue
            mid = 0.5 * (lo + hi)
            if any(b_lo <= mid <= b_hi for b_lo, b_hi in blocked):
                continue
            if best is None or hi - lo > best[1] - best[0]:
                best = (lo, hi)
        if best is None:
            return None
        y0 = 0.5 * (best[0] + best[1])
        half_w = spec.width / 2.0
        idm = cfg.envp.idm
        v_cap = float("inf")
        ahead = [s for s in self.states.values()
                 if abs(s.y - y0) < (s.width + spec.width) / 2.0 + cfg.envp.y_safe]
        if ahead:
            lead = min(ahead, key=lambda s: s.x)
            gap = lead.x - lead.length / 2.0 - spec.length / 2.0
            if gap <= idm.s0 + 0.5:
                return None
            v_cap = max((gap - idm.s0) / idm.t_x, 0.0)
        return y0, v_cap

    # -- driving ----------------------------------------------------------

    def run(self, record: bool = False, on_step=None
            ) -> Tuple[List[tuple], MetricsReport]:
        self._record = record
        for _ in range(self.cfg.n_steps):
            self.step()
            if on_step is not None:
                on_step(self)
        return self.rows, self.acc.finalize()


def run_scenario(cfg: ScenarioConfig, record: bool = True, on_step=None
                 ) -> Tuple[List[tuple], MetricsReport]:
    """Run one scenario to completion; deterministic for a fixed seed."""
    return Simulation(cfg).run(record=record, on_step=on_step)


# -- trajectory/metrics files ---------------------------------------------

def write_trajectories(path, rows: Sequence[tuple]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        w.writerows(rows)


def read_trajectories(path) -> List[tuple]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(header) != TRAJECTORY_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
        return [tuple(int(float(v)) if k in (0, 2) else float(v)
                      for k, v in enumerate(row)) for row in r]


def write_metrics(path, report: MetricsReport):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


# -- config files ----------------------------------------------------------

def save_config(cfg: ScenarioConfig, path):
    p = configparser.ConfigParser()
    p["scenario"] = {
        "mode": cfg.mode, "variant": cfg.variant.value,
        "duration_s": repr(cfg.duration_s), "dt": repr(cfg.dt),
        "seed": str(cfg.seed),
        "force_equal_time_estimates": str(cfg.force_equal_time_estimates),
    }
    p["road"] = {"length_m": repr(cfg.road.length),
                 "width_m": repr(cfg.road.width),
                 "y_thr": repr(cfg.road.y_thr)}
    p["fg"] = {k: repr(getattr(cfg.fg, k)) for k in
               ("r_c", "c_c", "b_c", "y_range", "c_range", "y_safe",
                "n_front_max", "n_back_max", "t_e", "domain_size")}
    p["env"] = {k: repr(getattr(cfg.envp, k)) for k in
                ("obs_x", "y_safe", "t_y", "gamma", "k_p", "k_d")}
    p["idm"] = {k: repr(getattr(cfg.envp.idm, k)) for k in
                ("a_max", "b_safe", "a_severe", "t_x", "s0", "delta")}
    p["timing"] = {k: repr(getattr(cfg.timing, k)) for k in
                   ("t_min", "t_max", "y_e")}
    p["mobil"] = {k: repr(getattr(cfg.mobil, k)) for k in
                  ("politeness", "a_thr", "b_safe", "search_range")}
    p["jitter"] = {k: repr(getattr(cfg.jitter, k)) for k in ("x", "y", "v")}
    if cfg.inflow is not None:
        p["inflow"] = {"flow_veh_h": repr(cfg.inflow.flow_veh_h),
                       "v_lo": repr(cfg.inflow.v_lo),
                       "v_hi": repr(cfg.inflow.v_hi),
                       "poisson": str(cfg.inflow.poisson),
                       "length": repr(cfg.inflow.length),
                       "width": repr(cfg.inflow.width)}
    for v in cfg.fleet:
        p[f"vehicle.{v.id}"] = {
            "x": repr(v.x), "y": repr(v.y), "v_x": repr(v.v_x),
            "v_d": repr(v.v_d), "offset_s": repr(v.offset_s),
            "length": repr(v.length), "width": repr(v.width)}
    with open(path, "w") as fh:
        p.write(fh)


def load_config(path) -> ScenarioConfig:
    p = configparser.ConfigParser()
    read = p.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        sc = p["scenario"]
        road = RoadConfig(length=p.getfloat("road", "length_m"),
                          width=p.getfloat("road", "width_m"),
                          y_thr=p.getfloat("road", "y_thr", fallback=0.1))
    except (KeyError, configparser.NoSectionError) as exc:
        raise ValueError(f"{path}: missing section {exc}") from exc

    def section(name, cls, **extra):
        if not p.has_section(name):
            return cls(**extra)
        kwargs = dict(extra)
        for k in p[name]:
            raw = p[name][k]
            if raw.lower() in ("true", "false"):
                kwargs[k] = raw.lower() == "true"
            elif k in ("n_front_max", "n_back_max", "domain_size"):
                kwargs[k] = int(float(raw))
            else:
                kwargs[k] = float(raw)
        return cls(**kwargs)

    idm = section("idm", IdmParams)
    envp = section("env", EnvParams, idm=idm)
    fleet = []
    for name in p.sections():
        if not name.startswith("vehicle."):
            continue
        vid = int(name.split(".", 1)[1])
        v = p[name]
        fleet.append(VehicleSpec(
            id=vid, x=v.getfloat("x"), y=v.getfloat("y"),
            v_x=v.getfloat("v_x"), v_d=v.getfloat("v_d"),
            offset_s=v.getfloat("offset_s", 0.0),
            length=v.getfloat("length", 5.0), width=v.getfloat("width", 2.0)))
    fleet.sort(key=lambda v: v.id)
    inflow = None
    if p.has_section("inflow"):
        inflow = InflowSpec(
            flow_veh_h=p.getfloat("inflow", "flow_veh_h"),
            v_lo=p.getfloat("inflow", "v_lo", fallback=25.0),
            v_hi=p.getfloat("inflow", "v_hi", fallback=35.0),
            poisson=p.getboolean("inflow", "poisson", fallback=False),
            length=p.getfloat("inflow", "length", fallback=5.0),
            width=p.getfloat("inflow", "width", fallback=2.0))
    cfg = ScenarioConfig(
        road=road,
        duration_s=sc.getfloat("duration_s"),
        variant=Variant(sc.get("variant", "cond-max-sum")),
        seed=sc.getint("seed", 0),
        dt=sc.getfloat("dt", 0.2),
        mode=sc.get("mode", "fleet"),
        fleet=fleet,
        inflow=inflow,
        fg=section("fg", FactorParams),
        envp=envp,
        timing=section("timing", TimingParams),
        mobil=section("mobil", MobilParams),
        jitter=section("jitter", JitterSpec),
        force_equal_time_estimates=sc.getboolean(
            "force_equal_time_estimates", False))
    cfg.validate()
    return cfg
