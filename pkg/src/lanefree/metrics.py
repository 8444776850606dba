"""Metric collection and statistics for simulation runs.

Speed, speed-deviation, lateral jerk, total time spent, interval means,
the jerk histogram, and factor-graph size accounting, plus the two-sample
z-test used to compare variants interval by interval.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

# 13 bins, zero-centered central bin, open-ended tails (m/s^3)
DEFAULT_JERK_EDGES: Tuple[float, ...] = (
    -math.inf, -2.75, -2.25, -1.75, -1.25, -0.75, -0.25,
    0.25, 0.75, 1.25, 1.75, 2.25, 2.75, math.inf)
BYTES_PER_VALUE = 8


@dataclass
class GraphStats:
    """Factor-graph size averages and the derived broadcast footprint."""

    mean_single: float
    mean_pairwise: float
    c_p: float
    i_b_bytes: float


def connections_per_agent(mean_single: float, mean_pairwise: float) -> float:
    """Average pairwise connections per agent (each link joins two agents)."""
    if mean_single <= 0:
        return 0.0
    return 2.0 * mean_pairwise / mean_single


def broadcast_bytes(c_p: float, domain_size: int,
                    bytes_per_value: int = BYTES_PER_VALUE) -> float:
    """Per-agent broadcast size: one q vector per connection plus the two
    always-shared scalars (assignment and time estimate)."""
    return (c_p * domain_size + 2.0) * bytes_per_value


@dataclass
class MetricsReport:
    v_avg: float
    v_dev_avg: float
    jerk_y_avg: float
    tts_h: float
    interval_v_avg: List[float]
    jerk_hist_edges: List[float]
    jerk_hist_pct: List[float]
    collisions: int
    bound_breaches: int
    graph: Optional[GraphStats]
    n_steps: int
    dt: float
    speed_samples: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["jerk_hist_edges"] = [
            None if not math.isfinite(e) else e for e in d["jerk_hist_edges"]]
        return d


class MetricsAccumulator:
    """Streaming metric computation over per-step vehicle observations.

    Observations must arrive step-major with vehicles in a fixed order, so
    replaying a trajectory log reproduces the live accumulation exactly.
    """

    def __init__(self, dt: float, interval_s: float = 300.0,
                 jerk_edges: Sequence[float] = DEFAULT_JERK_EDGES,
                 domain_size: int = 15,
                 bytes_per_value: int = BYTES_PER_VALUE):
        self.dt = dt
        self.interval_steps = max(int(round(interval_s / dt)), 1)
        self.jerk_edges = tuple(jerk_edges)
        self._inner_edges = np.asarray(self.jerk_edges[1:-1])
        self.domain_size = domain_size
        self.bytes_per_value = bytes_per_value
        self.n_steps = 0
        self._v_sum = 0.0
        self._dev_sum = 0.0
        self._n_obs = 0
        self._jerk_sum = 0.0
        self._n_jerk = 0
        self._jerk_counts = np.zeros(len(self.jerk_edges) - 1, dtype=np.int64)
        self._prev_ay: Dict[int, float] = {}
        self._interval: Dict[int, Tuple[float, int]] = {}
        self._step_count_sum = 0
        self._single_sum = 0.0
        self._pair_sum = 0.0
        self._graph_steps = 0
        self.collisions = 0
        self.bound_breaches = 0
        self.speed_samples: List[float] = []

    def observe_step(self, step: int,
                     rows: Sequence[Tuple[int, float, float, float]],
                     n_links: Optional[int] = None):
        """Record one step; ``rows`` are (vehicle_id, v_x, v_d, a_y)."""
        self.n_steps += 1
        self._step_count_sum += len(rows)
        ibin = step // self.interval_steps
        v_step = 0.0
        seen = set()
        for vid, v_x, v_d, a_y in rows:
            self._v_sum += v_x
            self._dev_sum += abs(v_x - v_d)
            self._n_obs += 1
            v_step += v_x
            prev = self._prev_ay.get(vid)
            if prev is not None:
                jerk = (a_y - prev) / self.dt
                self._jerk_sum += abs(jerk)
                self._n_jerk += 1
                self._jerk_counts[
                    np.searchsorted(self._inner_edges, jerk, side="right")] += 1
            self._prev_ay[vid] = a_y
            seen.add(vid)
        for vid in [v for v in self._prev_ay if v not in seen]:
            del self._prev_ay[vid]
        if rows:
            s, c = self._interval.get(ibin, (0.0, 0))
            self._interval[ibin] = (s + v_step, c + len(rows))
            self.speed_samples.append(v_step / len(rows))
        if n_links is not None:
            self._single_sum += len(rows)
            self._pair_sum += n_links
            self._graph_steps += 1

    def finalize(self) -> MetricsReport:
        interval = []
        if self._interval:
            for b in range(max(self._interval) + 1):
                s, c = self._interval.get(b, (0.0, 0))
                interval.append(s / c if c else 0.0)
        total_jerk = int(self._jerk_counts.sum())
        pct = (100.0 * self._jerk_counts / total_jerk if total_jerk
               else np.zeros_like(self._jerk_counts, dtype=float))
        graph = None
        if self._graph_steps:
            mean_s = self._single_sum / self._graph_steps
            mean_p = self._pair_sum / self._graph_steps
            c_p = connections_per_agent(mean_s, mean_p)
            graph = GraphStats(mean_s, mean_p, c_p,
                               broadcast_bytes(c_p, self.domain_size,
                                               self.bytes_per_value))
        return MetricsReport(
            v_avg=self._v_sum / self._n_obs if self._n_obs else 0.0,
            v_dev_avg=self._dev_sum / self._n_obs if self._n_obs else 0.0,
            jerk_y_avg=self._jerk_sum / self._n_jerk if self._n_jerk else 0.0,
            tts_h=self._step_count_sum * self.dt / 3600.0,
            interval_v_avg=interval,
            jerk_hist_edges=list(self.jerk_edges),
            jerk_hist_pct=[float(p) for p in pct],
            collisions=self.collisions,
            bound_breaches=self.bound_breaches,
            graph=graph,
            n_steps=self.n_steps,
            dt=self.dt,
            speed_samples=self.speed_samples,
        )


def collect_metrics(log: Sequence[tuple], dt: float,
                    graph_series: Optional[Sequence[Tuple[int, int]]] = None,
                    collisions: int = 0, bound_breaches: int = 0,
                    **acc_opts) -> MetricsReport:
    """Recompute a MetricsReport from trajectory rows.

    ``log`` rows follow the trajectory CSV column order. Graph statistics
    cannot be reconstructed from trajectories alone; pass the engine's
    per-step ``(n_agents, n_links)`` series to include them.
    """
    acc = MetricsAccumulator(dt, **acc_opts)
    by_step: Dict[int, list] = {}
    for row in log:
        by_step.setdefault(int(row[0]), []).append(
            (int(row[2]), float(row[5]), float(row[9]), float(row[8])))
    graph_by_step = dict(enumerate(graph_series)) if graph_series else {}
    for step in sorted(by_step):
        links = graph_by_step.get(step, (None, None))[1]
        acc.observe_step(step, by_step[step], n_links=links)
    acc.collisions = collisions
    acc.bound_breaches = bound_breaches
    return acc.finalize()


@dataclass
class ZTestResult:
    z: float
    significant: bool
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int
    ci_a: Tuple[float, float]
    ci_b: Tuple[float, float]
    z_crit: float = 1.96


def two_sample_ztest(samples_a: Sequence[float], samples_b: Sequence[float],
                     z_crit: float = 1.96) -> ZTestResult:
    """Two-sided two-sample z-test on the difference of means.

    Identical samples give z = 0; significance is |z| > ``z_crit``
    (1.96 for alpha = 0.05). Confidence intervals use the same critical
    value on each sample's standard error.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("need at least two samples per side")
    mean_a, mean_b = float(a.mean()), float(b.mean())
    se2 = a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b)
    diff = mean_a - mean_b
    if diff == 0.0:
        z = 0.0
    elif se2 == 0.0:
        z = math.inf if diff > 0 else -math.inf
    else:
        z = diff / math.sqrt(se2)
    half_a = z_crit * math.sqrt(a.var(ddof=1) / len(a))
    half_b = z_crit * math.sqrt(b.var(ddof=1) / len(b))
    return ZTestResult(
        z=float(z), significant=abs(z) > z_crit,
        mean_a=mean_a, mean_b=mean_b, n_a=len(a), n_b=len(b),
        ci_a=(mean_a - half_a, mean_a + half_a),
        ci_b=(mean_b - half_b, mean_b + half_b),
        z_crit=z_crit)
