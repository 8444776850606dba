"""Factor-graph data model and message update rules.

Messages are plain 1-D float arrays indexed by the shared decision domain
(one utility value per candidate lateral deviation). Three r-update rules are
provided: the standard max over all connected variables, the conditional rule
that maximizes only over near-synchronous neighbors and fixes the rest at
their broadcast assignments, and the fully-fixed rule that never maximizes.

All functions are pure; there is no shared mutable state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np


class CorruptMessageError(ValueError):
    """A message vector contains NaN or infinite utilities."""


class StaleBroadcastError(KeyError):
    """A required broadcast (time estimate or assignment) is missing."""


class InconsistentBroadcastError(ValueError):
    """A broadcast assignment lies outside the decision domain."""


@dataclass(frozen=True)
class DecisionDomain:
    """Ordered grid of candidate lateral deviations, symmetric about 0."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or len(vals) < 2:
            raise ValueError("domain needs at least two 1-D values")
        if not np.all(np.diff(vals) > 0):
            raise ValueError("domain values must be strictly increasing")
        if abs(vals[0] + vals[-1]) > 1e-9:
            raise ValueError("domain must be symmetric about 0")

    @classmethod
    def from_range(cls, y_range: float = 3.5, size: int = 15) -> "DecisionDomain":
        return cls(np.linspace(-y_range, y_range, size))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def span(self) -> float:
        return float(self.values[-1])

    def snap_index(self, x: float) -> int:
        """Index of the nearest grid point; rejects values beyond the span."""
        if not np.isfinite(x):
            raise InconsistentBroadcastError(f"non-finite assignment {x!r}")
        if abs(x) > self.span + 1e-9:
            raise InconsistentBroadcastError(
                f"assignment {x} outside [{-self.span}, {self.span}]")
        return int(np.argmin(np.abs(self.values - x)))


@dataclass
class FactorNode:
    """A utility factor binding one or more agent variables.

    ``evaluator`` maps a joint assignment (one domain value per variable, in
    ``variable_ids`` order) to a utility. A precomputed ``table`` may be given
    instead; the message rules always work on tables, built on demand.
    """

    id: str
    variable_ids: Tuple[int, ...]
    evaluator: Optional[Callable[..., float]] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        self.variable_ids = tuple(self.variable_ids)
        if len(set(self.variable_ids)) != len(self.variable_ids):
            raise ValueError(f"factor {self.id}: duplicate variable ids")
        if not self.variable_ids:
            raise ValueError(f"factor {self.id}: needs at least one variable")
        if self.evaluator is None and self.table is None:
            raise ValueError(f"factor {self.id}: needs an evaluator or a table")

    @property
    def arity(self) -> int:
        return len(self.variable_ids)

    @property
    def kind(self) -> str:
        return {1: "single", 2: "pairwise"}.get(self.arity, "generic")

    def utility_table(self, domain: DecisionDomain) -> np.ndarray:
        """Utility tensor over the joint grid, one axis per variable."""
        if self.table is not None:
            return self.table
        n = len(domain)
        shape = (n,) * self.arity
        out = np.empty(shape)
        for idx in np.ndindex(shape):
            out[idx] = self.evaluator(*(domain.values[i] for i in idx))
        self.table = out
        return out


@dataclass
class BroadcastPacket:
    """One agent's per-step publication: q messages, assignment, time estimate."""

    agent_id: int
    step: int
    q_messages: Dict[str, np.ndarray] = field(default_factory=dict)
    assignment: float = 0.0
    time_estimate: float = 0.0

    def validate(self, tol: float = 1e-9):
        if self.time_estimate < 0:
            raise ValueError(f"agent {self.agent_id}: negative time estimate")
        for fid, q in self.q_messages.items():
            if abs(float(np.sum(q))) > tol:
                raise ValueError(
                    f"agent {self.agent_id}: q for {fid} not normalized")


@dataclass(frozen=True)
class PartitionResult:
    """Split of a factor's other variables into maximized and clamped sets."""

    maximize_set: frozenset
    clamp_set: frozenset

    def __post_init__(self):
        if self.maximize_set & self.clamp_set:
            raise ValueError("maximize and clamp sets overlap")


def normalize(m: np.ndarray) -> np.ndarray:
    """Shift ``m`` by the unique constant that makes it sum to zero.

    Computed as ``(n*m - sum(m)) / n`` so that adding a constant to every
    entry of ``m`` cancels exactly (entry-wise, the shifted numerator is
    unchanged), not just to rounding error.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise CorruptMessageError("message has non-finite entries")
    n = len(m)
    return (n * m - np.sum(m)) / n


def partition_variables(factor: FactorNode, target: int,
                        estimates: Mapping[int, float],
                        t_e_const: float) -> PartitionResult:
    """Decide, per connected variable, whether to maximize or clamp.

    A neighbor ``k`` is maximized iff ``t_k_e - t_target_e <= t_e_const``,
    i.e. its next reassignment is near-synchronous with the target's.
    """
    try:
        own = estimates[target]
    except KeyError:
        raise StaleBroadcastError(f"no time estimate for target {target}")
    maximize, clamp = set(), set()
    for k in factor.variable_ids:
        if k == target:
            continue
        try:
            t_k = estimates[k]
        except KeyError:
            raise StaleBroadcastError(f"no time estimate for neighbor {k}")
        if t_k - own <= t_e_const:
            maximize.add(k)
        else:
            clamp.add(k)
    return PartitionResult(frozenset(maximize), frozenset(clamp))


def _q_for(incoming_q: Mapping[int, np.ndarray], k: int,
           n: int) -> Optional[np.ndarray]:
    # Missing q from a newly connected neighbor is treated as the zero vector.
    q = incoming_q.get(k)
    if q is None:
        return None
    q = np.asarray(q, dtype=float)
    if len(q) != n:
        raise ValueError(f"q from {k} has wrong length {len(q)} != {n}")
    return q


def compute_r_standard(factor: FactorNode, target: int,
                       incoming_q: Mapping[int, np.ndarray],
                       domain: DecisionDomain) -> np.ndarray:
    """r message to ``target``: max over all other variables of F + sum(q)."""
    if target not in factor.variable_ids:
        raise ValueError(f"{target} not connected to factor {factor.id}")
    table = factor.utility_table(domain)
    n = len(domain)
    t_ax = factor.variable_ids.index(target)
    acc = table
    for ax, k in enumerate(factor.variable_ids):
        if k == target:
            continue
        q = _q_for(incoming_q, k, n)
        if q is not None:
            shape = [1] * factor.arity
            shape[ax] = n
            acc = acc + q.reshape(shape)
    if factor.arity == 1:
        return np.array(acc, dtype=float, copy=True)
    other_axes = tuple(ax for ax in range(factor.arity) if ax != t_ax)
    return acc.max(axis=other_axes)


def compute_r_conditional(factor: FactorNode, target: int,
                          incoming_q: Mapping[int, np.ndarray],
                          partition: PartitionResult,
                          clamped_assignments: Mapping[int, float],
                          domain: DecisionDomain) -> np.ndarray:
    """r message maximizing only over ``partition.maximize_set``.

    Variables in the clamp set are fixed at their broadcast assignments
    (snapped to the grid) both inside the factor and in the q terms. With an
    empty clamp set this is exactly the standard update.
    """
    others = frozenset(factor.variable_ids) - {target}
    if partition.maximize_set | partition.clamp_set != others:
        raise ValueError(f"partition does not cover factor {factor.id}")
    if not partition.clamp_set:
        return compute_r_standard(factor, target, incoming_q, domain)

    n = len(domain)
    table = factor.utility_table(domain)
    indexer = [slice(None)] * factor.arity
    const = 0.0
    for ax, k in enumerate(factor.variable_ids):
        if k in partition.clamp_set:
            if k not in clamped_assignments:
                raise StaleBroadcastError(f"no broadcast assignment for {k}")
            j = domain.snap_index(clamped_assignments[k])
            indexer[ax] = j
            q = _q_for(incoming_q, k, n)
            if q is not None:
                const += q[j]
    sub = table[tuple(indexer)]
    remaining = [k for k in factor.variable_ids
                 if k == target or k in partition.maximize_set]
    t_ax = remaining.index(target)
    for ax, k in enumerate(remaining):
        if k == target:
            continue
        q = _q_for(incoming_q, k, n)
        if q is not None:
            shape = [1] * len(remaining)
            shape[ax] = n
            sub = sub + q.reshape(shape)
    if len(remaining) > 1:
        other_axes = tuple(ax for ax in range(len(remaining)) if ax != t_ax)
        sub = sub.max(axis=other_axes)
    return sub + const


def compute_r_fixed(factor: FactorNode, target: int,
                    incoming_q: Mapping[int, np.ndarray],
                    clamped_assignments: Mapping[int, float],
                    domain: DecisionDomain) -> np.ndarray:
    """r message with every neighbor clamped at its broadcast assignment."""
    others = frozenset(factor.variable_ids) - {target}
    partition = PartitionResult(frozenset(), others)
    return compute_r_conditional(factor, target, incoming_q, partition,
                                 clamped_assignments, domain)


def compute_q(to_factor: str, incoming_r: Mapping[str, np.ndarray]) -> np.ndarray:
    """Normalized sum of r messages from all factors except ``to_factor``."""
    if to_factor not in incoming_r:
        raise ValueError(f"factor {to_factor} missing from incoming r map")
    n = len(incoming_r[to_factor])
    acc = np.zeros(n)
    for fid in sorted(incoming_r):
        if fid == to_factor:
            continue
        acc = acc + np.asarray(incoming_r[fid], dtype=float)
    return normalize(acc)


def select_assignment(incoming_r: Mapping[str, np.ndarray],
                      domain: DecisionDomain) -> Tuple[float, int]:
    """Deviation maximizing the summed r messages.

    Ties are broken toward the smallest ``|x|``, then the lower index, so
    repeated runs pick the same value.
    """
    if not incoming_r:
        raise ValueError("no incoming r messages")
    total = np.zeros(len(domain))
    for fid in sorted(incoming_r):
        total = total + np.asarray(incoming_r[fid], dtype=float)
    best = np.max(total)
    ties = np.flatnonzero(total == best)
    idx = int(min(ties, key=lambda i: (abs(domain.values[i]), i)))
    return float(domain.values[idx]), idx
