"""Reward shaping from observed execution statistics.

An arm's gain for a query is the reference scan time of its table minus the
arm's own observed access time, counted only when the optimiser actually
used the arm, and summed over the round's workload.  Newly materialised
arms are additionally charged their creation time.  The super-arm reward is
the plain sum of its members' rewards, which is what makes greedy selection
on per-arm scores meaningful.

The reference scan time for a table and query is the observed full-scan
time when one was observed this round.  Tuning is reactive, so a query's
table is typically full-scanned in earlier rounds before any index for it
exists; :class:`ReferenceScanCache` carries those observations forward.
With neither available, the maximum observed secondary-index access time on
the table stands in.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .arms import IndexArm

__all__ = [
    "FULL_SCAN",
    "AccessRecord",
    "QueryOutcome",
    "RoundOutcome",
    "ReferenceScanCache",
    "table_scan_reference",
    "arm_gain",
    "arm_reward",
    "super_arm_reward",
]

FULL_SCAN = "full_scan"


@dataclass(frozen=True)
class AccessRecord:
    """One observed table access: a full scan or a named index path."""

    table: str
    path: str  # FULL_SCAN or an index arm id
    elapsed_s: float

    @property
    def is_full_scan(self) -> bool:
        return self.path == FULL_SCAN


@dataclass(frozen=True)
class QueryOutcome:
    """Per-query execution statistics for one round."""

    query_id: str
    template_id: str
    records: tuple[AccessRecord, ...]

    @property
    def elapsed_s(self) -> float:
        return sum(record.elapsed_s for record in self.records)

    @property
    def used_indices(self) -> frozenset[str]:
        return frozenset(r.path for r in self.records if not r.is_full_scan)

    @property
    def tables(self) -> frozenset[str]:
        return frozenset(r.table for r in self.records)


@dataclass(frozen=True)
class RoundOutcome:
    """Everything observed while executing one round's workload.

    ``creation_times`` covers only the arms materialised this round; arms
    carried over from the previous configuration do not appear.
    """

    round_index: int
    config_ids: frozenset[str]
    queries: tuple[QueryOutcome, ...]
    creation_times: Mapping[str, float] = field(default_factory=dict)
    dropped: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for query in self.queries:
            stray = query.used_indices - self.config_ids
            if stray:
                raise ValueError(
                    f"query {query.query_id} used indices outside the configuration: {sorted(stray)}"
                )

    def query(self, query_id: str) -> QueryOutcome:
        for query in self.queries:
            if query.query_id == query_id:
                return query
        raise KeyError(query_id)

    @property
    def execution_s(self) -> float:
        return sum(query.elapsed_s for query in self.queries)


class ReferenceScanCache:
    """Latest observed full-scan time per (table, template).

    Only genuine full scans are cached; the max-index-time estimate is a
    last resort and would otherwise freeze a degenerate reference.
    """

    def __init__(self) -> None:
        self._times: dict[tuple[str, str], float] = {}

    def observe_round(self, outcome: RoundOutcome) -> None:
        for query in outcome.queries:
            for record in query.records:
                if record.is_full_scan:
                    self._times[(record.table, query.template_id)] = record.elapsed_s

    def get(self, table: str, template_id: str) -> float | None:
        return self._times.get((table, template_id))


def table_scan_reference(outcome: RoundOutcome, table: str, query_id: str) -> float:
    """Reference scan time from this round's observations alone.

    Prefers an observed full scan; otherwise falls back to the maximum
    secondary-index access time on the table for the query.
    """
    query = outcome.query(query_id)
    records = [r for r in query.records if r.table == table]
    if not records:
        raise ValueError(f"query {query_id} did not touch table {table}")
    for record in records:
        if record.is_full_scan:
            return record.elapsed_s
    return max(record.elapsed_s for record in records)


def _reference(
    outcome: RoundOutcome,
    query: QueryOutcome,
    table: str,
    cache: ReferenceScanCache | None,
) -> float:
    records = [r for r in query.records if r.table == table]
    for record in records:
        if record.is_full_scan:
            return record.elapsed_s
    if cache is not None:
        cached = cache.get(table, query.template_id)
        if cached is not None:
            return cached
    if records:
        return max(record.elapsed_s for record in records)
    raise ValueError(f"query {query.query_id} did not touch table {table}")


def arm_gain(
    outcome: RoundOutcome,
    arm: IndexArm,
    workload: Iterable[str] | None = None,
    reference_cache: ReferenceScanCache | None = None,
) -> float:
    """Execution-time gain attributed to ``arm`` over the round's workload.

    Zero for queries that did not use the arm; otherwise reference scan
    time minus the arm's observed access time.  May be negative when the
    index made things worse.
    """
    query_ids = set(workload) if workload is not None else None
    gain = 0.0
    for query in outcome.queries:
        if query_ids is not None and query.query_id not in query_ids:
            continue
        if arm.arm_id not in query.used_indices:
            continue
        own = next(r for r in query.records if r.path == arm.arm_id)
        gain += _reference(outcome, query, arm.table, reference_cache) - own.elapsed_s
    return gain


def arm_reward(
    outcome: RoundOutcome,
    arm: IndexArm,
    reference_cache: ReferenceScanCache | None = None,
) -> float:
    """Gain minus creation time; creation counts only when built this round."""
    creation = outcome.creation_times.get(arm.arm_id, 0.0)
    return arm_gain(outcome, arm, reference_cache=reference_cache) - creation


def super_arm_reward(
    outcome: RoundOutcome,
    member_arms: Iterable[IndexArm],
    reference_cache: ReferenceScanCache | None = None,
) -> float:
    """Sum of per-arm rewards over the played configuration."""
    return sum(arm_reward(outcome, arm, reference_cache) for arm in member_arms)
