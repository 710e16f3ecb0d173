"""Deterministic database stand-in: cost model, execution and materialisation.

Queries are "executed" by pricing access paths per table and letting a
cost-truthful optimiser pick the cheapest one.  A full scan costs the table
bytes over the sequential read rate.  A secondary index is applicable when
its leading key column is one of the query's predicate columns on that
table; its cost is a constant seek overhead, plus reading the matching leaf
entries, plus one row lookup per matching row unless the index covers every
column the query touches on that table.  Optional bounded multiplicative
noise perturbs each candidate path, so a sub-optimal plan can win only
through noise.  With noise off, execution is a pure function of workload
and configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .arms import IndexArm
from .rewards import FULL_SCAN, AccessRecord, QueryOutcome, RoundOutcome

__all__ = [
    "ROW_POINTER_BYTES",
    "SimColumn",
    "SimTable",
    "CostModel",
    "TableAccess",
    "SimQueryInstance",
    "SimDatabase",
]

# B-tree leaf entry overhead per row.
ROW_POINTER_BYTES = 8


@dataclass(frozen=True)
class SimColumn:
    name: str
    width_bytes: int
    distinct_values: int = 1

    def __post_init__(self) -> None:
        if self.width_bytes < 1:
            raise ValueError(f"column {self.name}: width must be >= 1 byte")
        if self.distinct_values < 1:
            raise ValueError(f"column {self.name}: distinct count must be >= 1")


@dataclass(frozen=True)
class SimTable:
    name: str
    row_count: int
    columns: tuple[SimColumn, ...]

    def __post_init__(self) -> None:
        if self.row_count < 1:
            raise ValueError(f"table {self.name}: row count must be >= 1")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"table {self.name}: duplicate column names")

    @property
    def row_width(self) -> int:
        return sum(c.width_bytes for c in self.columns)

    @property
    def size_bytes(self) -> float:
        return float(self.row_count * self.row_width)

    def column(self, name: str) -> SimColumn:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(f"table {self.name} has no column {name}")


@dataclass(frozen=True)
class CostModel:
    seq_read_rate: float = 1e8  # bytes / second
    index_seek_overhead_s: float = 2e-3
    lookup_cost_per_row_s: float = 2.5e-6
    creation_rate: float = 5e7  # bytes / second
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        for name in ("seq_read_rate", "index_seek_overhead_s", "lookup_cost_per_row_s", "creation_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"cost model: {name} must be > 0")
        if not 0.0 <= self.noise_sigma < 1.0:
            raise ValueError(f"cost model: noise sigma must be in [0, 1), got {self.noise_sigma}")


@dataclass(frozen=True)
class TableAccess:
    """A query's footprint on one table: predicate selectivities and payload."""

    predicates: Mapping[str, float]
    payload: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for column, sel in self.predicates.items():
            if not 0.0 < sel <= 1.0:
                raise ValueError(f"selectivity for {column} must be in (0, 1], got {sel}")


@dataclass(frozen=True)
class SimQueryInstance:
    query_id: str
    template_id: str
    tables: Mapping[str, TableAccess]


class SimDatabase:
    """Tables plus a cost model; owns the noise stream for one experiment."""

    def __init__(self, tables: Sequence[SimTable], cost_model: CostModel, seed: int = 0) -> None:
        if not tables:
            raise ValueError("a database needs at least one table")
        names = [t.name for t in tables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate table names")
        self.tables: dict[str, SimTable] = {t.name: t for t in tables}
        self.cost_model = cost_model
        self._rng = np.random.default_rng(seed)

    @property
    def db_size_bytes(self) -> float:
        return sum(t.size_bytes for t in self.tables.values())

    def index_size_bytes(
        self, table: str, key_columns: Sequence[str], payload_columns: Iterable[str] = ()
    ) -> float:
        """Leaf-level size estimate: rows x (key + payload widths + row pointer)."""
        tab = self.tables[table]
        width = sum(tab.column(c).width_bytes for c in key_columns)
        width += sum(tab.column(c).width_bytes for c in payload_columns)
        return float(tab.row_count * (width + ROW_POINTER_BYTES))

    def full_scan_time(self, table: str) -> float:
        return self.tables[table].size_bytes / self.cost_model.seq_read_rate

    def index_access_time(
        self, arm: IndexArm, access: TableAccess
    ) -> float | None:
        """Cost of answering ``access`` through ``arm``; None when inapplicable.

        Only the longest key prefix made of predicate columns narrows the
        scan; non-prefix predicate columns are filtered after the fetch.
        """
        predicates = access.predicates
        if arm.key_columns[0] not in predicates:
            return None
        selectivity = 1.0
        for column in arm.key_columns:
            if column not in predicates:
                break
            selectivity *= predicates[column]
        table = self.tables[arm.table]
        matching_rows = selectivity * table.row_count
        entry_width = (
            sum(table.column(c).width_bytes for c in arm.key_columns)
            + sum(table.column(c).width_bytes for c in arm.payload_columns)
            + ROW_POINTER_BYTES
        )
        cost = self.cost_model.index_seek_overhead_s
        cost += matching_rows * entry_width / self.cost_model.seq_read_rate
        needed = frozenset(predicates) | access.payload
        if not needed <= (set(arm.key_columns) | arm.payload_columns):
            cost += matching_rows * self.cost_model.lookup_cost_per_row_s
        return cost

    def _noise_factor(self, rng: np.random.Generator | None) -> float:
        sigma = self.cost_model.noise_sigma
        if rng is None or sigma == 0.0:
            return 1.0
        return 1.0 + sigma * (2.0 * rng.random() - 1.0)

    def materialise(
        self,
        config_arms: Iterable[IndexArm],
        current_ids: Iterable[str],
        budget_bytes: float,
        use_noise: bool = True,
    ) -> tuple[dict[str, float], frozenset[str]]:
        """Build missing indices; return (creation times, dropped arm ids).

        Creation time is estimated size over the creation rate, noised when
        requested.  Dropping is free.  The target configuration must fit the
        memory budget.
        """
        arms = sorted(config_arms, key=lambda a: a.arm_id)
        total = sum(arm.estimated_size for arm in arms)
        if total > budget_bytes:
            raise ValueError(
                f"configuration needs {total:.0f} bytes, budget is {budget_bytes:.0f}"
            )
        current = set(current_ids)
        rng = self._rng if use_noise else None
        creation_times: dict[str, float] = {}
        for arm in arms:
            if arm.arm_id in current:
                continue
            base = arm.estimated_size / self.cost_model.creation_rate
            creation_times[arm.arm_id] = base * self._noise_factor(rng)
        dropped = frozenset(current - {arm.arm_id for arm in arms})
        return creation_times, dropped

    def execute(
        self,
        workload: Sequence[SimQueryInstance],
        config_arms: Iterable[IndexArm],
        round_index: int = 0,
        creation_times: Mapping[str, float] | None = None,
        dropped: frozenset[str] = frozenset(),
        use_noise: bool = True,
    ) -> RoundOutcome:
        """Run every query, picking the cheapest access path per table."""
        arms = sorted(config_arms, key=lambda a: a.arm_id)
        by_table: dict[str, list[IndexArm]] = {}
        for arm in arms:
            by_table.setdefault(arm.table, []).append(arm)
        rng = self._rng if use_noise else None

        outcomes = []
        for query in workload:
            records = []
            for table in sorted(query.tables):
                if table not in self.tables:
                    raise ValueError(f"query {query.query_id} references unknown table {table}")
                access = query.tables[table]
                best_path = FULL_SCAN
                best_cost = self.full_scan_time(table) * self._noise_factor(rng)
                for arm in by_table.get(table, []):
                    cost = self.index_access_time(arm, access)
                    if cost is None:
                        continue
                    cost *= self._noise_factor(rng)
                    if cost < best_cost:
                        best_path = arm.arm_id
                        best_cost = cost
                records.append(AccessRecord(table=table, path=best_path, elapsed_s=best_cost))
            outcomes.append(
                QueryOutcome(
                    query_id=query.query_id,
                    template_id=query.template_id,
                    records=tuple(records),
                )
            )
        return RoundOutcome(
            round_index=round_index,
            config_ids=frozenset(arm.arm_id for arm in arms),
            queries=tuple(outcomes),
            creation_times=dict(creation_times or {}),
            dropped=dropped,
        )
