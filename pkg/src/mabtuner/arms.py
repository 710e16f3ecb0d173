"""Candidate index generation from workload predicates, and their contexts.

Arms are built per query template and table: one arm per permutation of
each non-empty predicate-column subset (up to a key-width cap), plus a
payload-extended variant of every full-length permutation so the index can
cover the query outright.  Identical arms arising from different templates
collapse into one, keeping arm identity stable across rounds.

A context vector has one slot per database column followed by three derived
statistics.  The column slot for a key column at 1-based position ``j`` is
``10**-j`` when that column is also a workload predicate, 0 otherwise
(payload-only columns score 0), so arms sharing a key prefix share slot
values on that prefix.  The derived part is a covering-index flag, the
index size as a fraction of the database size (0 once materialised), and a
decayed usage count from previous rounds.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .query_store import QueryTemplateInfo

__all__ = [
    "IndexArm",
    "ContextVector",
    "make_arm_id",
    "generate_arms",
    "build_context",
    "context_dimension",
    "USAGE_DECAY",
]

# Per-round geometric decay applied to the usage statistic.
USAGE_DECAY = 0.5

SizeEstimator = Callable[[str, Sequence[str], Iterable[str]], float]


@dataclass(frozen=True)
class IndexArm:
    """A candidate secondary index with identity stable across rounds."""

    arm_id: str
    table: str
    key_columns: tuple[str, ...]
    payload_columns: frozenset[str]
    source_templates: frozenset[str]
    covering_for: frozenset[str]
    estimated_size: float

    def __post_init__(self) -> None:
        if not self.key_columns:
            raise ValueError("an index needs at least one key column")
        if len(set(self.key_columns)) != len(self.key_columns):
            raise ValueError(f"duplicate key columns in {self.key_columns}")
        if self.payload_columns & set(self.key_columns):
            raise ValueError("payload columns must be disjoint from key columns")


@dataclass(frozen=True)
class ContextVector:
    """Feature vector for one arm: column slots then derived statistics."""

    values: np.ndarray
    columns: tuple[str, ...]


def make_arm_id(
    table: str, key_columns: Sequence[str], payload_columns: Iterable[str] = ()
) -> str:
    """Deterministic id: same (table, key order, payload set) => same id."""
    arm_id = f"{table}__{'_'.join(key_columns)}"
    payload = sorted(payload_columns)
    if payload:
        arm_id += f"__inc_{'_'.join(payload)}"
    return arm_id


def _covers(
    key_columns: Sequence[str],
    payload_columns: frozenset[str],
    template: QueryTemplateInfo,
    table: str,
) -> bool:
    needed = template.predicate_columns.get(table, frozenset()) | template.payload_columns.get(
        table, frozenset()
    )
    return bool(needed) and needed <= (set(key_columns) | payload_columns)


def generate_arms(
    templates: Iterable[QueryTemplateInfo],
    max_key_width: int = 3,
    size_estimator: SizeEstimator | None = None,
) -> list[IndexArm]:
    """Enumerate candidate indices for the given templates.

    For a template with predicate set P on a table: every permutation of
    every non-empty subset of P with at most ``max_key_width`` columns, and
    for each permutation of ``min(|P|, max_key_width)`` columns a variant
    extended with the template's non-predicate payload columns.  Arms are
    de-duplicated by id across templates, unioning their provenance.
    """
    if max_key_width < 1:
        raise ValueError(f"max key width must be >= 1, got {max_key_width}")
    estimate = size_estimator or (lambda table, keys, payload: 0.0)

    by_id: dict[str, dict] = {}

    def emit(
        table: str,
        keys: tuple[str, ...],
        payload: frozenset[str],
        template: QueryTemplateInfo,
    ) -> None:
        arm_id = make_arm_id(table, keys, payload)
        entry = by_id.get(arm_id)
        if entry is None:
            entry = {
                "table": table,
                "keys": keys,
                "payload": payload,
                "sources": set(),
                "covering": set(),
                "size": float(estimate(table, keys, payload)),
            }
            by_id[arm_id] = entry
        entry["sources"].add(template.template_id)
        if _covers(keys, payload, template, table):
            entry["covering"].add(template.template_id)

    for template in templates:
        for table in sorted(template.predicate_columns):
            preds = sorted(template.predicate_columns[table])
            if not preds:
                continue
            payload = template.payload_columns.get(table, frozenset())
            full_width = min(len(preds), max_key_width)
            for width in range(1, full_width + 1):
                for subset in combinations(preds, width):
                    for perm in permutations(subset):
                        emit(table, perm, frozenset(), template)
                        if width == full_width and payload - set(perm):
                            emit(table, perm, frozenset(payload - set(perm)), template)

    return [
        IndexArm(
            arm_id=arm_id,
            table=entry["table"],
            key_columns=entry["keys"],
            payload_columns=entry["payload"],
            source_templates=frozenset(entry["sources"]),
            covering_for=frozenset(entry["covering"]),
            estimated_size=entry["size"],
        )
        for arm_id, entry in sorted(by_id.items())
    ]


def context_dimension(columns: Sequence[str]) -> int:
    """One slot per database column plus the three derived statistics."""
    return len(columns) + 3


def build_context(
    arm: IndexArm,
    template_predicates: frozenset[str] | set[str],
    materialised: set[str] | frozenset[str],
    usage_history: Mapping[str, float],
    db_size: float,
    columns: Sequence[str],
) -> ContextVector:
    """Featurize one arm against the current round's workload knowledge.

    ``template_predicates`` is the union of predicate columns (on the arm's
    table) over the templates that generated the arm; ``columns`` fixes the
    slot layout and must be identical across all arms and rounds.
    """
    if db_size <= 0:
        raise ValueError(f"database size must be > 0, got {db_size}")
    values = np.zeros(context_dimension(columns))
    slot = {name: i for i, name in enumerate(columns)}
    for position, column in enumerate(arm.key_columns, start=1):
        if column in template_predicates:
            values[slot[column]] = 10.0 ** -position
    values[-3] = 1.0 if arm.covering_for else 0.0
    values[-2] = 0.0 if arm.arm_id in materialised else arm.estimated_size / db_size
    values[-1] = usage_history.get(arm.arm_id, 0.0)
    return ContextVector(values=values, columns=tuple(columns))
