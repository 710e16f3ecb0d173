"""Tracking of query templates and detection of workload shifts.

Executed queries are reduced to templates (per-table predicate and payload
column sets, parameter values stripped).  The store keeps frequency,
running-average selectivity and first/last seen rounds per template, reports
how many of a round's templates are new (the shift intensity), and exposes
the recently seen templates as the queries of interest that seed arm
generation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = ["QueryTemplateInfo", "QueryStore", "template_key"]


@dataclass
class QueryTemplateInfo:
    """Aggregated knowledge about one query template."""

    template_id: str
    predicate_columns: dict[str, frozenset[str]]
    payload_columns: dict[str, frozenset[str]]
    frequency: int
    avg_selectivity: float
    first_seen: int
    last_seen: int


def template_key(tables: Mapping[str, object]) -> str:
    """Canonical template identity from per-table predicate/payload columns.

    ``tables`` maps table name to an object with ``predicates`` (mapping of
    column to selectivity) and ``payload`` (iterable of columns).  Parameter
    values do not participate, so instances of the same template collapse.
    """
    parts = []
    for table in sorted(tables):
        access = tables[table]
        preds = ",".join(sorted(access.predicates))
        payload = ",".join(sorted(access.payload))
        parts.append(f"{table}({preds})[{payload}]")
    return "|".join(parts)


def _combined_selectivity(tables: Mapping[str, object]) -> float:
    sel = 1.0
    for access in tables.values():
        for value in access.predicates.values():
            sel *= float(value)
    return sel


class QueryStore:
    """Single-writer store of templates seen so far.

    ``qoi_window`` bounds how far back a template's last sighting may be for
    it to still count as a query of interest.
    """

    def __init__(self, qoi_window: int = 4) -> None:
        if qoi_window < 1:
            raise ValueError(f"QoI window must be >= 1, got {qoi_window}")
        self.qoi_window = qoi_window
        self._templates: dict[str, QueryTemplateInfo] = {}
        self._last_round: int | None = None

    @property
    def is_empty(self) -> bool:
        return not self._templates

    @property
    def templates(self) -> dict[str, QueryTemplateInfo]:
        return dict(self._templates)

    def ingest(self, round_index: int, executed_queries: Iterable[object]) -> float:
        """Record one round's executed queries; return the shift intensity.

        Shift intensity is the fraction of this round's distinct templates
        never seen before (0.0 for an empty round).  ``round_index`` must be
        strictly increasing across calls.
        """
        if self._last_round is not None and round_index <= self._last_round:
            raise ValueError(
                f"round index must increase: got {round_index} after {self._last_round}"
            )
        self._last_round = round_index

        per_template: dict[str, list[object]] = {}
        for query in executed_queries:
            per_template.setdefault(template_key(query.tables), []).append(query)
        if not per_template:
            return 0.0

        new_count = 0
        for key, instances in per_template.items():
            info = self._templates.get(key)
            if info is None:
                new_count += 1
                first = instances[0]
                info = QueryTemplateInfo(
                    template_id=key,
                    predicate_columns={
                        table: frozenset(access.predicates)
                        for table, access in first.tables.items()
                    },
                    payload_columns={
                        table: frozenset(access.payload)
                        for table, access in first.tables.items()
                    },
                    frequency=0,
                    avg_selectivity=0.0,
                    first_seen=round_index,
                    last_seen=round_index,
                )
                self._templates[key] = info
            for query in instances:
                sel = _combined_selectivity(query.tables)
                info.avg_selectivity = (
                    info.avg_selectivity * info.frequency + sel
                ) / (info.frequency + 1)
                info.frequency += 1
            info.last_seen = round_index
        return new_count / len(per_template)

    def queries_of_interest(self, round_index: int) -> list[QueryTemplateInfo]:
        """Templates last seen within the recency window, in stable id order."""
        cutoff = round_index - self.qoi_window
        return sorted(
            (info for info in self._templates.values() if info.last_seen > cutoff),
            key=lambda info: info.template_id,
        )
