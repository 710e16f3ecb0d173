"""Scenario files: schema, validation and workload-sequence generation.

A scenario is a JSON document describing tables, query templates (predicate
columns with selectivity ranges, payload columns), cost-model constants and
a workload regime:

    {
      "name": "static_small",
      "cost_model": {"seq_read_rate": 1e8, "index_seek_overhead_s": 0.002,
                     "lookup_cost_per_row_s": 2.5e-6, "creation_rate": 5e7,
                     "noise_sigma": 0.05},
      "tables": [
        {"name": "orders", "row_count": 2000000,
         "columns": [{"name": "o_custkey", "width": 8, "distinct": 200000}, ...]}
      ],
      "templates": [
        {"id": "q_cust",
         "tables": {"orders": {"predicates": {"o_custkey": [0.002, 0.008]},
                               "payload": ["o_total"]}}}
      ],
      "regime": "static",
      "rounds": 25
    }

Column names must be unique across the whole scenario.  Workload regimes:
``static`` runs every template once per round; ``shifting`` splits the
templates into equal groups executed for consecutive blocks of rounds;
``random`` samples about half the pool per round so that round-to-round
template overlap is one half in expectation.  Every instance redraws its
predicate selectivities uniformly from the template's configured ranges.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .query_store import QueryTemplateInfo
from .simulator import CostModel, SimColumn, SimQueryInstance, SimTable, TableAccess

__all__ = [
    "ScenarioError",
    "TemplateSpec",
    "Scenario",
    "REGIMES",
    "SHIFT_GROUPS",
    "parse_scenario",
    "load_scenario",
    "template_infos",
    "generate_workload",
]

REGIMES = ("static", "shifting", "random")

# Number of template groups in the shifting regime.
SHIFT_GROUPS = 4

DEFAULT_ROUNDS = {"static": 25, "shifting": 80, "random": 25}


class ScenarioError(ValueError):
    """A scenario file failed validation."""


@dataclass(frozen=True)
class TemplateSpec:
    """One query template: per-table predicate selectivity ranges and payload."""

    template_id: str
    tables: Mapping[str, "TemplateTableSpec"]


@dataclass(frozen=True)
class TemplateTableSpec:
    predicates: Mapping[str, tuple[float, float]]
    payload: frozenset[str]


@dataclass(frozen=True)
class Scenario:
    name: str
    tables: tuple[SimTable, ...]
    cost_model: CostModel
    templates: tuple[TemplateSpec, ...]
    regime: str
    default_rounds: int

    @property
    def columns(self) -> tuple[str, ...]:
        """All column names in a stable order; fixes the context layout."""
        names: list[str] = []
        for table in self.tables:
            names.extend(column.name for column in table.columns)
        return tuple(names)

    @property
    def db_size_bytes(self) -> float:
        return sum(table.size_bytes for table in self.tables)

    def table(self, name: str) -> SimTable:
        for table in self.tables:
            if table.name == name:
                return table
        raise KeyError(name)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ScenarioError(message)


def parse_scenario(raw: Mapping) -> Scenario:
    """Build and validate a :class:`Scenario` from a parsed JSON document."""
    _require(isinstance(raw, Mapping), "scenario must be a JSON object")
    name = raw.get("name", "scenario")

    tables = []
    for spec in raw.get("tables", []):
        columns = tuple(
            SimColumn(
                name=col["name"],
                width_bytes=int(col["width"]),
                distinct_values=int(col.get("distinct", 1)),
            )
            for col in spec.get("columns", [])
        )
        _require(bool(columns), f"table {spec.get('name')}: needs at least one column")
        tables.append(SimTable(name=spec["name"], row_count=int(spec["row_count"]), columns=columns))
    _require(bool(tables), "scenario defines no tables")
    _require(
        len({t.name for t in tables}) == len(tables),
        "duplicate table names",
    )
    all_columns = [c.name for t in tables for c in t.columns]
    _require(
        len(set(all_columns)) == len(all_columns),
        "column names must be unique across the scenario",
    )
    by_table = {t.name: t for t in tables}

    cm_raw = raw.get("cost_model", {})
    try:
        cost_model = CostModel(
            seq_read_rate=float(cm_raw.get("seq_read_rate", 1e8)),
            index_seek_overhead_s=float(cm_raw.get("index_seek_overhead_s", 2e-3)),
            lookup_cost_per_row_s=float(cm_raw.get("lookup_cost_per_row_s", 2.5e-6)),
            creation_rate=float(cm_raw.get("creation_rate", 5e7)),
            noise_sigma=float(cm_raw.get("noise_sigma", 0.0)),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    templates = []
    for spec in raw.get("templates", []):
        _require("id" in spec, "every template needs an id")
        template_tables: dict[str, TemplateTableSpec] = {}
        for table_name, access in spec.get("tables", {}).items():
            _require(table_name in by_table, f"template {spec['id']}: unknown table {table_name}")
            table = by_table[table_name]
            known = {c.name for c in table.columns}
            predicates: dict[str, tuple[float, float]] = {}
            for column, bounds in access.get("predicates", {}).items():
                _require(column in known, f"template {spec['id']}: unknown column {column}")
                lo, hi = (float(bounds[0]), float(bounds[1])) if isinstance(bounds, (list, tuple)) else (float(bounds), float(bounds))
                _require(
                    0.0 < lo <= hi <= 1.0,
                    f"template {spec['id']}: selectivity range for {column} must satisfy 0 < lo <= hi <= 1",
                )
                predicates[column] = (lo, hi)
            payload = frozenset(access.get("payload", []))
            unknown_payload = payload - known
            _require(
                not unknown_payload,
                f"template {spec['id']}: unknown payload columns {sorted(unknown_payload)}",
            )
            template_tables[table_name] = TemplateTableSpec(predicates=predicates, payload=payload)
        _require(
            any(spec_t.predicates for spec_t in template_tables.values()),
            f"template {spec['id']}: needs at least one predicate column",
        )
        templates.append(TemplateSpec(template_id=spec["id"], tables=template_tables))
    _require(bool(templates), "scenario defines no templates")
    _require(
        len({t.template_id for t in templates}) == len(templates),
        "duplicate template ids",
    )

    regime = raw.get("regime", "static")
    _require(regime in REGIMES, f"unknown regime {regime!r}; expected one of {REGIMES}")
    default_rounds = int(raw.get("rounds", DEFAULT_ROUNDS[regime]))
    _require(default_rounds >= 0, "rounds must be >= 0")

    return Scenario(
        name=name,
        tables=tuple(tables),
        cost_model=cost_model,
        templates=tuple(templates),
        regime=regime,
        default_rounds=default_rounds,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return parse_scenario(raw)


def template_infos(scenario: Scenario, template_ids: Sequence[str] | None = None) -> list[QueryTemplateInfo]:
    """Scenario templates as template-store records (for offline arm pools)."""
    wanted = set(template_ids) if template_ids is not None else None
    infos = []
    for template in scenario.templates:
        if wanted is not None and template.template_id not in wanted:
            continue
        infos.append(
            QueryTemplateInfo(
                template_id=template.template_id,
                predicate_columns={
                    table: frozenset(spec.predicates) for table, spec in template.tables.items()
                },
                payload_columns={
                    table: spec.payload for table, spec in template.tables.items()
                },
                frequency=0,
                avg_selectivity=float(
                    np.prod([np.mean(b) for spec in template.tables.values() for b in spec.predicates.values()])
                ),
                first_seen=0,
                last_seen=0,
            )
        )
    return infos


def _instantiate(
    template: TemplateSpec, round_index: int, ordinal: int, rng: np.random.Generator
) -> SimQueryInstance:
    tables = {}
    for table_name in sorted(template.tables):
        spec = template.tables[table_name]
        predicates = {
            column: float(rng.uniform(lo, hi)) if hi > lo else lo
            for column, (lo, hi) in sorted(spec.predicates.items())
        }
        tables[table_name] = TableAccess(predicates=predicates, payload=spec.payload)
    return SimQueryInstance(
        query_id=f"{template.template_id}:{round_index}:{ordinal}",
        template_id=template.template_id,
        tables=tables,
    )


def generate_workload(
    scenario: Scenario,
    rounds: int,
    seed: int = 0,
    regime: str | None = None,
) -> list[list[SimQueryInstance]]:
    """Produce the per-round query sequence for the requested regime."""
    regime = regime or scenario.regime
    if regime not in REGIMES:
        raise ScenarioError(f"unknown regime {regime!r}")
    if rounds < 0:
        raise ScenarioError("rounds must be >= 0")
    templates = sorted(scenario.templates, key=lambda t: t.template_id)
    rng = np.random.default_rng(seed)

    workload: list[list[SimQueryInstance]] = []
    if regime == "static":
        for round_index in range(1, rounds + 1):
            workload.append(
                [_instantiate(t, round_index, i, rng) for i, t in enumerate(templates)]
            )
    elif regime == "shifting":
        if rounds % SHIFT_GROUPS:
            raise ScenarioError(
                f"shifting regime needs rounds divisible by {SHIFT_GROUPS}, got {rounds}"
            )
        order = rng.permutation(len(templates))
        groups = [list(chunk) for chunk in np.array_split(order, SHIFT_GROUPS)]
        per_group = rounds // SHIFT_GROUPS
        for round_index in range(1, rounds + 1):
            group = groups[(round_index - 1) // per_group] if per_group else []
            active = sorted((templates[i] for i in group), key=lambda t: t.template_id)
            workload.append(
                [_instantiate(t, round_index, i, rng) for i, t in enumerate(active)]
            )
    else:  # random
        pool = len(templates)
        low, high = pool // 2, (pool + 1) // 2
        for round_index in range(1, rounds + 1):
            k = int(rng.integers(low, high + 1)) if high > low else low
            k = max(1, k)
            chosen = sorted(rng.choice(pool, size=k, replace=False).tolist())
            workload.append(
                [
                    _instantiate(templates[i], round_index, pos, rng)
                    for pos, i in enumerate(chosen)
                ]
            )
    return workload
