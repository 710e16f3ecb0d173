"""End-to-end tuning loop, baselines and regret measurement.

Each round the harness folds the previous round's workload into the query
store, derives the queries of interest, generates candidate arms and their
contexts, scores them with the shared linear model, greedily selects a
configuration under the memory budget, materialises it, executes the
round's workload and feeds the observed per-arm rewards back into the
model.  A hard workload shift (too many never-seen templates) resets the
learned model.

Reports carry the per-round time decomposition (recommendation, creation,
execution), the configurations played, observed super-arm rewards and a
noise-free ground-truth reward series used for regret against the best
fixed configuration chosen with full-sequence hindsight.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .arms import IndexArm, build_context, context_dimension, generate_arms, USAGE_DECAY
from .bandit import (
    LinearModelState,
    UcbParameters,
    constant_alpha,
    forget,
    sqrt_log_alpha,
    ucb_score,
    update,
)
from .query_store import QueryStore, QueryTemplateInfo
from .rewards import ReferenceScanCache, arm_reward
from .scenario import Scenario, generate_workload, template_infos
from .selection import SelectionCandidate, SuperArm, select_super_arm
from .simulator import SimDatabase, SimQueryInstance

__all__ = [
    "TuningParams",
    "RoundRecord",
    "ExperimentReport",
    "RegretBaseline",
    "PoolTooLargeError",
    "BRUTE_FORCE_MAX_ARMS",
    "run_experiment",
    "run_baseline_noindex",
    "brute_force_optimum",
    "regret_series",
    "attach_regret",
    "evaluate_fixed_config",
]

# Exhaustive search refuses candidate pools larger than this.
BRUTE_FORCE_MAX_ARMS = 20


class PoolTooLargeError(ValueError):
    """The candidate pool is too large for exhaustive subset evaluation."""


@dataclass(frozen=True)
class TuningParams:
    """Learner knobs; defaults match the reference experiments."""

    alpha: float = 1.0
    alpha_schedule: str = "constant"  # "constant" or "sqrt_log"
    lam: float = 1.0
    max_key_width: int = 3
    shift_threshold: float = 0.6
    qoi_window: int = 4
    density_greedy: bool = False

    def ucb_parameters(self) -> UcbParameters:
        if self.alpha_schedule == "constant":
            schedule = constant_alpha(self.alpha)
        elif self.alpha_schedule == "sqrt_log":
            schedule = sqrt_log_alpha(self.alpha)
        else:
            raise ValueError(f"unknown alpha schedule {self.alpha_schedule!r}")
        return UcbParameters(alpha_schedule=schedule, lam=self.lam)


@dataclass
class RoundRecord:
    round_index: int
    c_rec_s: float
    c_cre_s: float
    c_exc_s: float
    reward_s: float
    true_reward_s: float
    config_ids: tuple[str, ...]
    shift_intensity: float
    forget_fired: bool
    regret_s: float | None = None

    @property
    def total_s(self) -> float:
        return self.c_rec_s + self.c_cre_s + self.c_exc_s


@dataclass
class ExperimentReport:
    method: str
    scenario_name: str
    regime: str
    seed: int
    rounds: int
    budget_bytes: float
    records: list[RoundRecord] = field(default_factory=list)
    regret_alpha: float | None = None
    cumulative_regret: list[float] | None = None
    wall_clock: bool = False

    @property
    def recommendation_s(self) -> float:
        return sum(r.c_rec_s for r in self.records)

    @property
    def creation_s(self) -> float:
        return sum(r.c_cre_s for r in self.records)

    @property
    def execution_s(self) -> float:
        return sum(r.c_exc_s for r in self.records)

    @property
    def total_s(self) -> float:
        return sum(r.total_s for r in self.records)

    @property
    def forget_rounds(self) -> list[int]:
        return [r.round_index for r in self.records if r.forget_fired]

    @property
    def execution_series(self) -> list[float]:
        return [r.c_exc_s for r in self.records]

    @property
    def true_reward_series(self) -> list[float]:
        return [r.true_reward_s for r in self.records]


@dataclass
class RegretBaseline:
    """Best fixed configuration with hindsight, and its reward series."""

    super_arm: SuperArm
    arm_ids: tuple[str, ...]
    creation_s: float
    exec_series: np.ndarray
    noindex_series: np.ndarray
    reward_series: np.ndarray


def _arm_predicates(arm: IndexArm, infos_by_id: dict[str, QueryTemplateInfo]) -> frozenset[str]:
    predicates: set[str] = set()
    for template_id in arm.source_templates:
        info = infos_by_id.get(template_id)
        if info is not None:
            predicates |= info.predicate_columns.get(arm.table, frozenset())
    return frozenset(predicates)


def _true_round_reward(
    sim: SimDatabase,
    queries: Sequence[SimQueryInstance],
    selected: Sequence[IndexArm],
    new_arms: Sequence[IndexArm],
) -> tuple[float, float]:
    """Noise-free (execution time, ground-truth reward) for one round."""
    exec_empty = sim.execute(queries, [], use_noise=False).execution_s
    exec_config = sim.execute(queries, selected, use_noise=False).execution_s
    creation = sum(arm.estimated_size / sim.cost_model.creation_rate for arm in new_arms)
    return exec_config, exec_empty - exec_config - creation


def run_experiment(
    scenario: Scenario,
    budget_bytes: float,
    rounds: int | None = None,
    params: TuningParams = TuningParams(),
    seed: int = 0,
    regime: str | None = None,
    wall_clock: bool = False,
    fixed_config: Sequence[IndexArm] | None = None,
    workload: Sequence[Sequence[SimQueryInstance]] | None = None,
) -> ExperimentReport:
    """Run the tuning loop for ``rounds`` rounds, starting from no indices.

    ``fixed_config`` replaces the learner by a constant configuration
    (materialised in round 1); an empty list gives the NoIndex baseline.
    Recommendation wall time is recorded only when ``wall_clock`` is set;
    otherwise it is reported as zero so that reports and output files are
    bit-reproducible for a fixed seed.
    """
    if budget_bytes <= 0:
        raise ValueError(f"memory budget must be > 0, got {budget_bytes}")
    regime = regime or scenario.regime
    rounds = scenario.default_rounds if rounds is None else rounds
    if workload is None:
        workload = generate_workload(scenario, rounds, seed=seed, regime=regime)
    elif len(workload) != rounds:
        raise ValueError(f"workload has {len(workload)} rounds, expected {rounds}")

    sim = SimDatabase(scenario.tables, scenario.cost_model, seed=seed)
    if fixed_config is not None:
        total = sum(arm.estimated_size for arm in fixed_config)
        if total > budget_bytes:
            raise ValueError(f"fixed configuration needs {total:.0f} bytes, budget is {budget_bytes:.0f}")

    ucb_params = params.ucb_parameters()
    state = LinearModelState.fresh(context_dimension(scenario.columns), params.lam)
    store = QueryStore(qoi_window=params.qoi_window)
    ref_cache = ReferenceScanCache()
    usage: dict[str, float] = {}
    current_ids: frozenset[str] = frozenset()
    previous_queries: list[SimQueryInstance] = []

    method = "mab"
    if fixed_config is not None:
        method = "noindex" if not fixed_config else "fixed"

    report = ExperimentReport(
        method=method,
        scenario_name=scenario.name,
        regime=regime,
        seed=seed,
        rounds=rounds,
        budget_bytes=budget_bytes,
        wall_clock=wall_clock,
    )

    for round_index in range(1, rounds + 1):
        queries = list(workload[round_index - 1])
        was_tracking = not store.is_empty
        shift = store.ingest(round_index, previous_queries)
        fired = False

        if fixed_config is not None:
            selected = list(fixed_config)
            c_rec = 0.0
        else:
            started = time.perf_counter()
            if shift >= params.shift_threshold and was_tracking:
                state = forget(state)
                fired = True
            qoi = store.queries_of_interest(round_index)
            infos_by_id = {info.template_id: info for info in qoi}
            pool = generate_arms(qoi, params.max_key_width, size_estimator=sim.index_size_bytes)
            contexts = {
                arm.arm_id: build_context(
                    arm,
                    _arm_predicates(arm, infos_by_id),
                    current_ids,
                    usage,
                    sim.db_size_bytes,
                    scenario.columns,
                )
                for arm in pool
            }
            scores = {
                arm.arm_id: ucb_score(state, ucb_params, contexts[arm.arm_id].values, arm.arm_id)
                for arm in pool
            }
            candidates = [
                SelectionCandidate(
                    arm_id=arm.arm_id,
                    score=scores[arm.arm_id].ucb,
                    memory_cost=arm.estimated_size,
                    key_columns=arm.key_columns,
                    table=arm.table,
                    is_covering_for=arm.covering_for,
                    source_templates=arm.source_templates,
                )
                for arm in pool
            ]
            super_arm = select_super_arm(candidates, budget_bytes, params.density_greedy)
            selected = [arm for arm in pool if arm.arm_id in super_arm.arm_ids]
            c_rec = time.perf_counter() - started if wall_clock else 0.0

        new_arms = [arm for arm in selected if arm.arm_id not in current_ids]
        creation_times, dropped = sim.materialise(selected, current_ids, budget_bytes)
        c_cre = sum(creation_times.values())
        outcome = sim.execute(
            queries,
            selected,
            round_index=round_index,
            creation_times=creation_times,
            dropped=dropped,
        )
        ref_cache.observe_round(outcome)

        reward_s = 0.0
        if fixed_config is None:
            observations = []
            for arm in selected:
                reward = arm_reward(outcome, arm, ref_cache)
                observations.append((contexts[arm.arm_id].values, reward))
                reward_s += reward
            state = update(state, observations)

        used_now = frozenset().union(*(q.used_indices for q in outcome.queries)) if outcome.queries else frozenset()
        for arm_id in list(usage):
            usage[arm_id] *= USAGE_DECAY
        for arm_id in used_now:
            usage[arm_id] = usage.get(arm_id, 0.0) + 1.0

        exec_true, true_reward = _true_round_reward(sim, queries, selected, new_arms)
        report.records.append(
            RoundRecord(
                round_index=round_index,
                c_rec_s=c_rec,
                c_cre_s=c_cre,
                c_exc_s=outcome.execution_s,
                reward_s=reward_s,
                true_reward_s=true_reward,
                config_ids=tuple(sorted(arm.arm_id for arm in selected)),
                shift_intensity=shift,
                forget_fired=fired,
            )
        )
        current_ids = frozenset(arm.arm_id for arm in selected)
        previous_queries = queries

    return report


def run_baseline_noindex(
    scenario: Scenario,
    rounds: int | None = None,
    seed: int = 0,
    regime: str | None = None,
    workload: Sequence[Sequence[SimQueryInstance]] | None = None,
) -> ExperimentReport:
    """Execute every round with no secondary indices at all."""
    db_size = scenario.db_size_bytes
    return run_experiment(
        scenario,
        budget_bytes=db_size,
        rounds=rounds,
        seed=seed,
        regime=regime,
        fixed_config=[],
        workload=workload,
    )


def _table_pareto(
    sim: SimDatabase,
    arms: Sequence[IndexArm],
    accesses: Sequence,
) -> list[tuple[float, float, tuple[str, ...]]]:
    """All Pareto-efficient (memory, exec+creation, arm ids) subsets for one table."""
    n = len(arms)
    # Cost matrix: rows are table accesses across the workload, cols are arms.
    full_times = np.array([sim.full_scan_time(table) for table, _ in accesses])
    costs = np.full((len(accesses), n), np.inf)
    for j, arm in enumerate(arms):
        for i, (_, access) in enumerate(accesses):
            cost = sim.index_access_time(arm, access)
            if cost is not None:
                costs[i, j] = cost
    sizes = np.array([arm.estimated_size for arm in arms])
    creation_rate = sim.cost_model.creation_rate

    entries = []
    for mask in range(1 << n):
        chosen = [j for j in range(n) if mask >> j & 1]
        if chosen:
            best = np.minimum(full_times, costs[:, chosen].min(axis=1))
        else:
            best = full_times
        mem = float(sizes[chosen].sum()) if chosen else 0.0
        total = float(best.sum()) + mem / creation_rate
        entries.append((mem, total, tuple(arms[j].arm_id for j in chosen)))

    entries.sort(key=lambda e: (e[0], e[1], len(e[2]), e[2]))
    frontier: list[tuple[float, float, tuple[str, ...]]] = []
    best_cost = np.inf
    for mem, total, ids in entries:
        if total < best_cost:
            frontier.append((mem, total, ids))
            best_cost = total
    return frontier


def brute_force_optimum(
    scenario: Scenario,
    budget_bytes: float,
    rounds: int | None = None,
    seed: int = 0,
    regime: str | None = None,
    workload: Sequence[Sequence[SimQueryInstance]] | None = None,
    template_ids: Sequence[str] | None = None,
    max_key_width: int = 3,
) -> RegretBaseline:
    """Best fixed configuration with full-sequence hindsight, noise off.

    Exhaustively evaluates every budget-feasible subset of the candidate
    pool (execution over the whole workload sequence plus creation charged
    once) and refuses pools above ``BRUTE_FORCE_MAX_ARMS``.
    """
    regime = regime or scenario.regime
    rounds = scenario.default_rounds if rounds is None else rounds
    if workload is None:
        workload = generate_workload(scenario, rounds, seed=seed, regime=regime)

    sim = SimDatabase(scenario.tables, scenario.cost_model, seed=seed)
    infos = template_infos(scenario, template_ids)
    pool = generate_arms(infos, max_key_width, size_estimator=sim.index_size_bytes)
    if len(pool) > BRUTE_FORCE_MAX_ARMS:
        raise PoolTooLargeError(
            f"candidate pool has {len(pool)} arms; exhaustive search is limited to "
            f"{BRUTE_FORCE_MAX_ARMS}. Shrink the template set or key width."
        )

    by_table: dict[str, list[IndexArm]] = {}
    for arm in pool:
        by_table.setdefault(arm.table, []).append(arm)
    accesses_by_table: dict[str, list] = {table: [] for table in by_table}
    for round_queries in workload:
        for query in round_queries:
            for table, access in query.tables.items():
                if table in accesses_by_table:
                    accesses_by_table[table].append((table, access))

    combos: list[tuple[float, float, tuple[str, ...]]] = [(0.0, 0.0, ())]
    for table in sorted(by_table):
        frontier = _table_pareto(sim, sorted(by_table[table], key=lambda a: a.arm_id), accesses_by_table[table])
        merged = []
        for mem0, cost0, ids0 in combos:
            for mem1, cost1, ids1 in frontier:
                mem = mem0 + mem1
                if mem > budget_bytes:
                    continue
                merged.append((mem, cost0 + cost1, tuple(sorted(ids0 + ids1))))
        merged.sort(key=lambda e: (e[0], e[1], len(e[2]), e[2]))
        combos = []
        best_cost = np.inf
        for mem, total, ids in merged:
            if total < best_cost:
                combos.append((mem, total, ids))
                best_cost = total

    if not combos:
        raise ValueError("no feasible configuration within the memory budget")
    combos.sort(key=lambda e: (e[1], e[0], len(e[2]), e[2]))
    best_mem, _, best_ids = combos[0]
    chosen = [arm for arm in pool if arm.arm_id in best_ids]

    exec_series = np.array(
        [sim.execute(list(rq), chosen, use_noise=False).execution_s for rq in workload]
    )
    noindex_series = np.array(
        [sim.execute(list(rq), [], use_noise=False).execution_s for rq in workload]
    )
    creation = float(sum(arm.estimated_size for arm in chosen) / sim.cost_model.creation_rate)
    reward_series = noindex_series - exec_series
    if len(reward_series):
        reward_series = reward_series.copy()
        reward_series[0] -= creation

    return RegretBaseline(
        super_arm=SuperArm(arm_ids=frozenset(best_ids), total_cost=best_mem),
        arm_ids=tuple(sorted(best_ids)),
        creation_s=creation,
        exec_series=exec_series,
        noindex_series=noindex_series,
        reward_series=reward_series,
    )


def regret_series(
    report: ExperimentReport, baseline: RegretBaseline, alpha: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Instantaneous and cumulative shortfall against ``alpha`` times the baseline."""
    achieved = np.array(report.true_reward_series)
    targets = np.asarray(baseline.reward_series)
    if achieved.shape != targets.shape:
        raise ValueError(
            f"report has {achieved.size} rounds but baseline has {targets.size}"
        )
    instantaneous = alpha * targets - achieved
    return instantaneous, np.cumsum(instantaneous)


def attach_regret(
    report: ExperimentReport, baseline: RegretBaseline, alpha: float = 1.0
) -> ExperimentReport:
    """Fill the per-round regret column and cumulative series in place."""
    instantaneous, cumulative = regret_series(report, baseline, alpha)
    for record, value in zip(report.records, instantaneous):
        record.regret_s = float(value)
    report.regret_alpha = alpha
    report.cumulative_regret = [float(v) for v in cumulative]
    return report


def evaluate_fixed_config(
    scenario: Scenario,
    arms: Sequence[IndexArm],
    workload: Sequence[Sequence[SimQueryInstance]],
) -> np.ndarray:
    """Noise-free per-round execution times of a fixed configuration."""
    sim = SimDatabase(scenario.tables, scenario.cost_model, seed=0)
    return np.array(
        [sim.execute(list(rq), list(arms), use_noise=False).execution_s for rq in workload]
    )
