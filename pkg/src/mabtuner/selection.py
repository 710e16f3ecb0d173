"""Greedy knapsack selection of an index configuration under a memory budget.

Selection alternates picking the highest-scoring feasible candidate with
filtering: candidates that no longer fit the remaining budget, candidates
whose key columns are a prefix of (or prefixed by) an already selected
index, and, when a covering index is picked, the other candidates generated
for the queries it covers.  Filtering is scoped to a single invocation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

__all__ = ["SelectionCandidate", "SuperArm", "select_super_arm", "super_arm_value"]


@dataclass(frozen=True)
class SelectionCandidate:
    """One index candidate as seen by the selection step.

    ``is_covering_for`` holds the template ids this index fully covers;
    ``source_templates`` the template ids whose predicates generated it.
    """

    arm_id: str
    score: float
    memory_cost: float
    key_columns: tuple[str, ...]
    table: str
    is_covering_for: frozenset[str] = frozenset()
    source_templates: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.memory_cost < 0:
            raise ValueError(f"memory cost must be >= 0, got {self.memory_cost}")


@dataclass(frozen=True)
class SuperArm:
    """A set of arms played together: one index configuration."""

    arm_ids: frozenset[str]
    total_cost: float

    @classmethod
    def empty(cls) -> "SuperArm":
        return cls(arm_ids=frozenset(), total_cost=0.0)


def _prefix_related(a: SelectionCandidate, b: SelectionCandidate) -> bool:
    """True when either candidate's key-column list is a prefix of the other's."""
    if a.table != b.table:
        return False
    shorter, longer = sorted((a.key_columns, b.key_columns), key=len)
    return longer[: len(shorter)] == shorter


def _covered_by_pick(candidate: SelectionCandidate, pick: SelectionCandidate) -> bool:
    """True when every template the candidate was generated for is covered by the pick."""
    return bool(
        pick.is_covering_for
        and candidate.source_templates
        and candidate.source_templates <= pick.is_covering_for
    )


def _greedy_pass(
    candidates: Iterable[SelectionCandidate], budget: float, by_density: bool
) -> list[SelectionCandidate]:
    def rank(c: SelectionCandidate) -> tuple[float, str]:
        if by_density:
            key = c.score / c.memory_cost if c.memory_cost > 0 else math.inf
        else:
            key = c.score
        return (-key, c.arm_id)

    pool = sorted(
        (c for c in candidates if c.score >= 0 and c.memory_cost <= budget),
        key=rank,
    )
    selected: list[SelectionCandidate] = []
    remaining = budget
    while pool:
        pick = pool.pop(0)
        selected.append(pick)
        remaining -= pick.memory_cost
        pool = [
            c
            for c in pool
            if c.memory_cost <= remaining
            and not _prefix_related(c, pick)
            and not _covered_by_pick(c, pick)
        ]
    return selected


def select_super_arm(
    candidates: Iterable[SelectionCandidate],
    budget: float,
    density_greedy: bool = False,
) -> SuperArm:
    """Greedily assemble the best-scoring configuration within ``budget``.

    Negative-score candidates are pruned up front.  Arms are picked by raw
    score; a second pass ordered by score per byte runs as a safeguard and
    its selection is returned only when it packs strictly more total score
    (raw-score greedy alone can be crowded out by one large arm and has no
    constant approximation guarantee; the pair is what keeps the selection
    near-optimal on knapsack-style pools).  ``density_greedy`` forces the
    density ordering alone.  Ties break on lexicographic arm id, making the
    result deterministic.
    """
    if budget < 0:
        raise ValueError(f"memory budget must be >= 0, got {budget}")
    candidates = list(candidates)
    if density_greedy:
        selected = _greedy_pass(candidates, budget, by_density=True)
    else:
        by_score = _greedy_pass(candidates, budget, by_density=False)
        by_density = _greedy_pass(candidates, budget, by_density=True)
        score_total = sum(c.score for c in by_score)
        density_total = sum(c.score for c in by_density)
        selected = by_density if density_total > score_total else by_score
    return SuperArm(
        arm_ids=frozenset(c.arm_id for c in selected),
        total_cost=sum(c.memory_cost for c in selected),
    )


def super_arm_value(scores: Mapping[str, float], s: SuperArm) -> float:
    """Sum of the member arms' scores; the objective the greedy step chases."""
    missing = [arm_id for arm_id in s.arm_ids if arm_id not in scores]
    if missing:
        raise ValueError(f"no score for arm(s): {sorted(missing)}")
    return float(sum(scores[arm_id] for arm_id in s.arm_ids))
