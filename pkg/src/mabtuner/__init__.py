"""Online index tuning with a contextual combinatorial bandit.

The package pairs a semi-bandit learner (shared ridge regression with UCB
exploration and greedy knapsack selection) with a deterministic database
and workload simulator, so that tuning behaviour, regret and time
breakdowns can be measured reproducibly.
"""
from .arms import ContextVector, IndexArm, build_context, generate_arms
from .bandit import (
    ArmScore,
    LinearModelState,
    UcbParameters,
    constant_alpha,
    estimate_theta,
    forget,
    sqrt_log_alpha,
    ucb_score,
    update,
)
from .harness import (
    ExperimentReport,
    PoolTooLargeError,
    RegretBaseline,
    TuningParams,
    attach_regret,
    brute_force_optimum,
    regret_series,
    run_baseline_noindex,
    run_experiment,
)
from .query_store import QueryStore, QueryTemplateInfo
from .rewards import (
    ReferenceScanCache,
    RoundOutcome,
    arm_gain,
    arm_reward,
    super_arm_reward,
    table_scan_reference,
)
from .scenario import Scenario, ScenarioError, generate_workload, load_scenario, parse_scenario
from .selection import SelectionCandidate, SuperArm, select_super_arm, super_arm_value
from .simulator import CostModel, SimDatabase, SimQueryInstance, SimTable, TableAccess

__version__ = "0.1.0"
