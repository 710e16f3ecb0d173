"""Command-line entry point: run experiments and compare methods.

Outputs are written per run directory and are byte-identical across
repeated invocations with the same configuration (pass ``--wall-clock`` to
trade that for measured recommendation times).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .harness import (
    ExperimentReport,
    PoolTooLargeError,
    TuningParams,
    attach_regret,
    brute_force_optimum,
    run_baseline_noindex,
    run_experiment,
)
from .scenario import Scenario, ScenarioError, load_scenario

__all__ = ["RunConfig", "cmd_run", "cmd_compare", "main", "parse_budget"]

OUTPUT_DIR_ENV = "MABTUNER_OUT"

CSV_COLUMNS = ("round", "c_rec_s", "c_cre_s", "c_exc_s", "reward_s", "regret_s", "config_ids")

DEFAULT_REGRET_ALPHA = 1.0 - 1.0 / math.e


@dataclass
class RunConfig:
    """Everything one experiment run needs."""

    scenario_path: str
    out_dir: str
    regime: str | None = None
    rounds: int | None = None
    budget: str = "1x"
    seed: int = 0
    params: TuningParams = field(default_factory=TuningParams)
    regret: bool = False
    regret_alpha: float = DEFAULT_REGRET_ALPHA
    baseline: str | None = None  # "noindex" replaces the learner
    wall_clock: bool = False
    label: str | None = None


def parse_budget(text: str, db_size_bytes: float) -> float:
    """Budget as absolute bytes ("500000000") or a data-size multiple ("1x")."""
    text = str(text).strip().lower()
    try:
        if text.endswith("x"):
            multiplier = float(text[:-1])
            if multiplier <= 0:
                raise ValueError
            return multiplier * db_size_bytes
        value = float(text)
        if value <= 0:
            raise ValueError
        return value
    except ValueError:
        raise ValueError(
            f"budget must be positive bytes or a multiplier like '0.5x', got {text!r}"
        ) from None


def _write_rounds_csv(path: Path, report: ExperimentReport) -> None:
    with path.open("w", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in report.records:
            writer.writerow(
                [
                    record.round_index,
                    repr(record.c_rec_s),
                    repr(record.c_cre_s),
                    repr(record.c_exc_s),
                    repr(record.reward_s),
                    "" if record.regret_s is None else repr(record.regret_s),
                    ";".join(record.config_ids),
                ]
            )


def _summary_payload(report: ExperimentReport, config: RunConfig, budget_bytes: float) -> dict:
    payload = {
        "method": report.method,
        "scenario": report.scenario_name,
        "regime": report.regime,
        "rounds": report.rounds,
        "seed": report.seed,
        "budget_bytes": budget_bytes,
        "breakdown_s": {
            "recommendation": report.recommendation_s,
            "creation": report.creation_s,
            "execution": report.execution_s,
            "total": report.total_s,
        },
        "forget_rounds": report.forget_rounds,
        "wall_clock": report.wall_clock,
    }
    if report.cumulative_regret is not None:
        payload["regret"] = {
            "alpha": report.regret_alpha,
            "cumulative": report.cumulative_regret[-1] if report.cumulative_regret else 0.0,
        }
    return payload


def _write_summary(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _execute_run(config: RunConfig, scenario: Scenario) -> tuple[ExperimentReport, float]:
    budget_bytes = parse_budget(config.budget, scenario.db_size_bytes)
    if config.baseline == "noindex":
        report = run_baseline_noindex(
            scenario, rounds=config.rounds, seed=config.seed, regime=config.regime
        )
    else:
        report = run_experiment(
            scenario,
            budget_bytes=budget_bytes,
            rounds=config.rounds,
            params=config.params,
            seed=config.seed,
            regime=config.regime,
            wall_clock=config.wall_clock,
        )
        if config.regret:
            baseline = brute_force_optimum(
                scenario,
                budget_bytes,
                rounds=config.rounds,
                seed=config.seed,
                regime=config.regime,
                max_key_width=config.params.max_key_width,
            )
            attach_regret(report, baseline, config.regret_alpha)
    return report, budget_bytes


def cmd_run(config: RunConfig) -> int:
    """Run one experiment and write rounds.csv plus summary.json."""
    try:
        scenario = load_scenario(config.scenario_path)
        report, budget_bytes = _execute_run(config, scenario)
    except (ScenarioError, PoolTooLargeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_rounds_csv(out_dir / "rounds.csv", report)
    _write_summary(out_dir / "summary.json", _summary_payload(report, config, budget_bytes))
    print(
        f"{report.method}: total {report.total_s:.3f}s "
        f"(rec {report.recommendation_s:.3f}s, cre {report.creation_s:.3f}s, "
        f"exc {report.execution_s:.3f}s) -> {out_dir}"
    )
    return 0


def cmd_compare(configs: list[RunConfig]) -> int:
    """Run several configurations and emit a combined breakdown table."""
    if not configs:
        print("error: nothing to compare", file=sys.stderr)
        return 2
    rows = []
    out_dir = Path(configs[0].out_dir)
    for config in configs:
        try:
            scenario = load_scenario(config.scenario_path)
            report, _ = _execute_run(config, scenario)
        except (ScenarioError, PoolTooLargeError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        rows.append(
            {
                "method": config.label or report.method,
                "recommendation_s": report.recommendation_s,
                "creation_s": report.creation_s,
                "execution_s": report.execution_s,
                "total_s": report.total_s,
            }
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "compare.csv"
    with csv_path.open("w", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["method", "recommendation_s", "creation_s", "execution_s", "total_s"])
        for row in rows:
            writer.writerow(
                [
                    row["method"],
                    repr(row["recommendation_s"]),
                    repr(row["creation_s"]),
                    repr(row["execution_s"]),
                    repr(row["total_s"]),
                ]
            )

    headers = ["Method", "Recommendation", "Creation", "Execution", "Total"]
    table = [
        [
            row["method"],
            f"{row['recommendation_s']:.3f}",
            f"{row['creation_s']:.3f}",
            f"{row['execution_s']:.3f}",
            f"{row['total_s']:.3f}",
        ]
        for row in rows
    ]
    widths = [max(len(h), *(len(r[i]) for r in table)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in table)
    text = "\n".join(lines) + "\n"
    (out_dir / "compare.txt").write_text(text)
    print(text, end="")
    return 0


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    parser.add_argument("--rounds", type=int, default=None, help="number of rounds (default: scenario)")
    parser.add_argument("--budget", default="1x", help="memory budget: bytes or multiplier like 1x")
    parser.add_argument("--regime", choices=("static", "shifting", "random"), default=None)
    parser.add_argument("--alpha", type=float, default=1.0, help="exploration boost factor")
    parser.add_argument(
        "--alpha-schedule", choices=("constant", "sqrt_log"), default="constant"
    )
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0, help="ridge regularisation")
    parser.add_argument("--max-key-width", type=int, default=3)
    parser.add_argument("--shift-threshold", type=float, default=0.6)
    parser.add_argument("--qoi-window", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--wall-clock", action="store_true", help="record real recommendation times (not reproducible)")
    parser.add_argument(
        "--out",
        default=None,
        help=f"output directory (default: ${OUTPUT_DIR_ENV} or ./mabtuner-out)",
    )


def _params_from_args(args: argparse.Namespace) -> TuningParams:
    return TuningParams(
        alpha=args.alpha,
        alpha_schedule=args.alpha_schedule,
        lam=args.lam,
        max_key_width=args.max_key_width,
        shift_threshold=args.shift_threshold,
        qoi_window=args.qoi_window,
    )


def _resolve_out(args: argparse.Namespace) -> str:
    return args.out or os.environ.get(OUTPUT_DIR_ENV) or "mabtuner-out"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mabtuner", description="Online index tuning experiments on a workload simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write per-round reports")
    _add_common_arguments(run)
    run.add_argument("--regret", action="store_true", help="compute regret against the best fixed configuration")
    run.add_argument("--regret-alpha", type=float, default=DEFAULT_REGRET_ALPHA)
    run.add_argument("--baseline", choices=("noindex",), default=None, help="run a baseline instead of the tuner")

    compare = sub.add_parser("compare", help="run tuner and baselines, emit a breakdown table")
    _add_common_arguments(compare)
    compare.add_argument(
        "--methods",
        default="mab,noindex",
        help="comma-separated subset of {mab,noindex} (default: mab,noindex)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = _resolve_out(args)
    base = RunConfig(
        scenario_path=args.scenario,
        out_dir=out_dir,
        regime=args.regime,
        rounds=args.rounds,
        budget=args.budget,
        seed=args.seed,
        params=_params_from_args(args),
        wall_clock=args.wall_clock,
    )
    if args.command == "run":
        base.regret = args.regret
        base.regret_alpha = args.regret_alpha
        base.baseline = args.baseline
        return cmd_run(base)

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = set(methods) - {"mab", "noindex"}
    if unknown or not methods:
        print(f"error: unknown methods {sorted(unknown)}", file=sys.stderr)
        return 2
    configs = []
    for method in methods:
        configs.append(
            replace(base, baseline="noindex" if method == "noindex" else None, label=method)
        )
    return cmd_compare(configs)


if __name__ == "__main__":
    sys.exit(main())
