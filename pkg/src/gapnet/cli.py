"""Command line front end: generate, solve, campaign and dynamic."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import NoReturn, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from gapnet.campaign import CampaignConfig, published_table, run_campaign, summarize, write_campaign
from gapnet.campaign import solve as solve_instance
from gapnet.configuration import GRAPH_KINDS, MODES, VARIANTS, Configuration, ConfigurationError
from gapnet.model import (
    MODELS,
    InstanceFormatError,
    OracleTooLargeError,
    Status,
    generate,
    oracle_solve,
    read_instance,
    write_instance,
)
from gapnet.network import RoundCapExceeded, RunResult
from gapnet.scenario import ScenarioConfig, ScenarioError, random_scenario, simulate
from gapnet.utils import write_lines

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FEASIBLE = 1
EXIT_INFEASIBLE = 2
EXIT_ROUND_CAP = 3
EXIT_USAGE = 64
EXIT_PARSE = 65
EXIT_NO_INPUT = 66

STATUS_EXIT = {
    Status.OPTIMAL: EXIT_OK,
    Status.FEASIBLE: EXIT_FEASIBLE,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _model(value: str) -> str:
    if value.upper() not in MODELS:
        raise argparse.ArgumentTypeError(f"invalid model {value!r}; choose from {', '.join(MODELS)}")
    return value.upper()


def _solver_flags(parser: argparse.ArgumentParser, mode_default: Optional[str] = None) -> None:
    parser.add_argument("--graph", choices=GRAPH_KINDS, help="Communication schedule (default: cycle)")
    parser.add_argument("--mode", choices=MODES, default=mode_default, help="exact or first-incumbent")
    parser.add_argument("--variant", choices=VARIANTS, help="distributed or cloud")
    parser.add_argument("--round-cap", type=int, help="Abort after this many communication rounds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gapnet", description="Distributed branch-and-price for the Generalized Assignment Problem")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log per-round detail")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("generate", help="Write a random benchmark instance")
    gen.add_argument("--model", type=_model, required=True)
    gen.add_argument("--agents", type=int, required=True)
    gen.add_argument("--tasks", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, help="Output file (default: stdout)")

    solve = commands.add_parser("solve", help="Solve an instance file")
    solve.add_argument("instance", type=Path)
    _solver_flags(solve)
    solve.add_argument("--seed", type=int, default=0, help="Accepted for symmetry; runs are deterministic")
    solve.add_argument("--oracle", action="store_true", help="Also run the exhaustive oracle when small enough")
    solve.add_argument("--trace", type=Path, help="Write per-round trace records here")

    camp = commands.add_parser("campaign", help="Monte Carlo benchmark over random instances")
    camp.add_argument("--model", type=_model, default="A")
    camp.add_argument("--agents", type=int, default=5)
    camp.add_argument("--tasks", type=int, default=20)
    camp.add_argument("--trials", type=int, default=20)
    camp.add_argument("--seed", type=int, default=0, help="Seed of the first trial")
    _solver_flags(camp, mode_default="first-incumbent")
    camp.add_argument("--out", type=Path, help="Per-trial CSV; the summary goes to <out>.summary.csv")

    dyn = commands.add_parser("dynamic", help="Simulate dynamic task assignment for a robot fleet")
    dyn.add_argument("config", type=Path, nargs="?", help="Scenario JSON; a random scenario when omitted")
    dyn.add_argument("--robots", type=int, default=5)
    dyn.add_argument("--initial", type=int, default=5)
    dyn.add_argument("--queued", type=int, default=3)
    dyn.add_argument("--seed", type=int, help="Overrides the scenario seed")
    _solver_flags(dyn)
    dyn.add_argument("--out", type=Path, help="Event log file (default: stdout)")
    return parser


def configuration_from(args: argparse.Namespace) -> Configuration:
    """Environment defaults, overridden by the flags that were given."""
    overrides = {
        name: value
        for name, value in (
            ("graph", args.graph),
            ("mode", args.mode),
            ("variant", args.variant),
            ("round_cap", args.round_cap),
        )
        if value is not None
    }
    if getattr(args, "trace", None) is not None:
        overrides["trace"] = True
    return replace(Configuration(), **overrides).validate()


def cmd_generate(args: argparse.Namespace) -> int:
    instance = generate(args.model, args.agents, args.tasks, args.seed)
    write_instance(instance, args.out or sys.stdout)
    if args.out:
        logger.info(f"wrote model {args.model} instance N={args.agents} M={args.tasks} to {args.out}")
    return EXIT_OK


def _report(result: RunResult) -> list[str]:
    metrics = result.metrics
    cost = "none" if metrics.incumbent_cost is None else f"{metrics.incumbent_cost:g}"
    lines = [
        f"status: {metrics.status.value}",
        f"cost: {cost}",
        f"communication_rounds: {metrics.communication_rounds}",
        f"max_stored_nodes: {metrics.max_stored_nodes}",
        f"cloud_stored_nodes: {metrics.cloud_stored_nodes}",
        f"nodes_solved: {metrics.nodes_solved}",
    ]
    z = result.incumbent_z
    if z is not None:
        lines.append("assignment:")
        lines.extend(" ".join(str(int(v)) for v in row) for row in z)
    return lines


def cmd_solve(args: argparse.Namespace) -> int:
    config = configuration_from(args)
    instance = read_instance(args.instance)
    result = solve_instance(instance, config)
    print("\n".join(_report(result)))
    if args.oracle:
        try:
            report = oracle_solve(instance, config.oracle_guard)
        except OracleTooLargeError as e:
            logger.warning(str(e))
        else:
            cost = "none" if report.cost is None else f"{report.cost:g}"
            print(f"oracle_cost: {cost}")
    if args.trace:
        write_lines((record.line() for record in result.trace), args.trace)
    return STATUS_EXIT[result.metrics.status]


def cmd_campaign(args: argparse.Namespace) -> int:
    base = configuration_from(args)
    config = CampaignConfig(
        model=args.model,
        n_agents=args.agents,
        n_tasks=args.tasks,
        trials=args.trials,
        base_seed=args.seed,
        graph=base.graph,
        mode=base.mode,
        variant=base.variant,
        out=args.out,
    )
    rows = run_campaign(config, base)
    summary = summarize(rows)
    if config.out is not None:
        out, summary_path = write_campaign(rows, config.out)
        logger.info(f"wrote {len(rows)} rows to {out} and the summary to {summary_path}")
    print(summary.to_string(index=False))
    published = published_table()
    match = published[
        (published.model == config.model) & (published.N == config.n_agents) & (published.M == config.n_tasks)
    ]
    if not match.empty:
        print("published:")
        print(match.to_string(index=False))
    return EXIT_OK


def cmd_dynamic(args: argparse.Namespace) -> int:
    solver = configuration_from(args)
    if args.config is not None:
        scenario = ScenarioConfig.model_validate_json(args.config.read_text())
    else:
        scenario = random_scenario(args.robots, args.initial, args.queued, args.seed or 0)
    if args.seed is not None:
        scenario = scenario.model_copy(update={"seed": args.seed})

    try:
        log = simulate(scenario, solver)
    except ScenarioError as e:
        if e.log is not None and args.out is not None:
            write_lines(e.log.lines(), args.out)
        logger.error(str(e))
        return EXIT_ROUND_CAP if isinstance(e.__cause__, RoundCapExceeded) else EXIT_INFEASIBLE

    write_lines(log.lines(), args.out)
    for task, seconds in sorted(log.service_times().items()):
        logger.info(f"task {task} served {seconds:.2f}s after it appeared")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "campaign": cmd_campaign,
    "dynamic": cmd_dynamic,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    try:
        return COMMANDS[args.command](args)
    except (InstanceFormatError, ValidationError) as e:
        logger.error(f"cannot parse input: {e}")
        return EXIT_PARSE
    except ConfigurationError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except FileNotFoundError as e:
        logger.error(str(e))
        return EXIT_NO_INPUT
    except RoundCapExceeded as e:
        logger.error(str(e))
        return EXIT_ROUND_CAP
    except ValueError as e:
        logger.error(str(e))
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
