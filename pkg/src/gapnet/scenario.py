"""Dynamic task assignment and servicing with a fleet of aerial and ground robots.

Robots move in straight lines at their top speed and serve the tasks the
latest allocation gave them, in shortest-path order. Every completed task
reveals the next queued one, and each reveal triggers a new cloud-assisted
solve over the tasks not yet in service, in first-incumbent mode. While a
solve is in flight the robots keep following their previous routes; a reveal
during a solve aborts it.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gapnet.configuration import Configuration
from gapnet.graph import run_cloud_assisted
from gapnet.model import GapInstance, Violation, assignment_choice, evaluate
from gapnet.network import RoundCapExceeded, schedule_for

logger = logging.getLogger(__name__)

RobotKind = Literal["aerial", "ground"]

DEFAULT_SPEEDS: dict[str, float] = {"aerial": 1.0, "ground": 0.22}
ARENA_SIZE = 4.0
MAX_ROUTE = 10
WEIGHT_LOW, WEIGHT_HIGH = 10, 25
HOLD_LOW, HOLD_HIGH = 3.0, 5.0


class RouteTooLongError(ValueError):
    """Raised when a route has too many tasks for exhaustive ordering."""


class ScenarioError(RuntimeError):
    """Raised when a scenario cannot proceed; `log` holds the events so far."""

    def __init__(self, message: str, log: Optional[ScenarioEventLog] = None):
        super().__init__(message)
        self.log = log


class Robot(BaseModel):
    """A robot of the fleet, as configured."""

    model_config = ConfigDict(frozen=True)

    id: int
    kind: RobotKind
    x: float
    y: float
    max_speed: Optional[float] = Field(default=None, gt=0, description="m/s; defaults by kind")
    capacity: Optional[float] = Field(
        default=None, gt=0, description="Capacity g_i; defaults to the largest weight times the open task count"
    )

    @property
    def speed(self) -> float:
        return self.max_speed if self.max_speed is not None else DEFAULT_SPEEDS[self.kind]


class Task(BaseModel):
    """A location a robot must reach and hold still at."""

    model_config = ConfigDict(frozen=True)

    id: int
    x: float
    y: float
    hold_time: Optional[float] = Field(
        default=None, ge=HOLD_LOW, le=HOLD_HIGH, description="Seconds; drawn uniformly when omitted"
    )
    access: tuple[RobotKind, ...] = Field(default=("aerial", "ground"), min_length=1)

    def accessible_by(self, robot: Robot) -> bool:
        return robot.kind in self.access


class ScenarioConfig(BaseModel):
    """Fleet, initial tasks and the queue of tasks revealed one per completion."""

    robots: list[Robot]
    tasks: list[Task] = Field(default_factory=list)
    arrivals: list[Task] = Field(default_factory=list)
    dt: float = Field(default=0.05, gt=0, description="Simulation step in seconds")
    seed: int = 0
    sample_period_s: float = Field(default=0.5, gt=0, description="Spacing of trajectory samples")
    horizon_s: float = Field(default=3600.0, gt=0, description="Simulated time after which the run is abandoned")

    @model_validator(mode="after")
    def _check_ids(self) -> ScenarioConfig:
        robot_ids = [r.id for r in self.robots]
        if len(set(robot_ids)) != len(robot_ids):
            raise ValueError("robot ids must be unique")
        task_ids = [t.id for t in (*self.tasks, *self.arrivals)]
        if len(set(task_ids)) != len(task_ids):
            raise ValueError("task ids must be unique across initial tasks and arrivals")
        kinds = {r.kind for r in self.robots}
        for task in (*self.tasks, *self.arrivals):
            if not kinds.intersection(task.access):
                raise ValueError(f"task {task.id} is accessible to no robot of the fleet")
        return self


@dataclass(frozen=True)
class ScenarioEvent:
    """One record of the event log; `robot` and `task` are kept for analysis, not printed."""

    time: float
    entity: str
    event: str
    x: Optional[float] = None
    y: Optional[float] = None
    robot: Optional[int] = None
    task: Optional[int] = None

    def line(self) -> str:
        x = "" if self.x is None else f"{self.x:.4f}"
        y = "" if self.y is None else f"{self.y:.4f}"
        return f"{self.time:.2f}, {self.entity}, {self.event}, {x}, {y}"


@dataclass(eq=False)
class Reoptimization:
    """A solve launched at `started`; its allocation applies at `finish` unless aborted."""

    started: float
    finish: float
    instance: Optional[GapInstance]
    task_ids: list[int]
    assignment: Optional[np.ndarray]
    rounds: int = 0
    aborted: bool = False


@dataclass(eq=False)
class ScenarioEventLog:
    """Time-ordered events plus the record of every solve."""

    events: list[ScenarioEvent] = field(default_factory=list)
    reoptimizations: list[Reoptimization] = field(default_factory=list)

    def add(self, event: ScenarioEvent) -> None:
        if self.events and event.time < self.events[-1].time:
            raise ValueError("events must be appended in time order")
        self.events.append(event)

    def of(self, kind: str) -> list[ScenarioEvent]:
        return [e for e in self.events if e.event == kind]

    def lines(self) -> list[str]:
        return [e.line() for e in self.events]

    def service_times(self) -> dict[int, float]:
        """Seconds from appearance to completion, per completed task."""
        appeared = {e.task: e.time for e in self.of("task-appeared")}
        return {e.task: e.time - appeared[e.task] for e in self.of("task-completed")}

    @property
    def makespan(self) -> float:
        completed = self.of("task-completed")
        return completed[-1].time if completed else 0.0


def capacity_for(robot: Robot, n_tasks: int) -> float:
    return robot.capacity if robot.capacity is not None else float(WEIGHT_HIGH * n_tasks)


def travel_time(robot: Robot, task: Task) -> float:
    return math.hypot(task.x - robot.x, task.y - robot.y) / robot.speed


def build_gap(
    robots: Sequence[Robot],
    tasks: Sequence[Task],
    weights: Optional[Mapping[tuple[int, int], int]] = None,
) -> GapInstance:
    """GAP over the open tasks with negated travel times as profits.

    `weights` maps (robot id, task id) to the frozen Model A weight of the
    pair; missing pairs weigh the low end of the range. Pairs a robot cannot
    access weigh one more than its capacity.
    """
    weights = weights or {}
    profits = np.array([[-travel_time(r, t) for t in tasks] for r in robots], dtype=float)
    capacities = np.array([capacity_for(r, len(tasks)) for r in robots], dtype=float)
    w = np.array(
        [
            [
                weights.get((r.id, t.id), WEIGHT_LOW) if t.accessible_by(r) else math.floor(g) + 1
                for t in tasks
            ]
            for r, g in zip(robots, capacities)
        ],
        dtype=float,
    )
    return GapInstance(profits=profits, weights=w, capacities=capacities)


def shpp_order(robot: Robot, tasks: Sequence[Task]) -> tuple[list[Task], float]:
    """Shortest open path from the robot's position through every task.

    Exhaustive over permutations; among equal lengths the first permutation
    in lexicographic order of the input wins.
    """
    if len(tasks) > MAX_ROUTE:
        raise RouteTooLongError(f"{len(tasks)} tasks exceed the exhaustive ordering limit of {MAX_ROUTE}")
    best: tuple[int, ...] = ()
    best_length = 0.0 if not tasks else math.inf
    for order in itertools.permutations(range(len(tasks))):
        length, x, y = 0.0, robot.x, robot.y
        for k in order:
            length += math.hypot(tasks[k].x - x, tasks[k].y - y)
            x, y = tasks[k].x, tasks[k].y
        if length < best_length - 1e-12:
            best, best_length = order, length
    return [tasks[k] for k in best], best_length


@dataclass(eq=False)
class _RobotState:
    robot: Robot
    x: float
    y: float
    route: list[int] = field(default_factory=list)
    serving: Optional[int] = None
    hold_until: float = 0.0

    def here(self) -> Robot:
        return self.robot.model_copy(update={"x": self.x, "y": self.y})

    @property
    def entity(self) -> str:
        return f"robot-{self.robot.id}"


class _Simulation:
    def __init__(self, config: ScenarioConfig, solver: Configuration):
        self.config = config
        self.solver = solver
        rng = np.random.default_rng(config.seed)
        every = [*config.tasks, *config.arrivals]
        # Model A weights and hold times are drawn once and stay fixed
        draws = rng.integers(WEIGHT_LOW, WEIGHT_HIGH + 1, size=(len(config.robots), len(every)))
        self.weights = {
            (r.id, t.id): int(draws[i, j]) for i, r in enumerate(config.robots) for j, t in enumerate(every)
        }
        self.hold = {
            t.id: t.hold_time if t.hold_time is not None else float(rng.uniform(HOLD_LOW, HOLD_HIGH))
            for t in every
        }
        self.robots = [_RobotState(robot=r, x=r.x, y=r.y) for r in config.robots]
        self.open: dict[int, Task] = {}
        self.queue = deque(config.arrivals)
        self.log = ScenarioEventLog()
        self.pending: Optional[Reoptimization] = None

    def in_service(self) -> set[int]:
        return {s.serving for s in self.robots if s.serving is not None}

    def reveal(self, task: Task, t: float) -> None:
        self.open[task.id] = task
        self.log.add(ScenarioEvent(t, f"task-{task.id}", "task-appeared", task.x, task.y, task=task.id))

    def start(self, t: float) -> Reoptimization:
        busy = self.in_service()
        ids = sorted(i for i in self.open if i not in busy)
        self.log.add(ScenarioEvent(t, "solver", "reoptimization-started"))
        if not ids:
            run = Reoptimization(started=t, finish=t, instance=None, task_ids=[], assignment=None)
            self.log.reoptimizations.append(run)
            return run
        instance = build_gap([s.here() for s in self.robots], [self.open[i] for i in ids], self.weights)
        schedule = schedule_for(self.solver, len(self.robots))
        try:
            result = run_cloud_assisted(instance, schedule, self.solver)
        except RoundCapExceeded as e:
            self.log.add(ScenarioEvent(t, "solver", "reoptimization-failed"))
            raise ScenarioError(f"re-optimization at t={t:.2f} hit the round cap", self.log) from e
        z = result.incumbent_z
        if z is None:
            raise ScenarioError(f"no feasible allocation of {len(ids)} tasks at t={t:.2f}", self.log)
        check = evaluate(instance, z)
        if isinstance(check, Violation):
            raise ScenarioError(f"allocation at t={t:.2f} violates {check.kind} {check.index}", self.log)
        rounds = result.metrics.communication_rounds
        run = Reoptimization(
            started=t,
            finish=t + rounds * self.solver.round_period_s,
            instance=instance,
            task_ids=ids,
            assignment=z,
            rounds=rounds,
        )
        self.log.reoptimizations.append(run)
        logger.debug(f"t={t:.2f}: solved {len(ids)} tasks in {rounds} rounds")
        return run

    def apply(self, run: Reoptimization, t: float) -> None:
        busy = self.in_service()
        choice = assignment_choice(run.assignment) if run.assignment is not None else []
        for i, state in enumerate(self.robots):
            mine = [
                self.open[task_id]
                for task_id, agent in zip(run.task_ids, choice)
                if agent == i and task_id in self.open and task_id not in busy
            ]
            order, _ = shpp_order(state.here(), mine)
            state.route = [task.id for task in order]
        self.log.add(ScenarioEvent(t, "solver", "reoptimization-finished"))

    def advance(self, state: _RobotState, t: float) -> bool:
        """Move or hold one robot for a step; True when it completed a task."""
        dt = self.config.dt
        if state.serving is not None:
            if t < state.hold_until - 1e-9:
                return False
            task = state.serving
            self.log.add(
                ScenarioEvent(t, f"task-{task}", "task-completed", state.x, state.y, robot=state.robot.id, task=task)
            )
            del self.open[task]
            state.serving = None
            return True

        busy = self.in_service()
        state.route = [i for i in state.route if i in self.open and i not in busy]
        if not state.route:
            return False
        target = self.open[state.route[0]]
        step = state.robot.speed * dt
        distance = math.hypot(target.x - state.x, target.y - state.y)
        if distance > step:
            state.x += (target.x - state.x) * step / distance
            state.y += (target.y - state.y) * step / distance
            return False
        if not target.accessible_by(state.robot):
            raise ScenarioError(f"robot {state.robot.id} cannot access task {target.id}", self.log)
        state.x, state.y = target.x, target.y
        state.route.pop(0)
        state.serving = target.id
        state.hold_until = t + self.hold[target.id]
        self.log.add(
            ScenarioEvent(t, f"task-{target.id}", "task-started", state.x, state.y, robot=state.robot.id, task=target.id)
        )
        return False

    def sample(self, t: float) -> None:
        for state in self.robots:
            self.log.add(ScenarioEvent(t, state.entity, "position", state.x, state.y, robot=state.robot.id))

    def run(self) -> ScenarioEventLog:
        config = self.config
        if not config.tasks and not config.arrivals:
            return self.log
        if not self.robots:
            raise ScenarioError("tasks but no robots", self.log)

        for task in config.tasks:
            self.reveal(task, 0.0)
        if not self.open:
            self.reveal(self.queue.popleft(), 0.0)
        self.pending = self.start(0.0)

        sample_every = max(1, round(config.sample_period_s / config.dt))
        k = 0
        while self.open or self.queue:
            t = k * config.dt
            if t > config.horizon_s:
                raise ScenarioError(f"tasks still open after {config.horizon_s:g} s", self.log)
            if k % sample_every == 0:
                self.sample(t)
            if self.pending is not None and t >= self.pending.finish - 1e-9:
                self.apply(self.pending, t)
                self.pending = None

            revealed = False
            for state in self.robots:
                if self.advance(state, t) and self.queue:
                    self.reveal(self.queue.popleft(), t)
                    revealed = True
            if revealed:
                if self.pending is not None:
                    self.pending.aborted = True
                    self.log.add(ScenarioEvent(t, "solver", "reoptimization-aborted"))
                self.pending = self.start(t)
            k += 1

        logger.info(
            f"scenario finished at t={self.log.makespan:.2f}s after "
            f"{len(self.log.reoptimizations)} re-optimizations"
        )
        return self.log


def simulate(config: ScenarioConfig, solver: Optional[Configuration] = None) -> ScenarioEventLog:
    """Run a scenario to completion; the solver always runs cloud-assisted in first-incumbent mode."""
    solver = replace(solver or Configuration(), mode="first-incumbent", variant="cloud").validate()
    return _Simulation(config, solver).run()


def random_scenario(n_robots: int, n_initial: int, n_queued: int, seed: int) -> ScenarioConfig:
    """A seeded desk-scale scenario in a 4 m by 4 m arena.

    About half the fleet (rounded up) is aerial. Each task is accessible to
    aerial robots only, ground robots only, or both, restricted to kinds
    actually present in the fleet.
    """
    if n_robots < 1:
        raise ValueError("a scenario needs at least one robot")
    rng = np.random.default_rng(seed)
    kinds: list[RobotKind] = ["aerial"] * math.ceil(n_robots / 2) + ["ground"] * (n_robots // 2)
    robots = [
        Robot(id=i, kind=kind, x=float(rng.uniform(0, ARENA_SIZE)), y=float(rng.uniform(0, ARENA_SIZE)))
        for i, kind in enumerate(kinds)
    ]
    present = set(kinds)
    patterns = [p for p in (("aerial",), ("ground",), ("aerial", "ground")) if set(p) <= present]

    def task(i: int) -> Task:
        return Task(
            id=i,
            x=float(rng.uniform(0, ARENA_SIZE)),
            y=float(rng.uniform(0, ARENA_SIZE)),
            hold_time=float(rng.uniform(HOLD_LOW, HOLD_HIGH)),
            access=patterns[int(rng.integers(len(patterns)))],
        )

    tasks = [task(i) for i in range(n_initial)]
    arrivals = [task(i) for i in range(n_initial, n_initial + n_queued)]
    return ScenarioConfig(robots=robots, tasks=tasks, arrivals=arrivals, seed=seed)
