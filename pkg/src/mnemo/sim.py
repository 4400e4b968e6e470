"""Deterministic scripted GUI environment and the agent loop.

An environment is declared in a JSON fixture: screens are widget lists,
transitions fire on an action kind plus an optional widget hit-test and
optional value, and each task names its start screen, step budget, terminal
predicate and named sub-goals. Predicates look only at the current screen id
and the log of typed text.

Environment rewards are sparse: 1 on the step that satisfies the terminal
predicate, 0 otherwise. The hierarchical output reward lives in
:mod:`mnemo.rewards` and is applied offline.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .core import (
    Action,
    ActionKind,
    BoundingBox,
    Instruction,
    Observation,
    Point,
    Trajectory,
    Transition,
    Widget,
    validate_action,
)
from .errors import EpisodeFinished, MnemoError, UnknownTask
from .memory import (
    DEFAULT_HORIZON,
    DEFAULT_LAMBDA,
    DEFAULT_TOP_K,
    MemoryRepository,
    RetrievalStrategy,
    RetrievedContext,
    assemble_context,
    dedup_key,
)
from .parser import parse_agent_output

ENV_SCHEMA_VERSION = 1
MAX_JITTER = 0.05


@dataclass(frozen=True)
class Trigger:
    source: str
    kind: ActionKind
    target: str
    widget: Optional[str] = None
    value: Optional[str] = None


@dataclass(frozen=True)
class Predicate:
    screen: str
    typed: tuple[str, ...] = ()

    def holds(self, screen_id: str, typed_log: Sequence[str]) -> bool:
        return screen_id == self.screen and all(t in typed_log for t in self.typed)


@dataclass(frozen=True)
class SolutionStep:
    screen: str
    kind: ActionKind
    widget: Optional[str] = None
    value: Optional[str] = None
    hidden: bool = False  # the right widget is only knowable from memory
    decoy: Optional[str] = None  # what a policy without that memory picks instead


@dataclass(frozen=True)
class TaskSpec:
    name: str
    instruction: str
    start: str
    budget: int
    terminal: Predicate
    subgoals: dict[str, Predicate] = field(default_factory=dict)
    solution: tuple[SolutionStep, ...] = ()


@dataclass(frozen=True)
class EnvSpec:
    name: str
    screens: dict[str, tuple[Widget, ...]]
    triggers: tuple[Trigger, ...]
    tasks: dict[str, TaskSpec]
    gamma: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSpec":
        if d.get("schema_version") != ENV_SCHEMA_VERSION:
            raise ValueError(f"unsupported environment schema {d.get('schema_version')!r}")
        screens = {
            sid: tuple(Widget(w[0], w[1], w[2], BoundingBox(*w[3])) for w in s["widgets"])
            for sid, s in d["screens"].items()
        }
        triggers = tuple(
            Trigger(t["from"], ActionKind(t["kind"]), t["to"], t.get("widget"), t.get("value"))
            for t in d["transitions"]
        )
        tasks = {}
        for name, t in d["tasks"].items():
            tasks[name] = TaskSpec(
                name=name,
                instruction=t["instruction"],
                start=t["start"],
                budget=int(t.get("budget", 20)),
                terminal=_predicate(t["terminal"]),
                subgoals={g["goal"]: _predicate(g) for g in t.get("subgoals", [])},
                solution=tuple(
                    SolutionStep(
                        s["screen"], ActionKind(s["kind"]), s.get("widget"), s.get("value"),
                        bool(s.get("hidden", False)), s.get("decoy"),
                    )
                    for s in t.get("solution", [])
                ),
            )
        spec = cls(d["name"], screens, triggers, tasks, float(d.get("gamma", 1.0)))
        spec.check()
        return spec

    def check(self) -> None:
        for t in self.triggers:
            for sid in (t.source, t.target):
                if sid not in self.screens:
                    raise ValueError(f"{self.name}: transition references unknown screen {sid!r}")
            if t.widget is not None and t.widget not in {w.widget_id for w in self.screens[t.source]}:
                raise ValueError(f"{self.name}: widget {t.widget!r} not on screen {t.source!r}")
        for task in self.tasks.values():
            preds = [task.terminal, *task.subgoals.values()]
            screens = [task.start, *(p.screen for p in preds), *(s.screen for s in task.solution)]
            if any(sid not in self.screens for sid in screens):
                raise ValueError(f"{self.name}/{task.name}: unknown screen in task")


def _predicate(d: dict) -> Predicate:
    return Predicate(d["screen"], tuple(d.get("typed", ())))


def _jitter_widgets(widgets: Sequence[Widget], rng: random.Random, amount: float) -> tuple[Widget, ...]:
    out = []
    for w in widgets:
        b = w.box
        dx = round(rng.uniform(-amount, amount), 4)
        dy = round(rng.uniform(-amount, amount), 4)
        dx = min(max(dx, -b.x_min), 1.0 - b.x_max)
        dy = min(max(dy, -b.y_min), 1.0 - b.y_max)
        box = BoundingBox(*(round(v, 6) for v in (b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy)))
        out.append(Widget(w.widget_id, w.role, w.label, box))
    return tuple(out)


class ScriptedEnvironment:
    """One-episode-at-a-time POMDP over a declared screen graph.

    ``jitter`` (at most 0.05) shifts every widget box by a seeded random offset
    at reset, to exercise grounding tolerance; 0 disables it.
    """

    def __init__(self, spec: EnvSpec, seed: int = 0, jitter: float = 0.0):
        if not (0.0 <= jitter <= MAX_JITTER):
            raise ValueError(f"jitter must lie in [0, {MAX_JITTER}]")
        self.spec = spec
        self.seed = seed
        self.jitter = jitter
        self.gamma = spec.gamma
        self._screens: dict[str, Observation] = {}
        self._task: Optional[TaskSpec] = None
        self._current: Optional[Observation] = None
        self.typed_log: list[str] = []
        self.steps_used = 0
        self.done = True
        self.success = False

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def task(self) -> TaskSpec:
        if self._task is None:
            raise EpisodeFinished("no episode has been started")
        return self._task

    @property
    def instruction(self) -> Instruction:
        return Instruction(self.task.instruction)

    @property
    def observation(self) -> Observation:
        if self._current is None:
            raise EpisodeFinished("no episode has been started")
        return self._current

    def reset(self, task: str, seed: Optional[int] = None) -> Observation:
        if task not in self.spec.tasks:
            raise UnknownTask(f"task {task!r} is not declared in environment {self.spec.name!r}")
        seed = self.seed if seed is None else seed
        rng = random.Random(seed)
        self._screens = {}
        for sid in sorted(self.spec.screens):
            widgets = self.spec.screens[sid]
            if self.jitter > 0:
                widgets = _jitter_widgets(widgets, rng, self.jitter)
            self._screens[sid] = Observation(sid, widgets)
        self._task = self.spec.tasks[task]
        self._current = self._screens[self._task.start]
        self.typed_log = []
        self.steps_used = 0
        self.done = False
        self.success = False
        return self._current

    def _matches(self, trig: Trigger, action: Action) -> bool:
        if trig.kind is not action.kind:
            return False
        if trig.value is not None and action.value != trig.value:
            return False
        if trig.widget is not None:
            point = action.position
            if point is None and action.region is not None:
                point = action.region.center
            if point is None:
                return False
            hit = self._current.hit(point)
            if hit is None or hit.widget_id != trig.widget:
                return False
        return True

    def step(self, action: Action) -> tuple[Observation, float, bool]:
        if self.done:
            raise EpisodeFinished("episode is over; call reset()")
        validate_action(action)
        self.steps_used += 1
        if action.kind is ActionKind.TYPE_TEXT:
            self.typed_log.append(action.value)
        for trig in self.spec.triggers:
            if trig.source == self._current.screen_id and self._matches(trig, action):
                self._current = self._screens[trig.target]
                break
        if self.task.terminal.holds(self._current.screen_id, self.typed_log):
            self.done = True
            self.success = True
            return self._current, 1.0, True
        if action.kind in (ActionKind.COMPLETE, ActionKind.IMPOSSIBLE) or self.steps_used >= self.task.budget:
            self.done = True
        return self._current, 0.0, self.done


def reset(env: ScriptedEnvironment, task: str) -> Observation:
    return env.reset(task)


def step(env: ScriptedEnvironment, action: Action) -> tuple[Observation, float, bool]:
    return env.step(action)


# -- agent loop -------------------------------------------------------------

Policy = Callable[[Observation, Instruction, RetrievedContext], str]


@dataclass(frozen=True)
class EpisodeConfig:
    horizon: int = DEFAULT_HORIZON
    top_k: int = DEFAULT_TOP_K
    lam: float = DEFAULT_LAMBDA
    strategy: RetrievalStrategy = RetrievalStrategy.TOP_K
    failure_cap: int = 3
    seed: Optional[int] = None
    add_to_memory: bool = True


@dataclass(frozen=True)
class StepRecord:
    step_index: int  # env step this output was meant for
    output: str
    r_format: float
    reward: float


@dataclass(frozen=True)
class EpisodeResult:
    trajectory: Trajectory
    success: bool
    steps_used: int
    rewards: tuple[float, ...]
    records: tuple[StepRecord, ...]
    memory_entry: Optional[int] = None


def episode_id(env_name: str, task: str, goal: str, transitions: Sequence[Transition], success: bool) -> str:
    probe = Trajectory(Instruction(goal), tuple(transitions), success, "probe")
    digest = hashlib.sha256(("|".join(dedup_key(probe)) + f"|{success}").encode()).hexdigest()[:12]
    return f"{env_name}.{task}.{digest}"


def run_episode(
    env: ScriptedEnvironment,
    task: str,
    policy: Policy,
    memory: MemoryRepository,
    config: EpisodeConfig = EpisodeConfig(),
) -> EpisodeResult:
    """Observe, retrieve memory, act, step; repeat until the episode ends.

    Unparseable policy output counts as a failed step (format reward 0) and
    the loop retries until ``config.failure_cap`` such failures, at which
    point the episode ends as a failure. Policies with a ``reset()`` method
    have it called at the start of the episode, and a ``summarize(trajectory)``
    method, when present, writes the stored summary. A successful trajectory is added to
    experiential memory unless it duplicates a stored one.
    """
    obs = env.reset(task, config.seed)
    if hasattr(policy, "reset"):
        policy.reset()
    memory.episodic.clear()
    memory.episodic.horizon = config.horizon
    instruction = env.instruction
    transitions: list[Transition] = []
    rewards: list[float] = []
    records: list[StepRecord] = []
    failures = 0
    done = False
    while not done:
        t = len(transitions) + 1
        ctx = assemble_context(
            memory.episodic.context(t),
            memory.retrieve_semantic(instruction, config.top_k),
            memory.retrieve_experiential(instruction, obs, config.top_k, config.lam, config.strategy),
        )
        text = policy(obs, instruction, ctx)
        try:
            action = parse_agent_output(text).action
        except MnemoError:
            failures += 1
            records.append(StepRecord(t, text, 0.0, 0.0))
            if failures >= config.failure_cap:
                break
            continue
        post, reward, done = env.step(action)
        m = Transition(obs, action, post, t)
        memory.episodic.append(m)
        transitions.append(m)
        rewards.append(reward)
        records.append(StepRecord(t, text, 1.0, reward))
        obs = post

    success = env.success
    traj = Trajectory(
        goal=instruction,
        transitions=tuple(transitions),
        success=success,
        trajectory_id=episode_id(env.name, task, instruction.text, transitions, success),
        source=f"sim:{env.name}",
    )
    entry = None
    if success and config.add_to_memory:
        try:
            entry = memory.add_experiential_entry(traj, getattr(policy, "summarize", None))
        except MnemoError:
            entry = None  # duplicate of a stored trajectory
    return EpisodeResult(traj, success, env.steps_used, tuple(rewards), tuple(records), entry)


# -- sub-goal verification for hindsight relabeling -------------------------


class FixtureVerifier:
    """Sub-goal verifier driven by the sub-goal predicates of environment fixtures."""

    def __init__(self, specs: Sequence[EnvSpec]):
        self._by_instruction: dict[str, list[str]] = {}
        self._predicates: dict[str, Predicate] = {}
        for spec in specs:
            for task in spec.tasks.values():
                self._by_instruction.setdefault(task.instruction, []).extend(task.subgoals)
                self._predicates.update(task.subgoals)

    def candidates(self, traj: Trajectory) -> list[str]:
        return list(self._by_instruction.get(traj.goal.text, self._predicates))

    def verify(self, prefix: Sequence[Transition], goal: str) -> bool:
        pred = self._predicates.get(goal)
        if pred is None or not prefix:
            return False
        typed = [m.action.value for m in prefix if m.action.kind is ActionKind.TYPE_TEXT]
        return pred.holds(prefix[-1].post.screen_id, typed)
