"""Scripted stand-ins for a model policy.

Each policy maps ``(observation, instruction, retrieved context)`` to tagged
agent text, exactly what a real model would return, so the whole loop
(parsing included) is exercised.
"""

from __future__ import annotations

import re
from typing import Optional

from .core import Action, ActionKind, Instruction, Observation, Point, Trajectory, Widget
from .memory import RetrievedContext, template_summary
from .parser import ParsedAgentOutput, serialize_agent_output
from .sim import SolutionStep, TaskSpec

HINT = re.compile(r'[Pp]refer\s+"([^"]+)"')


def _coord(v: float) -> float:
    return round(v, 6)


def action_for(step: SolutionStep, obs: Observation, widget_id: Optional[str] = None) -> Action:
    """Concrete action that carries out ``step`` on the current screen."""
    wid = widget_id or step.widget
    if wid is None:
        return Action(step.kind, step.value)
    w = obs.widget(wid)
    if step.kind is ActionKind.SCROLL:
        return Action(step.kind, step.value, region=w.box)
    c = w.box.center
    return Action(step.kind, step.value or w.label, position=Point(_coord(c.x), _coord(c.y)))


def render(action: Action, obs: Observation, ctx: RetrievedContext, why: str) -> str:
    n_prev = len(ctx.episodic)
    progress = f"On screen {obs.screen_id} after {n_prev} recent step(s)."
    return serialize_agent_output(
        ParsedAgentOutput(
            progress_evaluation=progress,
            decision_rationale=why,
            history_summary=f"Next: {action}.",
            action=action,
        )
    )


def _give_up(obs: Observation, ctx: RetrievedContext) -> str:
    return render(Action(ActionKind.IMPOSSIBLE), obs, ctx, "No known way forward from this screen.")


class _Cursor:
    """Walks the task's ordered solution; the next step must match the current screen."""

    def __init__(self, task: TaskSpec):
        self.task = task
        self.pos = 0

    def reset(self) -> None:
        self.pos = 0

    def next_step(self, obs: Observation) -> Optional[SolutionStep]:
        steps = self.task.solution
        for i in range(self.pos, len(steps)):
            if steps[i].screen == obs.screen_id:
                self.pos = i + 1
                return steps[i]
        return None


class OraclePolicy(_Cursor):
    """Knows the full solution, hidden steps included."""

    def __call__(self, obs: Observation, instruction: Instruction, ctx: RetrievedContext) -> str:
        step = self.next_step(obs)
        if step is None:
            return _give_up(obs, ctx)
        return render(action_for(step, obs), obs, ctx, "Following the known solution path.")


def _hinted_widget(obs: Observation, ctx: RetrievedContext) -> Optional[Widget]:
    for summary in ctx.experiential:
        for label in HINT.findall(summary):
            for w in obs.widgets:
                if w.label == label:
                    return w
    return None


class ScriptedPolicy(_Cursor):
    """Follows the public part of the solution.

    At a hidden step it looks for a ``prefer "<label>"`` hint in the retrieved
    experiential summaries; without one (or with ``use_memory=False``) it picks
    the decoy widget.
    """

    def __init__(self, task: TaskSpec, use_memory: bool = True):
        super().__init__(task)
        self.use_memory = use_memory
        self._used_hints: list[str] = []

    def reset(self) -> None:
        super().reset()
        self._used_hints = []

    def summarize(self, traj: Trajectory) -> str:
        """Template summary plus the hints this episode relied on, so later episodes can reuse them."""
        text = template_summary(traj)
        for label in dict.fromkeys(self._used_hints):
            text += f' When the choice comes up again, prefer "{label}".'
        return text

    def __call__(self, obs: Observation, instruction: Instruction, ctx: RetrievedContext) -> str:
        step = self.next_step(obs)
        if step is None:
            return _give_up(obs, ctx)
        if not step.hidden:
            return render(action_for(step, obs), obs, ctx, "Following the scripted plan.")
        hinted = _hinted_widget(obs, ctx) if self.use_memory else None
        if hinted is not None:
            self._used_hints.append(hinted.label)
            return render(action_for(step, obs, hinted.widget_id), obs, ctx, f"Past experience says to use {hinted.label}.")
        return render(action_for(step, obs, step.decoy), obs, ctx, "Picking the first plausible option.")


class MalformedPolicy:
    """Always emits text without the required tags."""

    def __call__(self, obs: Observation, instruction: Instruction, ctx: RetrievedContext) -> str:
        return "I think I should click somewhere near the middle."


def make_policy(name: str, task: TaskSpec):
    if name == "oracle":
        return OraclePolicy(task)
    if name == "scripted":
        return ScriptedPolicy(task, use_memory=True)
    if name == "blind":
        return ScriptedPolicy(task, use_memory=False)
    if name == "malformed":
        return MalformedPolicy()
    raise ValueError(f"unknown policy {name!r}")
