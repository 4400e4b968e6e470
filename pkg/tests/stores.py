"""Builders for randomized memory stores used by retrieval and persistence tests."""

from __future__ import annotations

import numpy as np

from mnemo.core import Action, BoundingBox, Instruction, Observation, Point, Trajectory, Transition, Widget
from mnemo.memory import MemoryRepository

WORDS = (
    "open settings enable battery saver mode login account order history cart search movie sports "
    "reminder clock message send photo gallery upload download pdf file manager wifi bluetooth "
    "alarm weather map route calendar event note share export report archive"
).split()
ROLES = ("button", "text", "icon", "switch", "textbox", "item")


def random_text(rng, lo=3, hi=9):
    return " ".join(rng.choice(WORDS, size=int(rng.integers(lo, hi))))


def random_observation(rng, sid):
    n = int(rng.integers(1, 5))
    widgets = tuple(
        Widget(f"w{i}", str(rng.choice(ROLES)), random_text(rng, 1, 3), BoundingBox(0.1, 0.2 * i, 0.9, 0.2 * i + 0.1))
        for i in range(n)
    )
    return Observation(sid, widgets)


def random_trajectory(rng, tid, goal=None, success=None):
    steps = int(rng.integers(1, 4))
    screens = [random_observation(rng, f"{tid}_s{i}") for i in range(steps + 1)]
    transitions = tuple(
        Transition(screens[i], Action("click", str(rng.choice(WORDS)), Point(0.5, 0.05 + 0.2 * i)), screens[i + 1], i + 1)
        for i in range(steps)
    )
    ok = bool(rng.random() < 0.6) if success is None else success
    return Trajectory(Instruction(goal or random_text(rng)), transitions, ok, tid)


def random_store(seed: int, n_semantic: int, n_experiential: int) -> MemoryRepository:
    rng = np.random.default_rng(seed)
    repo = MemoryRepository()
    for i in range(n_semantic):
        repo.add_semantic_entry(f"rule {i}: {random_text(rng)}", random_text(rng))
    for i in range(n_experiential):
        repo.add_experiential_entry(random_trajectory(rng, f"traj{i:05d}"))
    return repo
