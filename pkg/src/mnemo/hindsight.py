"""Hindsight goal-shifting and dataset split construction.

A failed trajectory whose prefix happens to accomplish some other valid
sub-goal is turned into a successful sample for that sub-goal. Only the
shortest accepting prefix is kept per sub-goal.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

from .core import Instruction, Trajectory, Transition
from .errors import InsufficientPool
from .memory import action_signature
from .records import atomic_write_text, dumps, trajectory_to_record


class SubGoalVerifier(Protocol):
    def candidates(self, traj: Trajectory) -> Sequence[str]:
        """Alternative goals worth testing against prefixes of ``traj``."""

    def verify(self, prefix: Sequence[Transition], goal: str) -> bool:
        """Whether executing ``prefix`` accomplishes ``goal``."""


@dataclass(frozen=True)
class Sample:
    sample_id: str
    trajectory: Trajectory
    origin_id: str
    prefix_length: int
    goal: str
    source: str  # "collected", "relabeled", "expert", ...

    def provenance(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "origin_id": self.origin_id,
            "prefix_length": self.prefix_length,
            "goal": self.goal,
            "source": self.source,
        }


def relabel_trajectory(traj: Trajectory, verifier: SubGoalVerifier) -> list[Sample]:
    """Relabel a failed trajectory against every candidate sub-goal.

    For each candidate the shortest prefix (k >= 1 transitions) that verifies is
    emitted as a successful trajectory with that goal. Output is ordered by
    prefix length, then candidate order.
    """
    if traj.success:
        raise ValueError(f"trajectory {traj.trajectory_id!r} succeeded; only failures are relabeled")
    out = []
    seen: set[str] = set()
    for ci, goal in enumerate(verifier.candidates(traj)):
        if goal in seen or not goal.strip():
            continue
        seen.add(goal)
        for k in range(1, len(traj.transitions) + 1):
            prefix = traj.transitions[:k]
            if verifier.verify(prefix, goal):
                relabeled = Trajectory(
                    goal=Instruction(goal),
                    transitions=prefix,
                    success=True,
                    trajectory_id=f"{traj.trajectory_id}/gs{ci}k{k}",
                    source="relabeled",
                )
                out.append(Sample(relabeled.trajectory_id, relabeled, traj.trajectory_id, k, goal, "relabeled"))
                break
    out.sort(key=lambda s: s.prefix_length)  # stable: candidate order within equal k
    return out


def relabel_pool(pool: Iterable[Trajectory], verifier: SubGoalVerifier) -> list[Sample]:
    """Relabel every failed trajectory; successes are skipped. Ordered by (trajectory id, k)."""
    failed = sorted((t for t in pool if not t.success), key=lambda t: t.trajectory_id)
    return [s for t in failed for s in relabel_trajectory(t, verifier)]


@dataclass(frozen=True)
class FilterConfig:
    min_steps: int = 2


def filter_trajectories(pool: Iterable[Trajectory], config: FilterConfig = FilterConfig()) -> list[Trajectory]:
    """Drop short trajectories, blank goals, and repeated (goal, actions) pairs; keep order."""
    kept = []
    seen: set[tuple[str, str]] = set()
    for t in pool:
        if len(t.transitions) < config.min_steps or not t.goal.text.strip():
            continue
        key = (t.goal.text, action_signature(t))
        if key in seen:
            continue
        seen.add(key)
        kept.append(t)
    return kept


def as_samples(pool: Iterable[Trajectory], source: Optional[str] = None) -> list[Sample]:
    """Wrap whole trajectories as samples (prefix length = full length)."""
    return [
        Sample(t.trajectory_id, t, t.trajectory_id, len(t.transitions), t.goal.text, source or t.source or "collected")
        for t in pool
    ]


@dataclass(frozen=True)
class DatasetSplit:
    ground: tuple[Sample, ...]
    evolve: tuple[Sample, ...]
    unassigned: tuple[Sample, ...]
    seed: int

    def manifest(self) -> dict:
        return {
            "format_version": 1,
            "record": "split_manifest",
            "seed": self.seed,
            "counts": {"ground": len(self.ground), "evolve": len(self.evolve), "unassigned": len(self.unassigned)},
            "ground": [s.provenance() for s in self.ground],
            "evolve": [s.provenance() for s in self.evolve],
        }


def build_splits(pool: Sequence[Sample], quotas: tuple[int, int], seed: int) -> DatasetSplit:
    n_ground, n_evolve = quotas
    if n_ground < 0 or n_evolve < 0:
        raise ValueError("quotas must be non-negative")
    if len(pool) < n_ground + n_evolve:
        raise InsufficientPool(f"pool of {len(pool)} cannot fill quotas ({n_ground}, {n_evolve})")
    ids = [s.sample_id for s in pool]
    if len(set(ids)) != len(ids):
        raise ValueError("sample ids must be unique")
    order = list(range(len(pool)))
    random.Random(seed).shuffle(order)
    shuffled = [pool[i] for i in order]
    return DatasetSplit(
        ground=tuple(shuffled[:n_ground]),
        evolve=tuple(shuffled[n_ground : n_ground + n_evolve]),
        unassigned=tuple(shuffled[n_ground + n_evolve :]),
        seed=seed,
    )


def write_split(split: DatasetSplit, directory) -> None:
    """``ground.records``, ``evolve.records`` and ``split_manifest.json`` under ``directory``."""
    directory = Path(directory)
    for name, samples in (("ground", split.ground), ("evolve", split.evolve)):
        lines = []
        for s in samples:
            rec = trajectory_to_record(s.trajectory)
            rec["provenance"] = s.provenance()
            lines.append(dumps(rec) + "\n")
        atomic_write_text(directory / f"{name}.records", "".join(lines))
    atomic_write_text(directory / "split_manifest.json", dumps(split.manifest()) + "\n")


def split_digest(split: DatasetSplit) -> str:
    return hashlib.sha256(json.dumps(split.manifest(), sort_keys=True).encode()).hexdigest()
