"""Pinned fixture files and their typed loader.

Files live under a versioned directory (``v1/``) next to a manifest that maps
each fixture name to its path, content type and sha256 checksum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..core import Trajectory
from ..errors import ChecksumMismatch, UnknownFixture
from ..optimizer import ClipSchedule, OptimizationBatch, SequenceLogProbs
from ..parser import parse_agent_output
from ..records import trajectory_from_record
from ..sim import EnvSpec

FIXTURE_VERSION = "v1"
FIXTURE_DIR = Path(__file__).resolve().parent / FIXTURE_VERSION


@dataclass(frozen=True)
class FixtureEntry:
    name: str
    path: Path
    kind: str
    sha256: str


@dataclass(frozen=True)
class SemanticSeed:
    rule_text: str
    source_instruction: str
    extra: dict


@dataclass(frozen=True)
class ExperientialSeed:
    summary: str
    trajectory: Trajectory


@dataclass(frozen=True)
class MemorySeed:
    semantic: tuple[SemanticSeed, ...]
    experiential: tuple[ExperientialSeed, ...]

    def apply(self, repo) -> None:
        """Insert the seed entries into a MemoryRepository, each with its pinned summary."""
        for s in self.semantic:
            repo.add_semantic_entry(s.rule_text, s.source_instruction)
        for e in self.experiential:
            repo.add_experiential_entry(e.trajectory, summarizer=lambda _t, text=e.summary: text)


@dataclass(frozen=True)
class OptimizerCase:
    batch: OptimizationBatch
    expected_objective: float
    raw: dict


class FixtureManifest:
    def __init__(self, directory: Path = FIXTURE_DIR):
        self.directory = Path(directory)
        data = json.loads((self.directory / "manifest.json").read_text(encoding="utf-8"))
        self.entries = {
            name: FixtureEntry(name, self.directory / d["path"], d["type"], d["sha256"])
            for name, d in data["fixtures"].items()
        }

    def names(self) -> list[str]:
        return sorted(self.entries)

    def entry(self, name: str) -> FixtureEntry:
        try:
            return self.entries[name]
        except KeyError:
            raise UnknownFixture(f"no fixture named {name!r}") from None

    def read_text(self, name: str) -> str:
        e = self.entry(name)
        raw = e.path.read_bytes()
        digest = hashlib.sha256(raw).hexdigest()
        if digest != e.sha256:
            raise ChecksumMismatch(f"fixture {name!r}: expected sha256 {e.sha256}, got {digest}")
        return raw.decode("utf-8")


_manifest: Optional[FixtureManifest] = None


def manifest() -> FixtureManifest:
    global _manifest
    if _manifest is None:
        _manifest = FixtureManifest()
    return _manifest


def fixture_path(name: str) -> Path:
    return manifest().entry(name).path


def _batch(d: dict) -> OptimizationBatch:
    groups = tuple(
        tuple(SequenceLogProbs(s["logp"], s["logp_old"], s["logp_ref"], s["reward"]) for s in g) for g in d["groups"]
    )
    sched = ClipSchedule(d["eps_low"], d["eps_init"], d["eps_end"], d["K"])
    return OptimizationBatch(groups, d["beta"], sched, d["k"])


def _semantic(d: dict) -> SemanticSeed:
    extra = {k: v for k, v in d.items() if k not in ("rule_text", "source_instruction")}
    return SemanticSeed(d["rule_text"], d["source_instruction"], extra)


def _experiential(d: dict) -> ExperientialSeed:
    return ExperientialSeed(d["summary"], trajectory_from_record(d["trajectory"]))


def _decode(kind: str, text: str) -> Any:
    if kind == "environment":
        return EnvSpec.from_dict(json.loads(text))
    if kind == "agent_output":
        return parse_agent_output(text)
    if kind == "text":
        return text
    if kind == "memory_seed":
        d = json.loads(text)
        return MemorySeed(tuple(_semantic(s) for s in d["semantic"]), tuple(_experiential(e) for e in d["experiential"]))
    if kind == "semantic_seed":
        return _semantic(json.loads(text))
    if kind == "experiential_seed":
        return _experiential(json.loads(text))
    if kind in ("episodic_scenario", "collaborative_scenario"):
        return json.loads(text)
    if kind == "parser_corpus":
        return [json.loads(line)["text"] for line in text.splitlines() if line.strip()]
    if kind == "optimizer_batches":
        return [OptimizerCase(_batch(d), d["expected_objective"], d) for d in json.loads(text)]
    if kind == "hashing_vectors":
        return [(d["input"], np.array([float.fromhex(v) for v in d["vector"]])) for d in json.loads(text)]
    if kind == "trajectories":
        return [trajectory_from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
    raise ValueError(f"unknown fixture type {kind!r}")


def load_fixture(name: str) -> Any:
    """Checksum-verified, typed content of a named fixture."""
    m = manifest()
    return _decode(m.entry(name).kind, m.read_text(name))


__all__ = [
    "FIXTURE_DIR",
    "FixtureManifest",
    "MemorySeed",
    "SemanticSeed",
    "ExperientialSeed",
    "OptimizerCase",
    "load_fixture",
    "fixture_path",
    "manifest",
]
