"""Hierarchical test-time memory: episodic, semantic and experiential stores.

The episodic store is a per-episode list of transitions read through a sliding
window. Semantic entries pair a rule description with the embedding of the
instruction it was distilled from. Experiential entries hold whole
trajectories, a reflective summary, and two keys (instruction intent and first
screen) that are fused with weight ``lam`` at query time.

Retrieval is an exact scan: keys are stacked into a matrix and scored with one
matrix-vector product. Ties are broken by ascending entry id.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import records
from .core import Instruction, Observation, Trajectory, Transition
from .embeddings import EmbeddingProvider, HashingEmbedder, make_provider
from .errors import (
    CorruptStore,
    DimensionMismatch,
    DuplicateEntry,
    EmptyInput,
    EmptyTrajectory,
    InvalidLambda,
    NonMonotonicStep,
    VersionMismatch,
)

logger = logging.getLogger(__name__)

STORE_FORMAT_VERSION = 1
DEFAULT_HORIZON = 5
DEFAULT_TOP_K = 3
DEFAULT_LAMBDA = 0.5
# Scores are ranked at this many decimals. Hashed keys are scaled integer counts, so
# mathematically equal cosines are common and must not be ordered by rounding noise.
RANK_DECIMALS = 12

Summarizer = Callable[[Trajectory], str]


class RetrievalStrategy(str, enum.Enum):
    TOP_K = "top_k"
    MIXED = "mixed"
    SUCCESS_ONLY = "success_only"


# -- episodic ---------------------------------------------------------------


@dataclass
class EpisodicStore:
    horizon: int = DEFAULT_HORIZON
    transitions: list[Transition] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    def __len__(self) -> int:
        return len(self.transitions)

    def append(self, m: Transition) -> "EpisodicStore":
        if self.transitions and m.step_index <= self.transitions[-1].step_index:
            raise NonMonotonicStep(
                f"step {m.step_index} does not follow stored step {self.transitions[-1].step_index}"
            )
        self.transitions.append(m)
        return self

    def context(self, t: int, horizon: Optional[int] = None) -> list[Transition]:
        return episodic_context(self, t, self.horizon if horizon is None else horizon)

    def clear(self) -> None:
        self.transitions.clear()


def append_episodic(store: EpisodicStore, m: Transition) -> EpisodicStore:
    return store.append(m)


def episodic_context(store: EpisodicStore, t: int, horizon: int) -> list[Transition]:
    """Transitions with step index in ``[max(1, t - horizon), t - 1]``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be positive")
    lo = max(1, t - horizon)
    return [m for m in store.transitions if lo <= m.step_index <= t - 1]


# -- entries ----------------------------------------------------------------


@dataclass(frozen=True)
class SemanticEntry:
    entry_id: int
    rule_text: str
    source_instruction: str
    key: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class ExperientialEntry:
    entry_id: int
    trajectory: Trajectory = field(repr=False)
    summary: str
    intent_key: np.ndarray = field(repr=False, compare=False)
    task_key: np.ndarray = field(repr=False, compare=False)
    success: bool
    dedup_key: tuple[str, str]


class Hit(NamedTuple):
    text: str
    score: float
    entry_id: int


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def action_signature(traj: Trajectory) -> str:
    return json.dumps([records.action_to_dict(a) for a in traj.actions], separators=(",", ":"))


def dedup_key(traj: Trajectory) -> tuple[str, str]:
    return _sha(traj.goal.text), _sha(action_signature(traj))


def template_summary(traj: Trajectory) -> str:
    steps = " → ".join(a.kind.value for a in traj.actions)
    outcome = "success" if traj.success else "failure"
    return f"Goal: {traj.goal.text.rstrip('.')}. Steps: {steps}. Outcome: {outcome}."


# -- context ----------------------------------------------------------------


def _one_line(text: str) -> str:
    return " ".join(text.split())


def describe_transition(m: Transition) -> str:
    return f"({m.pre.screen_id}, {m.action}, {m.post.screen_id})"


@dataclass(frozen=True)
class RetrievedContext:
    episodic: tuple[Transition, ...] = ()
    semantic: tuple[str, ...] = ()
    experiential: tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)

    def is_empty(self) -> bool:
        return not (self.episodic or self.semantic or self.experiential)

    def render(self) -> str:
        """Prompt text: ``<EPI>..</EPI><SEM>..</SEM><EXP>..</EXP>``, one ``- item`` per line."""
        if self.is_empty():
            return ""

        def block(tag: str, items: Sequence[str]) -> str:
            body = "\n".join("- " + _one_line(s) for s in items)
            return f"<{tag}>{body}</{tag}>"

        return (
            block("EPI", [describe_transition(m) for m in self.episodic])
            + block("SEM", self.semantic)
            + block("EXP", self.experiential)
        )


def assemble_context(
    episodic: Sequence[Transition],
    semantic: Sequence[Hit],
    experiential: Sequence[Hit],
) -> RetrievedContext:
    return RetrievedContext(
        episodic=tuple(episodic),
        semantic=tuple(h.text for h in semantic),
        experiential=tuple(h.text for h in experiential),
        provenance={
            "episodic": [m.step_index for m in episodic],
            "semantic": [(h.entry_id, h.score) for h in semantic],
            "experiential": [(h.entry_id, h.score) for h in experiential],
        },
    )


# -- index ------------------------------------------------------------------


def _stack(vectors: Sequence[np.ndarray], dim: int) -> np.ndarray:
    if not vectors:
        return np.zeros((0, dim), dtype=np.float64)
    return np.ascontiguousarray(np.vstack(vectors), dtype=np.float64)


def _cosine_scores(keys: np.ndarray, query: np.ndarray) -> np.ndarray:
    qn = float(np.sqrt(np.dot(query, query)))
    if qn == 0.0 or keys.shape[0] == 0:
        return np.zeros(keys.shape[0], dtype=np.float64)
    kn = np.sqrt(np.einsum("ij,ij->i", keys, keys))
    dots = keys @ query
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(kn > 0.0, dots / (kn * qn), 0.0)
    return np.clip(scores, -1.0, 1.0)


def _top_k(ids: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("K must be positive")
    order = np.lexsort((ids, -np.round(scores, RANK_DECIMALS)))
    return order[:k]


@dataclass(frozen=True)
class _SemanticIndex:
    entries: tuple[SemanticEntry, ...]
    ids: np.ndarray
    keys: np.ndarray


@dataclass(frozen=True)
class _ExperientialIndex:
    entries: tuple[ExperientialEntry, ...]
    ids: np.ndarray
    intent: np.ndarray
    task: np.ndarray
    success: np.ndarray


class MemoryRepository:
    """The three-part memory repository.

    Reads run without locking against an immutable index snapshot; writes are
    serialized by an internal lock and publish a new snapshot when done, so a
    query sees either the state before a write or after it.
    """

    def __init__(
        self,
        provider: Optional[EmbeddingProvider] = None,
        horizon: int = DEFAULT_HORIZON,
        summarizer: Optional[Summarizer] = None,
    ):
        self.provider = provider or HashingEmbedder()
        self.dimension = self.provider.dimension
        self.episodic = EpisodicStore(horizon)
        self.summarizer = summarizer or template_summary
        self._lock = threading.Lock()
        self._semantic: list[SemanticEntry] = []
        self._experiential: list[ExperientialEntry] = []
        self._sem_pairs: set[tuple[str, str]] = set()
        self._dedup: set[tuple[str, str]] = set()
        self._traj_ids: set[str] = set()
        self._next_sem = 1
        self._next_exp = 1
        self._sem_index = self._build_semantic()
        self._exp_index = self._build_experiential()

    # sizes / accessors
    @property
    def semantic_entries(self) -> tuple[SemanticEntry, ...]:
        return self._sem_index.entries

    @property
    def experiential_entries(self) -> tuple[ExperientialEntry, ...]:
        return self._exp_index.entries

    def __repr__(self) -> str:
        return (
            f"MemoryRepository(provider={self.provider!r}, semantic={len(self.semantic_entries)}, "
            f"experiential={len(self.experiential_entries)})"
        )

    def _build_semantic(self) -> _SemanticIndex:
        entries = tuple(self._semantic)
        return _SemanticIndex(
            entries,
            np.array([e.entry_id for e in entries], dtype=np.int64),
            _stack([e.key for e in entries], self.dimension),
        )

    def _build_experiential(self) -> _ExperientialIndex:
        entries = tuple(self._experiential)
        return _ExperientialIndex(
            entries,
            np.array([e.entry_id for e in entries], dtype=np.int64),
            _stack([e.intent_key for e in entries], self.dimension),
            _stack([e.task_key for e in entries], self.dimension),
            np.array([e.success for e in entries], dtype=bool),
        )

    # -- semantic
    def add_semantic_entry(self, rule_text: str, source_instruction: str) -> int:
        if not rule_text or not source_instruction:
            raise EmptyInput("rule_text and source_instruction must be non-empty")
        key = self.provider.embed_text(source_instruction)
        with self._lock:
            pair = (rule_text, source_instruction)
            if pair in self._sem_pairs:
                raise DuplicateEntry(f"semantic rule already stored for {source_instruction!r}")
            entry = SemanticEntry(self._next_sem, rule_text, source_instruction, _frozen(key))
            self._insert_semantic(entry)
            self._sem_index = self._build_semantic()
            return entry.entry_id

    def _insert_semantic(self, entry: SemanticEntry) -> None:
        self._semantic.append(entry)
        self._sem_pairs.add((entry.rule_text, entry.source_instruction))
        self._next_sem = max(self._next_sem, entry.entry_id + 1)

    def retrieve_semantic(self, query: Instruction | str, k: int = DEFAULT_TOP_K) -> list[Hit]:
        text = query.text if isinstance(query, Instruction) else query
        return self.retrieve_semantic_by_vector(self.provider.embed_text(text), k)

    def retrieve_semantic_by_vector(self, qvec: np.ndarray, k: int = DEFAULT_TOP_K) -> list[Hit]:
        idx = self._sem_index
        qvec = self._check_query(qvec)
        scores = _cosine_scores(idx.keys, qvec)
        return [
            Hit(idx.entries[i].rule_text, float(scores[i]), int(idx.ids[i]))
            for i in _top_k(idx.ids, scores, k)
        ]

    # -- experiential
    def add_experiential_entry(self, traj: Trajectory, summarizer: Optional[Summarizer] = None) -> int:
        if len(traj.transitions) == 0:
            raise EmptyTrajectory(f"trajectory {traj.trajectory_id!r} has no transitions")
        dkey = dedup_key(traj)
        with self._lock:
            if dkey in self._dedup:
                raise DuplicateEntry(f"trajectory {traj.trajectory_id!r} duplicates a stored goal/action sequence")
            if traj.trajectory_id in self._traj_ids:
                raise DuplicateEntry(f"trajectory id {traj.trajectory_id!r} already stored")
        summary = (summarizer or self.summarizer)(traj)
        intent = self.provider.embed_text(traj.goal.text)
        task = self.provider.embed_observation(traj.transitions[0].pre)
        with self._lock:
            # re-check: another writer may have inserted while we embedded
            if dkey in self._dedup or traj.trajectory_id in self._traj_ids:
                raise DuplicateEntry(f"trajectory {traj.trajectory_id!r} already stored")
            entry = ExperientialEntry(
                self._next_exp, traj, summary, _frozen(intent), _frozen(task), traj.success, dkey
            )
            self._insert_experiential(entry)
            self._exp_index = self._build_experiential()
            return entry.entry_id

    def _insert_experiential(self, entry: ExperientialEntry) -> None:
        self._experiential.append(entry)
        self._dedup.add(entry.dedup_key)
        self._traj_ids.add(entry.trajectory.trajectory_id)
        self._next_exp = max(self._next_exp, entry.entry_id + 1)

    def retrieve_experiential(
        self,
        query: Instruction | str,
        obs: Observation,
        k: int = DEFAULT_TOP_K,
        lam: float = DEFAULT_LAMBDA,
        strategy: RetrievalStrategy | str = RetrievalStrategy.TOP_K,
    ) -> list[Hit]:
        text = query.text if isinstance(query, Instruction) else query
        return self.retrieve_experiential_by_vectors(
            self.provider.embed_text(text), self.provider.embed_observation(obs), k, lam, strategy
        )

    def retrieve_experiential_by_vectors(
        self,
        intent_q: np.ndarray,
        task_q: np.ndarray,
        k: int = DEFAULT_TOP_K,
        lam: float = DEFAULT_LAMBDA,
        strategy: RetrievalStrategy | str = RetrievalStrategy.TOP_K,
    ) -> list[Hit]:
        if not (0.0 <= lam <= 1.0):
            raise InvalidLambda(f"lambda must lie in [0, 1], got {lam!r}")
        strategy = RetrievalStrategy(strategy)
        idx = self._exp_index
        intent_q = self._check_query(intent_q)
        task_q = self._check_query(task_q)
        rows = np.arange(len(idx.entries))
        if strategy is RetrievalStrategy.SUCCESS_ONLY:
            rows = rows[idx.success]
        ids = idx.ids[rows]
        scores = lam * _cosine_scores(idx.intent[rows], intent_q) + (1.0 - lam) * _cosine_scores(idx.task[rows], task_q)
        return [
            Hit(idx.entries[rows[i]].summary, float(scores[i]), int(ids[i]))
            for i in _top_k(ids, scores, k)
        ]

    def _check_query(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.dimension,):
            raise DimensionMismatch(f"query has shape {q.shape}, repository dimension is {self.dimension}")
        return q

    # -- persistence
    def persist(self, directory: str | os.PathLike) -> dict:
        """Write the semantic and experiential stores under ``directory``.

        Returns the manifest. Embedding keys are written at full precision so a
        reloaded repository scores queries bit-identically.
        """
        directory = Path(directory)
        with self._lock:
            sem = self._sem_index.entries
            exp = self._exp_index.entries
        files = {
            "semantic.jsonl": "".join(
                records.dumps(
                    {
                        "format_version": STORE_FORMAT_VERSION,
                        "entry_id": e.entry_id,
                        "rule_text": e.rule_text,
                        "source_instruction": e.source_instruction,
                        "key": e.key.tolist(),
                    },
                    exact=True,
                )
                + "\n"
                for e in sem
            ),
            "experiential.jsonl": "".join(
                records.dumps(
                    {
                        "format_version": STORE_FORMAT_VERSION,
                        "entry_id": e.entry_id,
                        "trajectory_id": e.trajectory.trajectory_id,
                        "summary": e.summary,
                        "success": e.success,
                        "dedup_key": list(e.dedup_key),
                        "intent_key": e.intent_key.tolist(),
                        "task_key": e.task_key.tolist(),
                    },
                    exact=True,
                )
                + "\n"
                for e in exp
            ),
            "trajectories.jsonl": "".join(
                records.dumps(records.trajectory_to_record(e.trajectory), exact=True) + "\n" for e in exp
            ),
        }
        manifest = {
            "format_version": STORE_FORMAT_VERSION,
            "dimension": self.dimension,
            "provider": self.provider.kind,
            "counts": {"semantic": len(sem), "experiential": len(exp), "trajectories": len(exp)},
            "checksums": {name: _sha(text) for name, text in files.items()},
        }
        for name, text in files.items():
            records.atomic_write_text(directory / name, text)
        # manifest last: a crash mid-persist leaves a checksum mismatch, not silent mixing
        records.atomic_write_text(directory / "manifest", json.dumps(manifest, indent=2) + "\n")
        return manifest

    @classmethod
    def load(
        cls,
        directory: str | os.PathLike,
        provider: Optional[EmbeddingProvider] = None,
        horizon: int = DEFAULT_HORIZON,
        summarizer: Optional[Summarizer] = None,
    ) -> "MemoryRepository":
        directory = Path(directory)
        manifest_path = directory / "manifest"
        if not manifest_path.exists():
            if directory.exists() and any(
                (directory / n).exists() for n in ("semantic.jsonl", "experiential.jsonl", "trajectories.jsonl")
            ):
                raise CorruptStore(f"{directory} has store files but no manifest")
            return cls(provider, horizon, summarizer)
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise CorruptStore(f"unreadable manifest in {directory}: {exc}") from exc
        if not isinstance(manifest, dict):
            raise CorruptStore("manifest is not an object")
        if manifest.get("format_version") != STORE_FORMAT_VERSION:
            raise VersionMismatch(
                f"store format {manifest.get('format_version')!r}, expected {STORE_FORMAT_VERSION}"
            )
        dim = manifest.get("dimension")
        if provider is None:
            kind = manifest.get("provider")
            if kind != "hashing":
                raise VersionMismatch(f"store was built with provider {kind!r}; pass a matching provider")
            provider = make_provider("hashing", dim)
        if provider.dimension != dim:
            raise DimensionMismatch(f"store dimension {dim} != provider dimension {provider.dimension}")

        texts: dict[str, str] = {}
        for name, digest in manifest.get("checksums", {}).items():
            try:
                raw = (directory / name).read_bytes()
            except FileNotFoundError as exc:
                raise CorruptStore(f"missing store file {name}") from exc
            if hashlib.sha256(raw).hexdigest() != digest:
                raise CorruptStore(f"checksum mismatch for {name}")
            try:
                texts[name] = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorruptStore(f"{name} is not valid UTF-8") from exc
        for name in ("semantic.jsonl", "experiential.jsonl", "trajectories.jsonl"):
            if name not in texts:
                raise CorruptStore(f"manifest lists no checksum for {name}")

        repo = cls(provider, horizon, summarizer)
        try:
            trajs = {}
            for line in texts["trajectories.jsonl"].splitlines():
                t = records.trajectory_from_record(json.loads(line))
                trajs[t.trajectory_id] = t
            for line in texts["semantic.jsonl"].splitlines():
                r = json.loads(line)
                repo._insert_semantic(
                    SemanticEntry(r["entry_id"], r["rule_text"], r["source_instruction"], _frozen(np.array(r["key"])))
                )
            for line in texts["experiential.jsonl"].splitlines():
                r = json.loads(line)
                repo._insert_experiential(
                    ExperientialEntry(
                        r["entry_id"],
                        trajs[r["trajectory_id"]],
                        r["summary"],
                        _frozen(np.array(r["intent_key"])),
                        _frozen(np.array(r["task_key"])),
                        bool(r["success"]),
                        tuple(r["dedup_key"]),
                    )
                )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptStore(f"malformed store contents: {exc!r}") from exc
        counts = manifest.get("counts", {})
        if counts.get("semantic") != len(repo._semantic) or counts.get("experiential") != len(repo._experiential):
            raise CorruptStore("entry counts disagree with manifest")
        repo._sem_index = repo._build_semantic()
        repo._exp_index = repo._build_experiential()
        return repo


def _frozen(v: np.ndarray) -> np.ndarray:
    v = np.array(v, dtype=np.float64)
    v.setflags(write=False)
    return v


# functional aliases mirroring the operation names
def add_semantic_entry(repo: MemoryRepository, rule_text: str, source_instruction: str) -> int:
    return repo.add_semantic_entry(rule_text, source_instruction)


def retrieve_semantic(repo: MemoryRepository, query, k: int = DEFAULT_TOP_K) -> list[Hit]:
    return repo.retrieve_semantic(query, k)


def add_experiential_entry(repo: MemoryRepository, traj: Trajectory, summarizer: Optional[Summarizer] = None) -> int:
    return repo.add_experiential_entry(traj, summarizer)


def retrieve_experiential(repo: MemoryRepository, query, obs, k=DEFAULT_TOP_K, lam=DEFAULT_LAMBDA,
                          strategy=RetrievalStrategy.TOP_K) -> list[Hit]:
    return repo.retrieve_experiential(query, obs, k, lam, strategy)


def persist(repo: MemoryRepository, directory) -> dict:
    return repo.persist(directory)


def load(directory, provider: Optional[EmbeddingProvider] = None) -> MemoryRepository:
    return MemoryRepository.load(directory, provider)
