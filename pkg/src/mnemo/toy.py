"""A tabular softmax policy for checking the optimizer's gradients end to end.

Logits live in an array indexed by ``(state, position, token)``. A sequence is
a state plus a token list; its log-probs are read off ``log_softmax`` of the
matching rows. Gradients of the SFT loss and of the GRPO objective with respect
to every logit are computed analytically (chain rule through
:func:`mnemo.optimizer.grpo_logp_gradient`) and compared with central finite
differences of the full forward computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .optimizer import (
    ClipSchedule,
    OptimizationBatch,
    SequenceLogProbs,
    clip_boundary_distance,
    grpo_logp_gradient,
    grpo_objective,
    sft_logp_gradient,
    sft_loss,
)

REL_ERR_FLOOR = 1e-6


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class ToySoftmaxPolicy:
    logits: np.ndarray  # (n_states, max_len, vocab)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.logits.shape

    def probs(self) -> np.ndarray:
        return np.exp(log_softmax(self.logits))

    def token_logps(self, state: int, tokens: Sequence[int], logits: np.ndarray | None = None) -> np.ndarray:
        table = log_softmax(self.logits if logits is None else logits)
        return np.array([table[state, t, tok] for t, tok in enumerate(tokens)])


@dataclass(frozen=True)
class ToySequence:
    state: int
    tokens: tuple[int, ...]
    reward: float = 0.0


@dataclass
class ToyProblem:
    policy: ToySoftmaxPolicy
    old_logits: np.ndarray
    ref_logits: np.ndarray
    groups: list[list[ToySequence]]
    beta: float = 0.04
    schedule: ClipSchedule = field(default_factory=ClipSchedule)
    k: float = 0

    def batch(self, logits: np.ndarray | None = None) -> OptimizationBatch:
        logits = self.policy.logits if logits is None else logits
        old = log_softmax(self.old_logits)
        ref = log_softmax(self.ref_logits)
        cur = log_softmax(logits)
        groups = []
        for g in self.groups:
            seqs = []
            for s in g:
                pos = np.arange(len(s.tokens))
                tok = np.asarray(s.tokens)
                seqs.append(
                    SequenceLogProbs(cur[s.state, pos, tok], old[s.state, pos, tok], ref[s.state, pos, tok], s.reward)
                )
            groups.append(seqs)
        return OptimizationBatch(groups, self.beta, self.schedule, self.k)

    def sequences(self) -> list[ToySequence]:
        return [s for g in self.groups for s in g]


def grpo_loss(problem: ToyProblem, logits: np.ndarray | None = None) -> float:
    return -grpo_objective(problem.batch(logits)).objective


def toy_sft_loss(problem: ToyProblem, logits: np.ndarray | None = None) -> float:
    seqs = problem.sequences()
    return sft_loss([problem.policy.token_logps(s.state, s.tokens, logits) for s in seqs])


def _chain(problem: ToyProblem, dlogp: list[np.ndarray]) -> np.ndarray:
    """Map d/d logp(token) onto the logits table: d logp / d logits = onehot - softmax."""
    probs = problem.policy.probs()
    grad = np.zeros_like(problem.policy.logits)
    for s, d in zip(problem.sequences(), dlogp):
        for t, (tok, dt) in enumerate(zip(s.tokens, d)):
            row = -probs[s.state, t] * dt
            row[tok] += dt
            grad[s.state, t] += row
    return grad


def analytic_grad(problem: ToyProblem, objective: str = "grpo") -> np.ndarray:
    """Gradient of the loss (``-J`` for grpo, the NLL for sft) w.r.t. the logits."""
    if objective == "grpo":
        per_group = grpo_logp_gradient(problem.batch())
        return -_chain(problem, [d for g in per_group for d in g])
    if objective == "sft":
        seqs = problem.sequences()
        logps = [problem.policy.token_logps(s.state, s.tokens) for s in seqs]
        return _chain(problem, sft_logp_gradient(logps))
    raise ValueError(f"unknown objective {objective!r}")


def numeric_grad(problem: ToyProblem, objective: str = "grpo", h: float = 1e-5) -> np.ndarray:
    f = grpo_loss if objective == "grpo" else toy_sft_loss
    base = problem.policy.logits
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus = base.copy()
        plus[idx] += h
        minus = base.copy()
        minus[idx] -= h
        grad[idx] = (f(problem, plus) - f(problem, minus)) / (2 * h)
    return grad


def max_relative_error(a: np.ndarray, b: np.ndarray, floor: float = REL_ERR_FLOOR) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def toy_policy_gradient_check(problem: ToyProblem, h: float = 1e-5, objective: str = "grpo") -> float:
    """Max relative error between analytic and central-difference gradients."""
    return max_relative_error(analytic_grad(problem, objective), numeric_grad(problem, objective, h))


def random_problem(
    rng: np.random.Generator,
    vocab: int = 6,
    max_len: int = 5,
    n_states: int = 2,
    n_groups: int = 2,
    group_size: int = 4,
    beta: float = 0.04,
    schedule: ClipSchedule | None = None,
    k: float | None = None,
    drift: float = 0.4,
) -> ToyProblem:
    """A random toy problem; ``drift`` scales how far old/ref logits sit from the current ones."""
    schedule = schedule or ClipSchedule(total_steps=100)
    logits = rng.normal(size=(n_states, max_len, vocab))
    old = logits + drift * rng.normal(size=logits.shape)
    ref = logits + drift * rng.normal(size=logits.shape)
    groups = []
    for _ in range(n_groups):
        state = int(rng.integers(n_states))
        g = []
        for _ in range(group_size):
            length = int(rng.integers(1, max_len + 1))
            tokens = tuple(int(t) for t in rng.integers(vocab, size=length))
            g.append(ToySequence(state, tokens, float(rng.random())))
        groups.append(g)
    if k is None:
        k = int(rng.integers(0, schedule.total_steps + 1))
    return ToyProblem(ToySoftmaxPolicy(logits), old, ref, groups, beta, schedule, k)


def boundary_distance(problem: ToyProblem) -> float:
    return clip_boundary_distance(problem.batch())
