"""Group-relative policy optimization kernel.

The kernel works on per-token log-probabilities only: whatever trainer owns the
model supplies ``logp`` (current policy), ``logp_old`` (sampling policy) and
``logp_ref`` (reference policy) for every sampled sequence. Reductions go
through ``np.sum`` which uses pairwise summation on contiguous float64 arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptySequence, LengthMismatch, OutOfRange

STD_GUARD = 1e-8


@dataclass(frozen=True)
class ClipSchedule:
    eps_low: float = 0.2
    eps_init: float = 0.4
    eps_end: float = 0.2
    total_steps: int = 100

    def __post_init__(self) -> None:
        if self.eps_low <= 0:
            raise ValueError("eps_low must be positive")
        if not (self.eps_init >= self.eps_end > 0):
            raise ValueError("need eps_init >= eps_end > 0")
        if self.total_steps <= 0:
            raise ValueError("total_steps must be positive")

    def eps_cur(self, k: float) -> float:
        return adaptive_epsilon(k, self.total_steps, self.eps_init, self.eps_end)


@dataclass(frozen=True)
class SequenceLogProbs:
    logp: np.ndarray
    logp_old: np.ndarray
    logp_ref: np.ndarray
    reward: float = 0.0

    def __post_init__(self) -> None:
        arrs = []
        for name in ("logp", "logp_old", "logp_ref"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 1:
                raise LengthMismatch(f"{name} must be one-dimensional")
            if not np.all(np.isfinite(a)) or np.any(a > 0):
                raise ValueError(f"{name} must be finite and <= 0")
            object.__setattr__(self, name, a)
            arrs.append(a)
        if not (len(arrs[0]) == len(arrs[1]) == len(arrs[2])):
            raise LengthMismatch(
                f"log-prob lengths differ: {len(arrs[0])}, {len(arrs[1])}, {len(arrs[2])}"
            )
        if len(arrs[0]) == 0:
            raise EmptySequence("sequence has no tokens")
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")

    def __len__(self) -> int:
        return len(self.logp)


@dataclass(frozen=True)
class OptimizationBatch:
    groups: tuple[tuple[SequenceLogProbs, ...], ...]
    beta: float = 0.04
    schedule: ClipSchedule = field(default_factory=ClipSchedule)
    k: float = 0

    def __post_init__(self) -> None:
        groups = tuple(tuple(g) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise ValueError("batch needs at least one group and G >= 1 per group")
        if not (0 <= self.k <= self.schedule.total_steps):
            raise OutOfRange(f"training step {self.k} outside [0, {self.schedule.total_steps}]")
        object.__setattr__(self, "groups", groups)


@dataclass(frozen=True)
class GroupResult:
    objective: float
    advantages: np.ndarray
    token_terms: tuple[np.ndarray, ...]  # per sequence, surrogate minus KL penalty per token


@dataclass(frozen=True)
class ObjectiveResult:
    objective: float
    eps_cur: float
    groups: tuple[GroupResult, ...]

    @property
    def loss(self) -> float:
        return -self.objective


def sft_loss(logps: Sequence[Sequence[float]]) -> float:
    """Mean over sequences of the per-token negative log-likelihood."""
    if len(logps) == 0:
        raise EmptySequence("sft_loss needs at least one sequence")
    per_seq = []
    for lp in logps:
        lp = np.asarray(lp, dtype=np.float64)
        if lp.size == 0:
            raise EmptySequence("sequence has no tokens")
        per_seq.append(-np.sum(lp) / lp.size)
    return float(np.sum(np.asarray(per_seq)) / len(per_seq))


def group_advantages(rewards: Sequence[float]) -> np.ndarray:
    """``(r - mean) / std`` with the population std; all zeros when std < 1e-8."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("group needs at least one reward")
    centered = r - np.sum(r) / r.size
    std = math.sqrt(float(np.sum(centered * centered)) / r.size)
    if std < STD_GUARD:
        return np.zeros_like(r)
    return centered / std


def adaptive_epsilon(k: float, total: float, eps_init: float, eps_end: float) -> float:
    """Cosine-decayed upper clip bound, ``eps_init`` at k=0 down to ``eps_end`` at k=total."""
    if total <= 0:
        raise OutOfRange("total steps must be positive")
    if not (0 <= k <= total):
        raise OutOfRange(f"k={k} outside [0, {total}]")
    if k == 0:
        return float(eps_init)
    if k == total:
        return float(eps_end)
    return eps_end + 0.5 * (eps_init - eps_end) * (1.0 + math.cos(math.pi * k / total))


def clipped_ratio(rho, eps_low: float, eps_cur: float):
    return np.clip(rho, 1.0 - eps_low, 1.0 + eps_cur)


def kl_per_token(logp_cur, logp_ref):
    """``r - log r - 1`` with ``r = pi_ref / pi_cur``; non-negative, zero iff equal."""
    d = np.asarray(logp_ref, dtype=np.float64) - np.asarray(logp_cur, dtype=np.float64)
    out = np.expm1(d) - d
    return np.maximum(out, 0.0) if out.ndim else float(max(out, 0.0))


def _surrogate(logp, logp_old, adv, eps_low, eps_cur):
    rho = np.exp(logp - logp_old)
    return np.minimum(rho * adv, clipped_ratio(rho, eps_low, eps_cur) * adv)


def group_objective(
    group: Sequence[SequenceLogProbs], beta: float, eps_low: float, eps_cur: float
) -> GroupResult:
    adv = group_advantages([s.reward for s in group])
    terms = []
    for s, a in zip(group, adv):
        terms.append(_surrogate(s.logp, s.logp_old, a, eps_low, eps_cur) - beta * kl_per_token(s.logp, s.logp_ref))
    n_tokens = sum(len(s) for s in group)
    total = float(np.sum(np.concatenate(terms)))
    return GroupResult(total / n_tokens, adv, tuple(terms))


def grpo_objective(batch: OptimizationBatch) -> ObjectiveResult:
    """Token-normalized clipped surrogate with a per-token KL penalty, averaged over groups.

    The loss to minimize is ``-result.objective``.
    """
    sched = batch.schedule
    eps_cur = sched.eps_cur(batch.k)
    results = tuple(group_objective(g, batch.beta, sched.eps_low, eps_cur) for g in batch.groups)
    objective = float(np.sum(np.array([r.objective for r in results])) / len(results))
    return ObjectiveResult(objective, eps_cur, results)


# -- analytic gradients with respect to the current policy's log-probs ------


def sft_logp_gradient(logps: Sequence[Sequence[float]]) -> list[np.ndarray]:
    """d sft_loss / d logp for every token."""
    n = len(logps)
    return [np.full(len(lp), -1.0 / (n * len(lp))) for lp in logps]


def grpo_logp_gradient(batch: OptimizationBatch) -> list[list[np.ndarray]]:
    """dJ / d logp for every token of every sequence, grouped like ``batch.groups``.

    Where the min picks the clipped branch with the ratio outside the clip band
    the surrogate is locally constant, so its contribution is zero.
    """
    sched = batch.schedule
    eps_cur = sched.eps_cur(batch.k)
    lo, hi = 1.0 - sched.eps_low, 1.0 + eps_cur
    n_groups = len(batch.groups)
    grads = []
    for group in batch.groups:
        adv = group_advantages([s.reward for s in group])
        n_tokens = sum(len(s) for s in group)
        g_grads = []
        for s, a in zip(group, adv):
            rho = np.exp(s.logp - s.logp_old)
            unclipped = rho * a
            clipped = np.clip(rho, lo, hi) * a
            frozen = (clipped < unclipped) & ((rho < lo) | (rho > hi))
            d_surr = np.where(frozen, 0.0, rho * a)
            d_kl = 1.0 - np.exp(s.logp_ref - s.logp)
            g_grads.append((d_surr - batch.beta * d_kl) / (n_tokens * n_groups))
        grads.append(g_grads)
    return grads


def clip_boundary_distance(batch: OptimizationBatch) -> float:
    """Smallest |rho - bound| over all tokens; small values mean the objective is near a kink."""
    sched = batch.schedule
    eps_cur = sched.eps_cur(batch.k)
    bounds = np.array([1.0 - sched.eps_low, 1.0 + eps_cur])
    best = math.inf
    for group in batch.groups:
        for s in group:
            rho = np.exp(s.logp - s.logp_old)
            best = min(best, float(np.min(np.abs(rho[:, None] - bounds[None, :]))))
    return best
