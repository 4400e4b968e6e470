"""Hierarchical reward for agent outputs.

``total = w_f * format + w_a * acc`` where the accuracy term is only computed
for well-formed output and is itself ``w_t * type + w_p * param``. The
parameter reward depends on the action kind: point-in-box for taps,
IoU-thresholded box overlap for scrolls, and exact-or-arithmetic answer
matching for text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import Action, ActionKind, BoundingBox, Point
from .errors import InconsistentGroundTruth, MnemoError
from .parser import parse_agent_output

WEIGHT_TOL = 1e-12
DEFAULT_MATH_TOL = 1e-6

_POINT_KINDS = frozenset({ActionKind.CLICK, ActionKind.LONG_PRESS})
_ANSWER_KINDS = frozenset({ActionKind.TYPE_TEXT, ActionKind.OPEN_APP, ActionKind.COMPLETE, ActionKind.IMPOSSIBLE})


@dataclass(frozen=True)
class RewardWeights:
    w_f: float = 0.1
    w_a: float = 0.9
    w_t: float = 0.5
    w_p: float = 0.5
    tau_iou: float = 0.5
    math_tol: float = DEFAULT_MATH_TOL

    def __post_init__(self) -> None:
        for name in ("w_f", "w_a", "w_t", "w_p"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if abs(self.w_f + self.w_a - 1.0) > WEIGHT_TOL:
            raise ValueError("w_f + w_a must equal 1")
        if abs(self.w_t + self.w_p - 1.0) > WEIGHT_TOL:
            raise ValueError("w_t + w_p must equal 1")
        if not (0.0 < self.tau_iou <= 1.0):
            raise ValueError("tau_iou must lie in (0, 1]")
        if self.math_tol < 0:
            raise ValueError("math_tol must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    action_kind: ActionKind
    target_box: Optional[BoundingBox] = None
    target_answer: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "action_kind", ActionKind(self.action_kind))


@dataclass(frozen=True)
class RewardBreakdown:
    r_format: float
    r_type: float
    r_param: float
    r_acc: float
    r_total: float


def check_ground_truth(gt: GroundTruth) -> GroundTruth:
    kind = gt.action_kind
    if kind in _POINT_KINDS or kind is ActionKind.SCROLL:
        if gt.target_box is None:
            raise InconsistentGroundTruth(f"{kind.value} ground truth needs target_box")
    if kind is ActionKind.TYPE_TEXT and gt.target_answer is None:
        raise InconsistentGroundTruth("type_text ground truth needs target_answer")
    return gt


def point_reward(p: Point, b: BoundingBox) -> float:
    """1.0 when ``p`` lies in ``b`` (edges included), else 0.0."""
    return 1.0 if (b.x_min <= p.x <= b.x_max and b.y_min <= p.y <= b.y_max) else 0.0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def bbox_reward(pred: BoundingBox, gt: BoundingBox, tau_iou: float = 0.5) -> float:
    if not (0.0 < tau_iou <= 1.0):
        raise ValueError("tau_iou must lie in (0, 1]")
    return bbox_reward_from_iou(iou(pred, gt), tau_iou)


def bbox_reward_from_iou(overlap: float, tau_iou: float) -> float:
    if overlap >= tau_iou:
        return 1.0
    return overlap / tau_iou


# -- arithmetic answers -----------------------------------------------------
#
# expr   := term (('+' | '-') term)*
# term   := unary (('*' | '/') unary)*
# unary  := '-' unary | atom
# atom   := NUMBER | '(' expr ')'

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|(.))")
_MAX_EXPR = 1000


class _ArithError(Exception):
    pass


def _tokenize(src: str) -> list[str]:
    out = []
    pos = 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:  # pragma: no cover - the pattern matches any character
            raise _ArithError(src[pos:])
        num, op = m.groups()
        if num is not None:
            out.append(num)
        elif op in "+-*/()":
            out.append(op)
        else:
            raise _ArithError(f"unexpected {op!r}")
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise _ArithError("unexpected end of expression")
        self.i += 1
        return tok

    def expr(self) -> Fraction:
        val = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            val = val + rhs if op == "+" else val - rhs
        return val

    def term(self) -> Fraction:
        val = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.unary()
            if op == "*":
                val = val * rhs
            else:
                if rhs == 0:
                    raise _ArithError("division by zero")
                val = val / rhs
        return val

    def unary(self) -> Fraction:
        if self.peek() == "-":
            self.take()
            return -self.unary()
        return self.atom()

    def atom(self) -> Fraction:
        tok = self.take()
        if tok == "(":
            val = self.expr()
            if self.take() != ")":
                raise _ArithError("expected ')'")
            return val
        if tok[0].isdigit() or tok[0] == ".":
            return Fraction(tok)
        raise _ArithError(f"unexpected {tok!r}")


def evaluate_arithmetic(src: str) -> Fraction:
    """Exact value of a decimal arithmetic expression.

    Raises ValueError for anything outside the grammar, including division by zero.
    """
    if len(src) > _MAX_EXPR:
        raise ValueError("expression too long")
    try:
        p = _Parser(_tokenize(src))
        val = p.expr()
        if p.peek() is not None:
            raise _ArithError(f"trailing {p.peek()!r}")
    except (_ArithError, RecursionError) as exc:
        raise ValueError(f"not an arithmetic expression: {exc}") from None
    return val


def math_verify(answer: str, gt: str, tol: float = DEFAULT_MATH_TOL) -> bool:
    if answer.strip() == gt.strip():
        return True
    try:
        a = evaluate_arithmetic(answer)
        b = evaluate_arithmetic(gt)
    except ValueError:
        return False
    return abs(a - b) <= Fraction(tol)


# -- full reward ------------------------------------------------------------


def _param_reward(action: Action, gt: GroundTruth, w: RewardWeights) -> float:
    kind = gt.action_kind
    if kind in _POINT_KINDS:
        return point_reward(action.position, gt.target_box) if action.position is not None else 0.0
    if kind is ActionKind.SCROLL:
        return bbox_reward(action.region, gt.target_box, w.tau_iou) if action.region is not None else 0.0
    if gt.target_answer is not None and kind in _ANSWER_KINDS:
        return 1.0 if math_verify(action.value or "", gt.target_answer, w.math_tol) else 0.0
    return 1.0  # parameterless kind whose type already matched


def evaluate_reward(model_text: str, gt: GroundTruth, w: Optional[RewardWeights] = None) -> RewardBreakdown:
    """Score one model output against ground truth.

    Parameters are only graded when the predicted kind matches the expected
    one; a kind mismatch scores zero on both type and parameters.
    """
    w = w or RewardWeights()
    check_ground_truth(gt)
    try:
        parsed = parse_agent_output(model_text)
    except MnemoError:
        return RewardBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
    r_type = 1.0 if parsed.action.kind is gt.action_kind else 0.0
    r_param = _param_reward(parsed.action, gt, w) if r_type else 0.0
    r_acc = w.w_t * r_type + w.w_p * r_param
    r_total = w.w_f * 1.0 + w.w_a * r_acc
    return RewardBreakdown(1.0, r_type, r_param, r_acc, min(1.0, r_total))
