"""Parse and serialize tagged agent output.

Wire format, blocks in this order::

    <Progress_Evaluation> ... </Progress_Evaluation>
    <Decision_Rationale> ... </Decision_Rationale>
    <History_Summary> ... </History_Summary>
    <Answer> {'action': 'click', 'value': 'Apply', 'position': [0.3, 0.66]} </Answer>

The Answer payload may use single or double quotes and may be wrapped in a
doubled pair of braces (as prompt templates often escape them). A 2-element
position is a point; a 4-element position is a region (used by scroll).
"""

from __future__ import annotations

import ast
import json
import math
import warnings
from dataclasses import dataclass

from .core import Action, ActionKind, BoundingBox, Point, validate_action
from .errors import InvalidAction, MalformedAnswer, MissingTag, MnemoError

TEXT_TAGS = ("Progress_Evaluation", "Decision_Rationale", "History_Summary")
ANSWER_TAG = "Answer"
POSITION_DECIMALS = 6
_MAX_PAYLOAD = 10_000


@dataclass(frozen=True)
class ParsedAgentOutput:
    progress_evaluation: str
    decision_rationale: str
    history_summary: str
    action: Action


def _block(text: str, tag: str, pos: int) -> tuple[str, int]:
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    start = text.find(open_tag, pos)
    if start < 0:
        raise MissingTag(tag)
    body_start = start + len(open_tag)
    end = text.find(close_tag, body_start)
    if end < 0:
        raise MissingTag(tag)
    return text[body_start:end].strip(), end + len(close_tag)


def _number(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise MalformedAnswer(f"{what} must be numeric, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise MalformedAnswer(f"{what} must be finite")
    return round(v, POSITION_DECIMALS)


def _payload(body: str) -> dict:
    if len(body) > _MAX_PAYLOAD:
        raise MalformedAnswer("answer payload too long")
    src = body.strip()
    if src.startswith("{{") and src.endswith("}}"):
        src = src[1:-1]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # bad escapes in junk strings
            rec = ast.literal_eval(src)
    except Exception as exc:  # literal_eval raises a zoo of types on junk input
        raise MalformedAnswer(f"answer payload is not a record: {exc.__class__.__name__}") from None
    if not isinstance(rec, dict):
        raise MalformedAnswer("answer payload is not a record")
    if not all(isinstance(k, str) for k in rec):
        raise MalformedAnswer("answer keys must be strings")
    extra = set(rec) - {"action", "value", "position"}
    if extra:
        raise MalformedAnswer(f"unexpected answer keys: {sorted(extra)}")
    return rec


def _action(rec: dict) -> Action:
    kind = rec.get("action")
    if not isinstance(kind, str):
        raise MalformedAnswer("answer 'action' must be a string")
    try:
        kind = ActionKind(kind.strip().lower())
    except ValueError:
        raise MalformedAnswer(f"unknown action kind {kind!r}") from None

    value = rec.get("value")
    if value is not None and not isinstance(value, str):
        raise MalformedAnswer("answer 'value' must be a string")

    raw_pos = rec.get("position")
    position = region = None
    if raw_pos is not None:
        if not isinstance(raw_pos, (list, tuple)):
            raise MalformedAnswer("answer 'position' must be a list")
        coords = [_number(v, "position coordinate") for v in raw_pos]
        try:
            if len(coords) == 2:
                position = Point(*coords)
            elif len(coords) == 4:
                region = BoundingBox(*coords)
            elif coords:
                raise MalformedAnswer(f"position must have 0, 2 or 4 values, got {len(coords)}")
        except MnemoError as exc:
            if isinstance(exc, MalformedAnswer):
                raise
            raise MalformedAnswer(str(exc)) from None

    action = Action(kind, value, position, region)
    try:
        return validate_action(action)
    except MnemoError as exc:
        raise InvalidAction(str(exc)) from None


def parse_agent_output(text: str) -> ParsedAgentOutput:
    """Parse model text into its three reasoning blocks and an :class:`Action`.

    Raises:
        MissingTag: a block is absent, unclosed, or out of order.
        MalformedAnswer: the Answer payload is not a valid record.
        InvalidAction: the record decodes but fails action validation.
    """
    if not isinstance(text, str):
        raise MissingTag(TEXT_TAGS[0])
    pos = 0
    blocks = []
    for tag in TEXT_TAGS:
        body, pos = _block(text, tag, pos)
        blocks.append(body)
    answer, _ = _block(text, ANSWER_TAG, pos)
    return ParsedAgentOutput(*blocks, action=_action(_payload(answer)))


def _fmt_coord(v: float) -> str:
    s = f"{round(v, POSITION_DECIMALS):.{POSITION_DECIMALS}f}".rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


def serialize_agent_output(p: ParsedAgentOutput) -> str:
    """Canonical text for ``p``; ``parse_agent_output`` inverts it."""
    fields = (p.progress_evaluation, p.decision_rationale, p.history_summary)
    for tag, body in zip(TEXT_TAGS, fields):
        if body != body.strip() or f"</{tag}>" in body:
            raise ValueError(f"{tag} text must be trimmed and must not contain its closing tag")
    a = p.action
    if a.region is not None:
        coords = a.region.as_list()
    elif a.position is not None:
        coords = [a.position.x, a.position.y]
    else:
        coords = []
    answer = (
        '{"action": ' + json.dumps(a.kind.value)
        + ', "value": ' + json.dumps(a.value or "", ensure_ascii=False)
        + ', "position": [' + ", ".join(_fmt_coord(c) for c in coords) + "]}"
    )
    parts = [f"<{tag}>\n{body}\n</{tag}>" for tag, body in zip(TEXT_TAGS, fields)]
    parts.append(f"<{ANSWER_TAG}>\n{answer}\n</{ANSWER_TAG}>")
    return "\n".join(parts)


def check_format(text: str) -> bool:
    """1-or-0 format gate: true iff ``parse_agent_output`` accepts ``text``."""
    try:
        parse_agent_output(text)
    except MnemoError:
        return False
    return True
