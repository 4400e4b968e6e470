"""Domain types shared by every module.

All types are frozen dataclasses. Coordinates are normalized to [0, 1]; a
point lying on a box edge counts as inside.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    InvalidGeometry,
    InvalidTrajectory,
    MissingField,
    UnexpectedField,
)


def _in_unit(v: float) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and 0.0 <= v <= 1.0


@dataclass(frozen=True, slots=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (_in_unit(self.x) and _in_unit(self.y)):
            raise InvalidGeometry(f"point ({self.x!r}, {self.y!r}) outside [0,1]^2")


@dataclass(frozen=True, slots=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        _check_box(self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> Point:
        return Point((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def contains(self, p: Point) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def _check_box(x0, y0, x1, y1) -> None:
    if not all(_in_unit(v) for v in (x0, y0, x1, y1)):
        raise InvalidGeometry(f"box ({x0!r}, {y0!r}, {x1!r}, {y1!r}) has a coordinate outside [0,1]")
    if x0 > x1:
        raise InvalidGeometry(f"x_min {x0!r} > x_max {x1!r}")
    if y0 > y1:
        raise InvalidGeometry(f"y_min {y0!r} > y_max {y1!r}")


def validate_bbox(b: BoundingBox) -> BoundingBox:
    """Return ``b`` unchanged, or raise :class:`InvalidGeometry`."""
    _check_box(b.x_min, b.y_min, b.x_max, b.y_max)
    return b


class ActionKind(str, enum.Enum):
    CLICK = "click"
    LONG_PRESS = "long_press"
    SCROLL = "scroll"
    TYPE_TEXT = "type_text"
    OPEN_APP = "open_app"
    NAVIGATE_HOME = "navigate_home"
    NAVIGATE_BACK = "navigate_back"
    WAIT = "wait"
    COMPLETE = "complete"
    IMPOSSIBLE = "impossible"

    def __str__(self) -> str:
        return self.value


# kinds that take no spatial argument at all
_BARE_KINDS = frozenset(
    {ActionKind.COMPLETE, ActionKind.IMPOSSIBLE, ActionKind.NAVIGATE_HOME, ActionKind.NAVIGATE_BACK}
)


@dataclass(frozen=True, slots=True)
class Action:
    kind: ActionKind
    value: Optional[str] = None
    position: Optional[Point] = None
    region: Optional[BoundingBox] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ActionKind(self.kind))
        if self.value == "":
            object.__setattr__(self, "value", None)

    def __str__(self) -> str:
        arg = self.value
        if arg is None and self.position is not None:
            arg = f"{self.position.x:g},{self.position.y:g}"
        return f"{self.kind.value}({arg or ''})"


def validate_action(a: Action) -> Action:
    """Check the kind-specific field requirements of ``a``.

    Raises:
        MissingField: a required field is absent.
        UnexpectedField: a parameterless kind carries a position or region.
    """
    kind = a.kind
    if kind in (ActionKind.CLICK, ActionKind.LONG_PRESS) and a.position is None:
        raise MissingField("position", kind.value)
    if kind is ActionKind.SCROLL and a.position is None and a.region is None:
        raise MissingField("region", kind.value)
    if kind is ActionKind.TYPE_TEXT and a.value is None:
        raise MissingField("value", kind.value)
    if kind in _BARE_KINDS:
        if a.position is not None:
            raise UnexpectedField("position", kind.value)
        if a.region is not None:
            raise UnexpectedField("region", kind.value)
    return a


@dataclass(frozen=True, slots=True)
class Widget:
    widget_id: str
    role: str
    label: str
    box: BoundingBox


@dataclass(frozen=True, slots=True)
class Observation:
    screen_id: str
    widgets: tuple[Widget, ...] = ()
    raw_image_ref: Optional[str] = None

    def __post_init__(self) -> None:
        widgets = tuple(self.widgets)
        object.__setattr__(self, "widgets", widgets)
        seen: set[str] = set()
        for w in widgets:
            validate_bbox(w.box)
            if w.widget_id in seen:
                raise InvalidGeometry(f"duplicate widget id {w.widget_id!r} on screen {self.screen_id!r}")
            seen.add(w.widget_id)

    def widget(self, widget_id: str) -> Widget:
        for w in self.widgets:
            if w.widget_id == widget_id:
                return w
        raise KeyError(widget_id)

    def hit(self, p: Point) -> Optional[Widget]:
        """Topmost widget containing ``p``; later widgets in tree order are drawn on top."""
        for w in reversed(self.widgets):
            if w.box.contains(p):
                return w
        return None


@dataclass(frozen=True, slots=True)
class Instruction:
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("instruction text must be non-empty")


@dataclass(frozen=True, slots=True)
class Transition:
    pre: Observation
    action: Action
    post: Observation
    step_index: int

    def __post_init__(self) -> None:
        if self.step_index < 0:
            raise InvalidTrajectory("step_index must be non-negative")


@dataclass(frozen=True, slots=True)
class Trajectory:
    goal: Instruction
    transitions: tuple[Transition, ...]
    success: bool
    trajectory_id: str
    source: Optional[str] = field(default=None, compare=True)

    def __post_init__(self) -> None:
        ts = tuple(self.transitions)
        object.__setattr__(self, "transitions", ts)
        check_trajectory(ts)

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(t.action for t in self.transitions)

    def prefix(self, k: int) -> tuple[Transition, ...]:
        return self.transitions[:k]


def check_trajectory(transitions) -> None:
    """Step indices strictly increase and consecutive steps share a screen."""
    prev: Optional[Transition] = None
    for t in transitions:
        if prev is not None:
            if t.step_index <= prev.step_index:
                raise InvalidTrajectory(
                    f"step index {t.step_index} does not follow {prev.step_index}"
                )
            if t.pre.screen_id != prev.post.screen_id:
                raise InvalidTrajectory(
                    f"step {t.step_index} starts on {t.pre.screen_id!r} but step "
                    f"{prev.step_index} ended on {prev.post.screen_id!r}"
                )
        prev = t
