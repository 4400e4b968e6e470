"""Line-delimited record formats.

Every record is one JSON object per line, UTF-8, keys in a fixed order, with
``format_version`` as the first key. Floats are written with at most nine
significant digits (shortest round-trip form below that), so two runs over the
same inputs emit byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

from .core import (
    Action,
    BoundingBox,
    Instruction,
    Observation,
    Point,
    Trajectory,
    Transition,
    Widget,
)
from .errors import MnemoError

FORMAT_VERSION = 1


class RecordError(MnemoError, ValueError):
    pass


def fmt_float(x: float) -> float:
    """Round to nine significant digits; json then prints the shortest repr."""
    if isinstance(x, bool) or not isinstance(x, float):
        return x
    if not math.isfinite(x):
        raise RecordError(f"cannot serialize non-finite float {x!r}")
    return float(f"{x:.9g}")


def _pin_floats(obj: Any) -> Any:
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, dict):
        return {k: _pin_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_pin_floats(v) for v in obj]
    return obj


def dumps(record: dict, exact: bool = False) -> str:
    """Serialize one record. ``exact=True`` keeps full float precision."""
    payload = record if exact else _pin_floats(record)
    return json.dumps(payload, ensure_ascii=False, separators=(", ", ": "), allow_nan=False)


def write_jsonl(path: str | os.PathLike, records: Iterable[dict], exact: bool = False) -> None:
    atomic_write_text(path, "".join(dumps(r, exact=exact) + "\n" for r in records))


def read_jsonl(path: str | os.PathLike) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise RecordError(f"{path}:{lineno}: record is not an object")
            yield rec


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- core type codecs -------------------------------------------------------


def action_to_dict(a: Action) -> dict:
    return {
        "kind": a.kind.value,
        "value": a.value,
        "position": None if a.position is None else [a.position.x, a.position.y],
        "region": None if a.region is None else a.region.as_list(),
    }


def action_from_dict(d: dict) -> Action:
    pos = d.get("position")
    reg = d.get("region")
    return Action(
        kind=d["kind"],
        value=d.get("value"),
        position=None if pos is None else Point(*pos),
        region=None if reg is None else BoundingBox(*reg),
    )


def observation_to_dict(o: Observation) -> dict:
    return {
        "screen_id": o.screen_id,
        "widgets": [[w.widget_id, w.role, w.label, w.box.as_list()] for w in o.widgets],
        "image": o.raw_image_ref,
    }


def observation_from_dict(d: dict) -> Observation:
    return Observation(
        screen_id=d["screen_id"],
        widgets=tuple(Widget(wid, role, label, BoundingBox(*box)) for wid, role, label, box in d.get("widgets", [])),
        raw_image_ref=d.get("image"),
    )


def trajectory_to_record(t: Trajectory) -> dict:
    """Flatten a trajectory into a TrajectoryRecord.

    Steps carry the pre/post screen ids plus an index into ``observations``,
    which lists each distinct observation once in order of first appearance.
    """
    observations: list[Observation] = []
    index: dict[Observation, int] = {}

    def ref(o: Observation) -> int:
        if o not in index:
            index[o] = len(observations)
            observations.append(o)
        return index[o]

    steps = []
    for tr in t.transitions:
        steps.append(
            {
                "step": tr.step_index,
                "pre": tr.pre.screen_id,
                "pre_obs": ref(tr.pre),
                "action": action_to_dict(tr.action),
                "post": tr.post.screen_id,
                "post_obs": ref(tr.post),
            }
        )
    return {
        "format_version": FORMAT_VERSION,
        "record": "trajectory",
        "id": t.trajectory_id,
        "goal": t.goal.text,
        "success": t.success,
        "source": t.source,
        "steps": steps,
        "observations": [observation_to_dict(o) for o in observations],
    }


def trajectory_from_record(rec: dict) -> Trajectory:
    check_version(rec)
    if rec.get("record", "trajectory") != "trajectory":
        raise RecordError(f"expected a trajectory record, got {rec.get('record')!r}")
    try:
        observations = [observation_from_dict(o) for o in rec.get("observations", [])]

        def obs(step: dict, side: str) -> Observation:
            i = step.get(f"{side}_obs")
            if i is None:
                return Observation(screen_id=step[side])
            o = observations[i]
            if o.screen_id != step[side]:
                raise RecordError(f"step {step.get('step')}: {side} screen id disagrees with observation")
            return o

        transitions = tuple(
            Transition(pre=obs(s, "pre"), action=action_from_dict(s["action"]), post=obs(s, "post"), step_index=s["step"])
            for s in rec["steps"]
        )
        return Trajectory(
            goal=Instruction(rec["goal"]),
            transitions=transitions,
            success=bool(rec["success"]),
            trajectory_id=str(rec["id"]),
            source=rec.get("source"),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise RecordError(f"malformed trajectory record {rec.get('id')!r}: {exc!r}") from exc


def check_version(rec: dict) -> None:
    v = rec.get("format_version")
    if v != FORMAT_VERSION:
        raise RecordError(f"unsupported format_version {v!r} (expected {FORMAT_VERSION})")


def read_trajectories(path: str | os.PathLike) -> list[Trajectory]:
    return [trajectory_from_record(r) for r in read_jsonl(path)]


def write_trajectories(path: str | os.PathLike, trajectories: Iterable[Trajectory]) -> None:
    write_jsonl(path, (trajectory_to_record(t) for t in trajectories))
