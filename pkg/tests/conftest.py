from __future__ import annotations

import pytest

from mnemo.core import Action, BoundingBox, Instruction, Observation, Point, Trajectory, Transition, Widget


def screen(sid, *labels, role="button"):
    """Observation with one stacked widget per label."""
    widgets = tuple(
        Widget(f"{sid}_{i}", role, lab, BoundingBox(0.1, round(0.05 + 0.15 * i, 3), 0.9, round(0.13 + 0.15 * i, 3)))
        for i, lab in enumerate(labels)
    )
    return Observation(sid, widgets)


def chain(goal, screens, actions=None, success=False, tid="t", start=1):
    """Trajectory walking through ``screens``; default actions are clicks in the middle."""
    steps = []
    for i in range(len(screens) - 1):
        a = actions[i] if actions else Action("click", f"step{i}", Point(0.5, 0.09))
        steps.append(Transition(screens[i], a, screens[i + 1], start + i))
    return Trajectory(Instruction(goal), tuple(steps), success, tid)


@pytest.fixture
def make_screen():
    return screen


@pytest.fixture
def make_chain():
    return chain


# -- acceptance report ------------------------------------------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


def pytest_runtest_logreport(report):
    marker = next((m for m in getattr(report, "_criterion", ()) if m), None)
    if marker is None:
        return
    number, title = marker
    failed = report.failed
    if report.when == "call" or failed:
        prev = _criteria.get(number, (title, "PASS"))[1]
        _criteria[number] = (title, "FAIL" if failed or prev == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result()._criterion = (tuple(m.args),)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"{status} criterion {number:2d}: {title}")
