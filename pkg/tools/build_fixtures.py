"""Regenerate the pinned fixture files under src/mnemo/fixtures/v1/.

Run from the repository root:  python tools/build_fixtures.py

Environment layouts keep widget centers at least 0.15 apart vertically, so the
maximum layout jitter (0.05 per box) never makes one widget's center land in
another widget's box.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT))

from mnemo import records  # noqa: E402
from mnemo.core import Action, ActionKind, BoundingBox, Instruction, Observation, Point, Trajectory, Transition, Widget  # noqa: E402
from mnemo.embeddings import HashingEmbedder  # noqa: E402
from mnemo.parser import ParsedAgentOutput, serialize_agent_output  # noqa: E402
from mnemo.sim import EnvSpec, ScriptedEnvironment  # noqa: E402
from tests.oracles import scalar_grpo_objective  # noqa: E402

OUT = ROOT / "src" / "mnemo" / "fixtures" / "v1"


def column(*items, x0=0.1, x1=0.9, top=0.05, height=0.08, gap=0.15):
    """Widgets stacked vertically: items are (id, role, label)."""
    out = []
    for i, (wid, role, label) in enumerate(items):
        y0 = round(top + gap * i, 3)
        out.append([wid, role, label, [x0, y0, x1, round(y0 + height, 3)]])
    return out


def env(name, screens, transitions, tasks, gamma=0.99):
    return {
        "schema_version": 1,
        "name": name,
        "gamma": gamma,
        "screens": {sid: {"widgets": ws} for sid, ws in screens.items()},
        "transitions": transitions,
        "tasks": tasks,
    }


def tr(src, kind, dst, widget=None, value=None):
    d = {"from": src, "kind": kind, "to": dst}
    if widget is not None:
        d["widget"] = widget
    if value is not None:
        d["value"] = value
    return d


def sol(screen, kind, widget=None, value=None, **extra):
    d = {"screen": screen, "kind": kind}
    if widget is not None:
        d["widget"] = widget
    if value is not None:
        d["value"] = value
    d.update(extra)
    return d


# -- environments -----------------------------------------------------------

LOGIN = env(
    "login",
    {
        "home": column(("btn_signin", "button", "Sign in"), ("btn_settings", "button", "Settings"), ("txt_welcome", "text", "Welcome back")),
        "settings": column(("toggle_wifi", "switch", "Wi-Fi"), ("btn_back", "button", "Back")),
        "login_user": column(("field_user", "textbox", "Username")),
        "login_pass": column(("field_pass", "textbox", "Password")),
        "login_submit": column(("btn_login", "button", "Log in")),
        "account": column(("txt_account", "text", "My account"), ("btn_orders", "button", "Orders")),
    },
    [
        tr("home", "click", "login_user", "btn_signin"),
        tr("home", "click", "settings", "btn_settings"),
        tr("settings", "click", "home", "btn_back"),
        tr("settings", "navigate_back", "home"),
        tr("login_user", "type_text", "login_pass"),
        tr("login_user", "navigate_back", "home"),
        tr("login_pass", "type_text", "login_submit"),
        tr("login_submit", "click", "account", "btn_login"),
    ],
    {
        "login": {
            "instruction": "Sign in to the app with username alice and password hunter2.",
            "start": "home",
            "budget": 10,
            "terminal": {"screen": "account", "typed": ["alice", "hunter2"]},
            "subgoals": [
                {"goal": "Open the sign-in form.", "screen": "login_user"},
                {"goal": "Enter the username alice.", "screen": "login_pass", "typed": ["alice"]},
            ],
            "solution": [
                sol("home", "click", "btn_signin"),
                sol("login_user", "type_text", value="alice"),
                sol("login_pass", "type_text", value="hunter2"),
                sol("login_submit", "click", "btn_login"),
            ],
        },
        "open_settings": {
            "instruction": "Open the app settings.",
            "start": "home",
            "budget": 5,
            "terminal": {"screen": "settings"},
            "solution": [sol("home", "click", "btn_settings")],
        },
    },
)

# Settings / battery saver flow, screen names as in the episodic-memory scenario.
SETTINGS = env(
    "settings",
    {
        "HomeScreen": column(("icon_settings", "icon", "Settings"), ("icon_camera", "icon", "Camera"), ("icon_clock", "icon", "Clock")),
        "SettingsPage": [
            ["settings_list", "list", "Settings list", [0.0, 0.05, 1.0, 0.95]],
            ["item_network", "item", "Network & internet", [0.1, 0.1, 0.9, 0.18]],
            ["item_display", "item", "Display", [0.1, 0.25, 0.9, 0.33]],
        ],
        "BatterySection": column(("item_battery_usage", "item", "Battery usage"), ("BatterySaverToggle", "switch", "Battery saver")),
        "BatterySaverOn": column(("BatterySaverToggle", "switch", "Battery saver: on")),
    },
    [
        tr("HomeScreen", "click", "SettingsPage", "icon_settings"),
        tr("SettingsPage", "scroll", "BatterySection", "settings_list"),
        tr("SettingsPage", "navigate_back", "HomeScreen"),
        tr("BatterySection", "click", "BatterySaverOn", "BatterySaverToggle"),
        tr("BatterySection", "navigate_back", "SettingsPage"),
    ],
    {
        "battery_saver": {
            "instruction": "Open the Settings application and enable battery saver mode.",
            "start": "HomeScreen",
            "budget": 8,
            "terminal": {"screen": "BatterySaverOn"},
            "subgoals": [
                {"goal": "Open the Settings application.", "screen": "SettingsPage"},
                {"goal": "Find the battery settings.", "screen": "BatterySection"},
            ],
            "solution": [
                sol("HomeScreen", "click", "icon_settings", "Settings"),
                sol("SettingsPage", "scroll", "settings_list", "Down"),
                sol("BatterySection", "click", "BatterySaverToggle", "BatterySaverToggle"),
            ],
        }
    },
)

SHOPPING = env(
    "shopping",
    {
        "shop_home": column(("btn_search", "button", "Search"), ("btn_orders", "button", "My orders"), ("btn_login", "button", "Login")),
        "login_required": column(("txt_login_required", "text", "Please log in to view your orders"), ("btn_login", "button", "Login")),
        "login_account": column(("field_account", "textbox", "Account")),
        "login_password": column(("field_password", "textbox", "Password")),
        "login_submit": column(("btn_submit", "button", "Sign in")),
        "shop_home_authed": column(("btn_search", "button", "Search"), ("btn_orders", "button", "My orders"), ("btn_profile", "button", "Account")),
        "order_history": column(("txt_orders", "text", "Order history"), ("item_order", "item", "Order #1042")),
    },
    [
        tr("shop_home", "click", "login_required", "btn_orders"),
        tr("shop_home", "click", "login_account", "btn_login"),
        tr("login_required", "click", "login_account", "btn_login"),
        tr("login_account", "type_text", "login_password"),
        tr("login_password", "type_text", "login_submit"),
        tr("login_submit", "click", "shop_home_authed", "btn_submit"),
        tr("shop_home_authed", "click", "order_history", "btn_orders"),
    ],
    {
        "order_history": {
            "instruction": "Access the personal order history page in a shopping application.",
            "start": "shop_home",
            "budget": 10,
            "terminal": {"screen": "order_history"},
            "subgoals": [{"goal": "Log in to the shopping application.", "screen": "shop_home_authed"}],
            "solution": [
                sol("shop_home", "click", "btn_login"),
                sol("login_account", "type_text", value="Account"),
                sol("login_password", "type_text", value="Password"),
                sol("login_submit", "click", "btn_submit"),
                sol("shop_home_authed", "click", "btn_orders"),
            ],
        }
    },
)

_APPS = (
    ("app_ddg", "icon", "DuckDuckGo"),
    ("app_amazon", "icon", "Amazon"),
    ("app_messenger", "icon", "Messenger"),
    ("app_clock", "icon", "Clock"),
    ("app_bbc", "icon", "BBC Sports"),
    ("app_todo", "icon", "Microsoft To Do"),
)

_COMPOSITE_SCREENS = {
    "home": column(*_APPS),
    "ddg_home": column(("ddg_search", "textbox", "Search the web")),
    "ddg_results": column(("ddg_result_movie", "link", "Remember the Titans (sports movie)"), ("ddg_result_other", "link", "Sports news")),
    "ddg_movie": column(("txt_movie", "text", "Remember the Titans")),
    "amazon_home": column(("amazon_search", "textbox", "Search Amazon")),
    "amazon_results": column(("amazon_item", "item", "Tortilla chips"), ("amazon_add", "button", "Add to cart")),
    "amazon_cart": column(("txt_cart", "text", "Added to cart")),
    "msg_list": column(("msg_victor", "item", "Victor James"), ("msg_other", "item", "Alex Kim")),
    "msg_chat": column(("msg_field", "textbox", "Message Victor James")),
    "msg_sent": column(("txt_sent", "text", "Sent")),
    "clock_home": column(("clock_alarms", "tab", "Alarms"), ("clock_add_reminder", "button", "Add reminder")),
    "clock_new": column(("clock_field", "textbox", "Reminder title")),
    "clock_saved": column(("txt_clock_saved", "text", "Reminder saved")),
    "bbc_home": column(("bbc_search", "button", "Search"), ("bbc_scores", "tab", "Scores")),
    "bbc_search": column(("bbc_search_field", "textbox", "Search BBC Sport")),
    "bbc_results": column(("bbc_mlb_next", "link", "Next MLB game: Yankees vs Red Sox"), ("bbc_mlb_news", "link", "MLB news")),
    "bbc_game": column(("txt_game", "text", "Yankees vs Red Sox, Saturday 19:05")),
    "todo_home": column(("todo_new", "button", "New task")),
    "todo_new": column(("todo_field", "textbox", "Task title")),
    "todo_saved": column(("txt_todo_saved", "text", "Task saved")),
}

_COMPOSITE_TRANSITIONS = [
    tr("home", "click", "ddg_home", "app_ddg"),
    tr("home", "click", "amazon_home", "app_amazon"),
    tr("home", "click", "msg_list", "app_messenger"),
    tr("home", "click", "clock_home", "app_clock"),
    tr("home", "click", "bbc_home", "app_bbc"),
    tr("home", "click", "todo_home", "app_todo"),
    tr("ddg_home", "type_text", "ddg_results"),
    tr("ddg_results", "click", "ddg_movie", "ddg_result_movie"),
    tr("amazon_home", "type_text", "amazon_results"),
    tr("amazon_results", "click", "amazon_cart", "amazon_add"),
    tr("msg_list", "click", "msg_chat", "msg_victor"),
    tr("msg_chat", "type_text", "msg_sent"),
    tr("clock_home", "click", "clock_new", "clock_add_reminder"),
    tr("clock_new", "type_text", "clock_saved"),
    tr("bbc_home", "click", "bbc_search", "bbc_search"),
    tr("bbc_search", "type_text", "bbc_results"),
    tr("bbc_results", "click", "bbc_game", "bbc_mlb_next"),
    tr("todo_home", "click", "todo_new", "todo_new"),
    tr("todo_new", "type_text", "todo_saved"),
] + [tr(sid, "navigate_home", "home") for sid in _COMPOSITE_SCREENS if sid != "home"]

COMPOSITE = env(
    "composite",
    _COMPOSITE_SCREENS,
    _COMPOSITE_TRANSITIONS,
    {
        "evening_plan": {
            "instruction": (
                "Plan an evening of sports-themed entertainment by selecting a sports movie using DuckDuckgo and "
                "adding some snacks to your Amazon shopping cart. Invite Victor James through Facebook Messenger, "
                "and set a reminder on your Clock app so you don't forget."
            ),
            "start": "home",
            "budget": 25,
            "terminal": {"screen": "clock_saved", "typed": ["sports movie", "snacks", "Movie night tonight?", "Movie night"]},
            "subgoals": [
                {"goal": "Select a sports movie using DuckDuckGo.", "screen": "ddg_movie", "typed": ["sports movie"]},
                {"goal": "Add some snacks to your Amazon shopping cart.", "screen": "amazon_cart", "typed": ["snacks"]},
                {"goal": "Invite Victor James through Facebook Messenger.", "screen": "msg_sent"},
            ],
            "solution": [
                sol("home", "click", "app_ddg"),
                sol("ddg_home", "type_text", value="sports movie"),
                sol("ddg_results", "click", "ddg_result_movie"),
                sol("ddg_movie", "navigate_home"),
                sol("home", "click", "app_amazon"),
                sol("amazon_home", "type_text", value="snacks"),
                sol("amazon_results", "click", "amazon_add"),
                sol("amazon_cart", "navigate_home"),
                sol("home", "click", "app_messenger"),
                sol("msg_list", "click", "msg_victor"),
                sol("msg_chat", "type_text", value="Movie night tonight?"),
                sol("msg_sent", "navigate_home"),
                sol("home", "click", "app_clock"),
                sol("clock_home", "click", "clock_add_reminder"),
                sol("clock_new", "type_text", value="Movie night"),
            ],
        },
        "mlb_reminder": {
            "instruction": "Using BBC Sports, find out when the next MLB game is scheduled and then create a reminder in Microsoft To Do.",
            "start": "home",
            "budget": 12,
            "terminal": {"screen": "todo_saved", "typed": ["MLB", "MLB game"]},
            "subgoals": [
                {"goal": "Using BBC Sports, find out the next MLB game in the search bar", "screen": "bbc_results", "typed": ["MLB"]},
                {"goal": "Open BBC Sports.", "screen": "bbc_home"},
            ],
            "solution": [
                sol("home", "click", "app_bbc"),
                sol("bbc_home", "click", "bbc_search"),
                sol("bbc_search", "type_text", value="MLB"),
                sol("bbc_results", "click", "bbc_mlb_next"),
                sol("bbc_game", "navigate_home"),
                sol("home", "click", "app_todo"),
                sol("todo_home", "click", "todo_new"),
                sol("todo_new", "type_text", value="MLB game"),
            ],
        },
    },
)

TRAP = env(
    "trap",
    {
        "reports_home": column(("btn_monthly", "button", "Monthly report"), ("btn_quarterly", "button", "Quarterly report")),
        "report_view": column(("btn_export", "button", "Export"), ("btn_share", "button", "Share")),
        "export_menu": column(("btn_quick", "button", "Quick Export"), ("btn_archive", "button", "Archive Export")),
        "export_failed": column(("txt_failed", "text", "Export failed: attachments missing")),
        "export_format": column(("btn_pdf", "button", "PDF"), ("btn_csv", "button", "CSV")),
        "export_done": column(("txt_done", "text", "Archive saved")),
    },
    [
        tr("reports_home", "click", "report_view", "btn_monthly"),
        tr("reports_home", "click", "report_view", "btn_quarterly"),
        tr("report_view", "click", "export_menu", "btn_export"),
        tr("export_menu", "click", "export_failed", "btn_quick"),
        tr("export_menu", "click", "export_format", "btn_archive"),
        tr("export_format", "click", "export_done", "btn_pdf"),
    ],
    {
        "export_monthly": {
            "instruction": "Export the monthly report as a PDF archive.",
            "start": "reports_home",
            "budget": 8,
            "terminal": {"screen": "export_done"},
            "subgoals": [{"goal": "Open the export menu of the monthly report.", "screen": "export_menu"}],
            "solution": [
                sol("reports_home", "click", "btn_monthly"),
                sol("report_view", "click", "btn_export"),
                sol("export_menu", "click", "btn_archive", hidden=True, decoy="btn_quick"),
                sol("export_format", "click", "btn_pdf"),
            ],
        }
    },
)

ENVIRONMENTS = {"env-login": LOGIN, "env-settings": SETTINGS, "env-shopping": SHOPPING, "env-composite": COMPOSITE, "env-trap": TRAP}


def run_script(spec_dict, task, actions, tid, goal=None):
    """Execute explicit actions (kind, widget_id or None, value) and record the trajectory."""
    spec = EnvSpec.from_dict(spec_dict)
    e = ScriptedEnvironment(spec)
    obs = e.reset(task)
    steps = []
    for i, (kind, wid, value) in enumerate(actions, 1):
        if wid is None:
            a = Action(kind, value)
        else:
            box = obs.widget(wid).box
            if kind == "scroll":
                a = Action(kind, value, region=box)
            else:
                c = box.center
                a = Action(kind, value or obs.widget(wid).label, position=Point(round(c.x, 6), round(c.y, 6)))
        post, _, done = e.step(a)
        steps.append(Transition(obs, a, post, i))
        obs = post
    return Trajectory(Instruction(goal or spec.tasks[task].instruction), tuple(steps), e.success, tid)


def memory_seeds():
    trap_ok = run_script(
        TRAP, "export_monthly",
        [("click", "btn_quarterly", None), ("click", "btn_export", None), ("click", "btn_archive", None), ("click", "btn_pdf", None)],
        "seed.trap.quarterly", goal="Export the quarterly report as a PDF archive.",
    )
    trap_ok = Trajectory(trap_ok.goal, trap_ok.transitions, True, trap_ok.trajectory_id, "seed")
    trap_fail = run_script(
        TRAP, "export_monthly",
        [("click", "btn_quarterly", None), ("click", "btn_export", None), ("click", "btn_quick", None)],
        "seed.trap.quarterly-failed", goal="Export the quarterly report as a PDF archive.",
    )
    trap_fail = Trajectory(trap_fail.goal, trap_fail.transitions, False, trap_fail.trajectory_id, "seed")
    return {
        "schema_version": 1,
        "semantic": [],
        "experiential": [
            {
                "summary": (
                    'For report exports, Quick Export silently drops attachments and ends on an error; '
                    'prefer "Archive Export" in the export menu, then choose PDF.'
                ),
                "trajectory": records.trajectory_to_record(trap_ok),
            },
            {
                "summary": "Choosing Quick Export ended on an error screen and the export was lost.",
                "trajectory": records.trajectory_to_record(trap_fail),
            },
        ],
    }


def reimburse_trajectory():
    labels = ["Open Gmail", "Download Attachment", "Open File Manager", "Upload PDF"]
    kinds = ["open_app", "click", "open_app", "click"]
    screens = ["launcher", "gmail_inbox", "gmail_message", "file_manager", "reimbursement_uploaded"]
    obs = [
        Observation(sid, (Widget(f"w_{sid}", "button", lab, BoundingBox(0.1, 0.4, 0.9, 0.5)),))
        for sid, lab in zip(screens, ["Gmail", "Attachment.pdf", "Download", "Downloads", "Uploaded"])
    ]
    steps = []
    for i, (kind, lab) in enumerate(zip(kinds, labels)):
        pos = Point(0.5, 0.45) if kind == "click" else None
        steps.append(Transition(obs[i], Action(kind, lab, position=pos), obs[i + 1], i + 1))
    return Trajectory(
        Instruction("Download a PDF attachment from Gmail and upload it to a reimbursement application."),
        tuple(steps), True, "reimburse.downloads",
    )


APPLY_OUTPUT = ParsedAgentOutput(
    progress_evaluation=(
        "The user has successfully set the location to New York and the date range to Sept 1-30, but the "
        "displayed events are still from March, indicating the date filter needs to be applied."
    ),
    decision_rationale=(
        'Clicking the "Apply" button will confirm the selected date range (Sept 1-30) and refresh the event '
        "list to show only activities occurring in New York City during September."
    ),
    history_summary=(
        "The user changed the location to New York, set the date range to September 1st-30th, and applied "
        "the filter to update the event list."
    ),
    action=Action("click", "Apply", Point(0.3, 0.66)),
)


def apply_text(balanced: bool) -> str:
    o = APPLY_OUTPUT
    dr_close = "</Decision_Rationale>" if balanced else "<Decision_Rationale>"
    hs_close = "</History_Summary>" if balanced else "<History_Summary>"
    a_open, a_close = ("<Answer>", "</Answer>") if balanced else ("<Answer", "<Answer>")
    return (
        f"<Progress_Evaluation>\n{o.progress_evaluation}\n</Progress_Evaluation>\n"
        f"<Decision_Rationale>\n{o.decision_rationale}\n{dr_close}\n"
        f"<History_Summary>\n{o.history_summary}\n{hs_close}\n"
        f"{a_open}\n{{{{'action': 'click', 'value': 'Apply', 'position': [0.3, 0.66]}}}}\n{a_close}\n"
    )


def parser_corpus(rng):
    words = "open tap the settings page button search result user login cart order battery saver next screen".split()
    texts = ["", "Done.", "Multi-line\nreasoning here.", 'Quotes "inside" and <angle> brackets', "Ünïcödé text ✓"]
    kinds = ["click", "long_press", "scroll", "type_text", "open_app", "navigate_home", "navigate_back", "wait", "complete", "impossible"]
    out = []
    for i in range(50):
        kind = kinds[i % len(kinds)]
        def sentence():
            if rng.random() < 0.25:
                return texts[int(rng.integers(len(texts)))]
            return " ".join(rng.choice(words, size=int(rng.integers(3, 10)))).capitalize() + "."
        value = position = region = None
        if kind in ("click", "long_press"):
            position = Point(round(float(rng.random()), 6), round(float(rng.random()), 6))
            value = rng.choice(["Apply", "OK", None, "Settings"])
        elif kind == "scroll":
            xs = sorted(round(float(v), 6) for v in rng.random(2))
            ys = sorted(round(float(v), 6) for v in rng.random(2))
            region = BoundingBox(xs[0], ys[0], xs[1], ys[1])
            value = rng.choice(["Down", "Up"])
        elif kind in ("type_text", "open_app"):
            value = rng.choice(["hello", "New York", "it's \"quoted\"", "line\nbreak", "Gmail"])
        elif kind == "wait":
            value = rng.choice([None, "2s"])
        out.append(serialize_agent_output(ParsedAgentOutput(sentence(), sentence(), sentence(), Action(kind, value, position, region))))
    return out


def optimizer_batches(rng):
    batches = []
    for i in range(20):
        n_groups = int(rng.integers(1, 4))
        groups = []
        for _ in range(n_groups):
            g = int(rng.integers(1, 5))
            seqs = []
            for _ in range(g):
                n = int(rng.integers(1, 5))
                # quarter-step grid values keep the batch readable
                logp = (-np.round(rng.uniform(0.05, 3.0, n) * 4) / 4).tolist()
                old = [min(0.0, v + float(np.round(rng.normal(0, 0.3) * 4) / 4)) for v in logp]
                ref = [min(0.0, v + float(np.round(rng.normal(0, 0.3) * 4) / 4)) for v in logp]
                seqs.append({"logp": logp, "logp_old": old, "logp_ref": ref, "reward": float(rng.integers(0, 3)) / 2})
            groups.append(seqs)
        batch = {
            "groups": groups,
            "beta": [0.0, 0.04, 0.1][i % 3],
            "eps_low": 0.2,
            "eps_init": 0.4,
            "eps_end": 0.2,
            "k": [0, 25, 50, 100][i % 4],
            "K": 100,
        }
        batch["expected_objective"] = scalar_grpo_objective(batch)
        batches.append(batch)
    return batches


def hashing_vectors():
    emb = HashingEmbedder(256)
    inputs = ["abc", "a", "login page", "login pages", "Open the Settings application and enable battery saver mode.", "Ünïcödé ✓", "  spaces  "]
    return [{"input": s, "vector": [float(v).hex() for v in emb.embed_text(s)]} for s in inputs]


def failed_mlb_trajectory():
    t = run_script(
        COMPOSITE, "mlb_reminder",
        [
            ("click", "app_bbc", None), ("click", "bbc_search", None), ("type_text", None, "MLB"),
            ("click", "bbc_mlb_next", None), ("navigate_home", None, None), ("click", "app_clock", None),
            ("click", "clock_alarms", None),
        ],
        "mlb.failed",
    )
    assert not t.success
    return t


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240617)
    files = {}

    def put(name, filename, kind, text):
        (OUT / filename).write_text(text, encoding="utf-8")
        files[name] = {"path": filename, "type": kind, "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest()}

    def put_json(name, filename, kind, obj):
        put(name, filename, kind, json.dumps(obj, indent=1, ensure_ascii=False) + "\n")

    for name, spec in ENVIRONMENTS.items():
        EnvSpec.from_dict(spec)  # validate
        put_json(name, f"{name}.json", "environment", spec)
    put_json("env-trap-memory", "env-trap-memory.json", "memory_seed", memory_seeds())

    put_json("memory-episodic-battery", "memory-episodic-battery.json", "episodic_scenario", {
        "task": "Open the Settings application and enable battery saver mode.",
        "environment": "env-settings",
        "env_task": "battery_saver",
        "history": [
            {"pre": "HomeScreen", "action": "click(Settings)", "post": "SettingsPage"},
            {"pre": "SettingsPage", "action": "scroll(Down)", "post": "BatterySection"},
        ],
        "next_action": "click(BatterySaverToggle)",
    })
    put_json("memory-semantic-login", "memory-semantic-login.json", "semantic_seed", {
        "rule_text": "Users typically need to log in before accessing personal account pages or order history.",
        "source_instruction": "Access the personal order history page in a shopping application.",
        "environment": "env-shopping",
        "env_task": "order_history",
        "expected_actions": ["click(Login)", "type_text(Account)", "type_text(Password)"],
    })
    put_json("memory-experiential-reimburse", "memory-experiential-reimburse.json", "experiential_seed", {
        "summary": (
            "For reimbursement tasks, PDF files are usually stored in the Downloads folder after attachment "
            "extraction. Uploading directly from Downloads is more reliable than selecting recent files."
        ),
        "trajectory": records.trajectory_to_record(reimburse_trajectory()),
    })
    put_json("memory-collaborative-flight", "memory-collaborative-flight.json", "collaborative_scenario", {
        "task": "Book a flight ticket and save the itinerary screenshot.",
        "semantic": {
            "rule_text": "Flight booking usually requires selecting departure city, destination, date, and passenger information before payment.",
            "source_instruction": "Book a flight ticket and save the itinerary screenshot.",
        },
        "experiential_summary": "The itinerary screenshot is typically displayed after payment confirmation and can be captured before closing the booking page.",
    })
    put("agent-output-apply", "agent-output-apply.txt", "agent_output", apply_text(balanced=True))
    put("agent-output-unbalanced", "agent-output-unbalanced.txt", "text", apply_text(balanced=False))
    put("parser-corpus", "parser-corpus.jsonl", "parser_corpus",
        "".join(json.dumps({"text": t}, ensure_ascii=False) + "\n" for t in parser_corpus(rng)))
    put_json("optimizer-batches", "optimizer-batches.json", "optimizer_batches", optimizer_batches(rng))
    put_json("hashing-vectors", "hashing-vectors.json", "hashing_vectors", hashing_vectors())
    put("failed-mlb-trajectory", "failed-mlb-trajectory.records", "trajectories",
        records.dumps(records.trajectory_to_record(failed_mlb_trajectory())) + "\n")

    (OUT / "manifest.json").write_text(json.dumps({"version": 1, "fixtures": files}, indent=1) + "\n")
    print(f"wrote {len(files)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
