import json

import numpy as np
import pytest

from mnemo import records
from mnemo.cli import main
from mnemo.fixtures import fixture_path, load_fixture
from mnemo.sim import FixtureVerifier

from .oracles import hindsight_oracle, scalar_eps, scalar_grpo_objective


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, [json.loads(l) for l in out.splitlines() if l.strip()], err


def lines(path):
    return [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines()]


def test_simulate_oracle_login(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--fixture", "login", "--policy", "oracle", "--episodes", "5",
                       "--store", str(tmp_path / "st"), "--out", str(tmp_path / "eps.records"))
    assert code == 0
    assert out[0]["episodes"] == 5 and out[0]["successes"] == 5 and out[0]["new_experiential"] == 5
    assert len(lines(tmp_path / "eps.records")) == 5
    code, out, _ = run(capsys, "stats", str(tmp_path / "st"))
    assert out[0]["experiential"] == 5


def test_simulate_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "simulate", "--fixture", "composite", "--episodes", "3", "--out", str(tmp_path / f"{d}.records"),
                   "--store", str(tmp_path / d))[0] == 0
    assert (tmp_path / "a.records").read_bytes() == (tmp_path / "b.records").read_bytes()
    for name in ("manifest", "semantic.jsonl", "experiential.jsonl", "trajectories.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_relabel_matches_oracle(tmp_path, capsys):
    failed = tmp_path / "failed.records"
    # a few failed episodes from the blind policy plus the pinned failed trajectory
    run(capsys, "simulate", "--fixture", "trap", "--policy", "blind", "--episodes", "3", "--out", str(failed))
    pool = records.read_trajectories(failed) + load_fixture("failed-mlb-trajectory")
    records.write_trajectories(failed, pool)
    code, _, _ = run(capsys, "relabel", "--in", str(failed), "--verifier", "fixture", "--out", str(tmp_path / "rel.records"))
    assert code == 0
    verifier = FixtureVerifier([load_fixture(f"env-{n}") for n in ("login", "settings", "shopping", "composite", "trap")])
    expected = sum(
        len(hindsight_oracle(len(t.transitions), verifier.candidates(t), lambda k, g, t=t: verifier.verify(t.transitions[:k], g)))
        for t in pool
    )
    got = lines(tmp_path / "rel.records")
    assert len(got) == expected > 0
    assert all(r["success"] and r["provenance"]["source"] == "relabeled" for r in got)


def _write_batch(path, case):
    recs = []
    for gi, group in enumerate(case["groups"]):
        for s in group:
            recs.append({"format_version": 1, "record": "sequence", "group": f"g{gi}", "reward": s["reward"],
                         "logp": s["logp"], "logp_old": s["logp_old"], "logp_ref": s["logp_ref"]})
    records.write_jsonl(path, recs)


def test_grpo_step(tmp_path, capsys):
    case = load_fixture("optimizer-batches")[4].raw
    batch = tmp_path / "batch.records"
    _write_batch(batch, case)
    code, out, _ = run(capsys, "grpo-step", "--batch", str(batch), "--k", "0", "--K", "100")
    assert code == 0
    assert out[0]["eps_cur"] == 0.4
    code, out, _ = run(capsys, "grpo-step", "--batch", str(batch), "--k", str(case["k"]), "--K", "100",
                       "--beta", str(case["beta"]))
    summary = out[0]
    assert summary["eps_cur"] == pytest.approx(scalar_eps(case["k"], 100, 0.4, 0.2), abs=1e-9)
    assert summary["objective"] == pytest.approx(scalar_grpo_objective(case), rel=1e-8, abs=1e-9)
    assert sum(r["record"] == "grpo_sequence" for r in out) == sum(len(g) for g in case["groups"])


def test_reward_eval(tmp_path, capsys):
    text = fixture_path("agent-output-apply").read_text(encoding="utf-8")
    cases = tmp_path / "cases.records"
    records.write_jsonl(cases, [
        {"format_version": 1, "record": "reward_case", "id": "apply", "output": text,
         "ground_truth": {"action_kind": "click", "target_box": [0.25, 0.6, 0.35, 0.7]}},
        {"format_version": 1, "record": "reward_case", "id": "junk", "output": "no tags",
         "ground_truth": {"action_kind": "click", "target_box": [0.25, 0.6, 0.35, 0.7]}},
    ])
    code, out, _ = run(capsys, "reward-eval", "--in", str(cases))
    assert code == 0
    assert [r["r_total"] for r in out] == [1.0, 0.0]


def test_ingest_query_split_and_closure(tmp_path, capsys):
    eps = tmp_path / "eps.records"
    run(capsys, "simulate", "--fixture", "login", "--episodes", "6", "--out", str(eps))
    sem = tmp_path / "rules.records"
    seed = load_fixture("memory-semantic-login")
    records.write_jsonl(sem, [{"format_version": 1, "record": "semantic", "rule_text": seed.rule_text,
                               "source_instruction": seed.source_instruction}])
    store = tmp_path / "st"
    assert run(capsys, "ingest", "--in", str(sem), "--store", str(store))[0] == 0
    code, out, _ = run(capsys, "ingest", "--in", str(eps), "--store", str(store), "--out", str(tmp_path / "ingest.records"))
    assert code == 0
    summary = lines(tmp_path / "ingest.records")[0]
    assert summary["experiential_added"] == 6 and summary["semantic_total"] == 1
    code, out, _ = run(capsys, "query-memory", "--store", str(store), "--query", seed.source_instruction,
                       "--top-k", "2", "--out", str(tmp_path / "hits.records"))
    hits = lines(tmp_path / "hits.records")
    assert hits[0]["memory"] == "semantic" and hits[0]["score"] == 1.0
    assert sum(h["memory"] == "experiential" for h in hits) == 2
    code, out, _ = run(capsys, "split", "--in", str(eps), "--ground", "2", "--evolve", "3", "--seed", "4",
                       "--out", str(tmp_path / "split"))
    assert code == 0 and out[0]["unassigned"] == 1
    # every emitted file is readable by the CLI again
    emitted = [eps, tmp_path / "ingest.records", tmp_path / "hits.records", tmp_path / "split" / "ground.records",
               tmp_path / "split" / "evolve.records", tmp_path / "split" / "split_manifest.json", store]
    code, out, _ = run(capsys, "stats", *map(str, emitted), "--out", str(tmp_path / "stats.records"))
    assert code == 0 and len(out) == 0
    assert len(lines(tmp_path / "stats.records")) == len(emitted)
    assert run(capsys, "stats", str(tmp_path / "stats.records"))[0] == 0
    assert run(capsys, "ingest", "--in", str(tmp_path / "split" / "ground.records"), "--store", str(tmp_path / "st2"))[0] == 0
    assert run(capsys, "relabel", "--in", str(tmp_path / "split" / "evolve.records"))[0] == 0


def test_errors(tmp_path, capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and "usage error" in err
    code, _, err = run(capsys, "simulate", "--fixture", "login", "--bogus")
    assert code == 2
    code, _, err = run(capsys, "simulate", "--fixture", "nowhere")
    assert code == 1 and "UnknownFixture" in err
    code, _, err = run(capsys, "relabel", "--in", str(tmp_path / "missing.records"))
    assert code == 1 and err.startswith("mnemo: error:")
    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown_key": 1}')
    code, _, err = run(capsys, "--config", str(bad), "stats", str(bad))
    assert code == 1 and "ConfigError" in err
    code, _, err = run(capsys, "grpo-step", "--batch", str(bad), "--k", "200", "--K", "100")
    assert code == 1


def test_config_file_and_flags(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"eps_init": 0.5}))
    batch = tmp_path / "b.records"
    _write_batch(batch, load_fixture("optimizer-batches")[0].raw)
    monkeypatch.setenv("MNEMO_CONFIG", str(cfg))
    assert run(capsys, "grpo-step", "--batch", str(batch), "--k", "0")[1][0]["eps_cur"] == 0.5
    assert run(capsys, "grpo-step", "--batch", str(batch), "--k", "0", "--eps-init", "0.45")[1][0]["eps_cur"] == 0.45
