"""``mnemo`` command-line entry point.

Every subcommand reads and writes line-delimited records (see ``records``);
output goes to ``--out`` (written atomically) or to stdout. Exit status is 0 on
success, 2 on usage errors and 1 on any other error, with a one-line diagnostic
on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import records
from .config import Config, load_config
from .core import BoundingBox, Observation
from .errors import MnemoError, UsageError
from .fixtures import load_fixture
from .hindsight import FilterConfig, as_samples, build_splits, filter_trajectories, relabel_pool, write_split
from .memory import MemoryRepository
from .optimizer import OptimizationBatch, SequenceLogProbs, grpo_logp_gradient, grpo_objective
from .policies import make_policy
from .rewards import GroundTruth, check_ground_truth, evaluate_reward
from .sim import EnvSpec, EpisodeConfig, FixtureVerifier, ScriptedEnvironment, run_episode

ENV_FIXTURES = ("login", "settings", "shopping", "composite", "trap")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _emit(lines: Iterable[dict], out: Optional[str]) -> int:
    text = "".join(records.dumps(r) + "\n" for r in lines)
    if out:
        records.atomic_write_text(out, text)
    else:
        sys.stdout.write(text)
    return 0


def _rec(record_type: str, **fields) -> dict:
    return {"format_version": records.FORMAT_VERSION, "record": record_type, **fields}


def _env_spec(name: str) -> EnvSpec:
    return load_fixture(name if name.startswith("env-") else f"env-{name}")


def _load_store(path: Optional[str], cfg: Config) -> MemoryRepository:
    provider = cfg.make_provider()
    if path is None:
        return MemoryRepository(provider, cfg.horizon)
    return MemoryRepository.load(path, provider, cfg.horizon)


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args, cfg: Config) -> int:
    """Add semantic rules and successful trajectories to a memory store."""
    repo = _load_store(args.store, cfg)
    counts = Counter()
    for rec in records.read_jsonl(args.input):
        kind = rec.get("record", "trajectory")
        if kind == "semantic":
            records.check_version(rec)
            repo.add_semantic_entry(rec["rule_text"], rec["source_instruction"])
            counts["semantic"] += 1
        elif kind == "trajectory":
            traj = records.trajectory_from_record(rec)
            if not traj.success:
                counts["skipped_failed"] += 1
                continue
            try:
                repo.add_experiential_entry(traj)
                counts["experiential"] += 1
            except MnemoError:
                counts["duplicates"] += 1
        else:
            raise records.RecordError(f"ingest cannot use {kind!r} records")
    repo.persist(args.store)
    return _emit(
        [_rec("ingest_summary", semantic_added=counts["semantic"], experiential_added=counts["experiential"],
              duplicates=counts["duplicates"], skipped_failed=counts["skipped_failed"],
              semantic_total=len(repo.semantic_entries), experiential_total=len(repo.experiential_entries))],
        args.out,
    )


def cmd_query_memory(args, cfg: Config) -> int:
    repo = _load_store(args.store, cfg)
    obs = Observation("query")
    if args.obs:
        obs = records.observation_from_dict(json.loads(Path(args.obs).read_text(encoding="utf-8")))
    out = []
    for rank, hit in enumerate(repo.retrieve_semantic(args.query, cfg.top_k), 1):
        out.append(_rec("hit", memory="semantic", rank=rank, entry_id=hit.entry_id, score=hit.score, text=hit.text))
    exp = repo.retrieve_experiential(args.query, obs, cfg.top_k, cfg.lam, cfg.retrieval_strategy())
    for rank, hit in enumerate(exp, 1):
        out.append(_rec("hit", memory="experiential", rank=rank, entry_id=hit.entry_id, score=hit.score, text=hit.text))
    return _emit(out, args.out)


def _ground_truth(d: dict) -> GroundTruth:
    box = d.get("target_box")
    return check_ground_truth(
        GroundTruth(d["action_kind"], None if box is None else BoundingBox(*box), d.get("target_answer"))
    )


def cmd_reward_eval(args, cfg: Config) -> int:
    """Score ``reward_case`` records: {id, output, ground_truth}."""
    weights = cfg.weights()
    out = []
    for rec in records.read_jsonl(args.input):
        records.check_version(rec)
        rb = evaluate_reward(rec["output"], _ground_truth(rec["ground_truth"]), weights)
        out.append(_rec("reward", id=rec.get("id"), r_format=rb.r_format, r_type=rb.r_type,
                        r_param=rb.r_param, r_acc=rb.r_acc, r_total=rb.r_total))
    return _emit(out, args.out)


def read_batch(path: str, cfg: Config, k: float) -> tuple[OptimizationBatch, list]:
    """Group ``sequence`` records ({group, reward, logp, logp_old, logp_ref}) into a batch."""
    groups: dict = {}
    for rec in records.read_jsonl(path):
        records.check_version(rec)
        if rec.get("record", "sequence") != "sequence":
            raise records.RecordError(f"grpo batch files hold sequence records, got {rec.get('record')!r}")
        groups.setdefault(rec["group"], []).append(
            SequenceLogProbs(rec["logp"], rec["logp_old"], rec["logp_ref"], float(rec["reward"]))
        )
    keys = list(groups)
    batch = OptimizationBatch(tuple(tuple(groups[g]) for g in keys), cfg.beta, cfg.schedule(), k)
    return batch, keys


def cmd_grpo_step(args, cfg: Config) -> int:
    """Objective, advantages and dJ/dlogp per token for one batch at training step k."""
    batch, keys = read_batch(args.batch, cfg, args.k)
    result = grpo_objective(batch)
    grads = grpo_logp_gradient(batch)
    sched = batch.schedule
    out = [_rec("grpo_summary", k=args.k, K=sched.total_steps, eps_low=sched.eps_low, eps_cur=result.eps_cur,
                beta=batch.beta, objective=result.objective, loss=result.loss, groups=len(keys))]
    for key, g, gr, gg in zip(keys, batch.groups, result.groups, grads):
        out.append(_rec("grpo_group", group=key, objective=gr.objective, size=len(g)))
        for i, (s, adv, grad) in enumerate(zip(g, gr.advantages, gg)):
            ratio = np.exp(s.logp - s.logp_old)
            out.append(_rec("grpo_sequence", group=key, index=i, reward=s.reward, advantage=float(adv),
                            ratio=ratio.tolist(), grad_logp=grad.tolist()))
    return _emit(out, args.out)


def _fixture_specs(names: Optional[Sequence[str]]) -> list[EnvSpec]:
    return [_env_spec(n) for n in (names or ENV_FIXTURES)]


def cmd_relabel(args, cfg: Config) -> int:
    if args.verifier != "fixture":
        raise UsageError(f"unknown verifier {args.verifier!r} (available: fixture)")
    pool = records.read_trajectories(args.input)
    samples = relabel_pool(pool, FixtureVerifier(_fixture_specs(args.fixture)))
    out = []
    for s in samples:
        rec = records.trajectory_to_record(s.trajectory)
        rec["provenance"] = s.provenance()
        out.append(rec)
    return _emit(out, args.out)


def cmd_split(args, cfg: Config) -> int:
    pool = records.read_trajectories(args.input)
    if not args.no_filter:
        pool = filter_trajectories(pool, FilterConfig(cfg.min_steps))
    split = build_splits(as_samples(pool), (cfg.quota_ground, cfg.quota_evolve), cfg.seed)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    write_split(split, args.out)
    return _emit([_rec("split_summary", seed=cfg.seed, pool=len(pool), ground=len(split.ground),
                       evolve=len(split.evolve), unassigned=len(split.unassigned))], None)


def cmd_simulate(args, cfg: Config) -> int:
    spec = _env_spec(args.fixture)
    task = args.task or next(iter(spec.tasks))
    if task not in spec.tasks:
        raise UsageError(f"fixture {spec.name!r} has no task {task!r}; tasks: {', '.join(spec.tasks)}")
    repo = _load_store(args.store, cfg)
    if args.memory_seed:
        load_fixture(args.memory_seed).apply(repo)
    before = len(repo.experiential_entries)
    env = ScriptedEnvironment(spec, seed=cfg.seed, jitter=0.0 if args.no_jitter else cfg.jitter)
    policy = make_policy(args.policy, spec.tasks[task])
    results = []
    for i in range(args.episodes):
        ecfg = EpisodeConfig(cfg.horizon, cfg.top_k, cfg.lam, cfg.retrieval_strategy(), cfg.failure_cap, cfg.seed + i)
        results.append(run_episode(env, task, policy, repo, ecfg))
    if args.store:
        repo.persist(args.store)
    lines = []
    for i, r in enumerate(results):
        rec = records.trajectory_to_record(r.trajectory)
        rec["episode"] = {"index": i, "seed": cfg.seed + i, "steps_used": r.steps_used,
                          "rewards": list(r.rewards), "memory_entry": r.memory_entry}
        lines.append(rec)
    if args.out:
        _emit(lines, args.out)
    summary = _rec("simulate_summary", fixture=spec.name, task=task, policy=args.policy, episodes=len(results),
                   successes=sum(r.success for r in results),
                   new_experiential=len(repo.experiential_entries) - before)
    return _emit([summary], None)


def _describe_file(path: Path) -> dict:
    if path.is_dir():
        if (path / "manifest").exists():
            repo = MemoryRepository.load(path)
            return _rec("stats", path=str(path), kind="memory_store", semantic=len(repo.semantic_entries),
                        experiential=len(repo.experiential_entries))
        raise records.RecordError(f"{path} is not a memory store")
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{") and "\n" in stripped.rstrip():
        recs = list(records.read_jsonl(path))
    elif stripped.startswith("{"):
        recs = [json.loads(stripped)]
    else:
        raise records.RecordError(f"{path}: not a record file")
    kinds = Counter()
    for r in recs:
        records.check_version(r)
        kind = r.get("record", "trajectory")
        if kind == "trajectory":
            records.trajectory_from_record(r)
        kinds[kind] += 1
    extra = {}
    trajs = [r for r in recs if r.get("record", "trajectory") == "trajectory"]
    if trajs:
        extra = {"successes": sum(bool(r["success"]) for r in trajs),
                 "mean_steps": sum(len(r["steps"]) for r in trajs) / len(trajs)}
    return _rec("stats", path=str(path), kind="records", total=len(recs), by_record=dict(sorted(kinds.items())), **extra)


def cmd_stats(args, cfg: Config) -> int:
    return _emit([_describe_file(Path(p)) for p in args.input], args.out)


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mnemo", description="Memory-augmented GUI agent tools.")
    p.add_argument("--config", help="JSON config file (default: $MNEMO_CONFIG)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(fn=fn)
        return sp

    def retrieval_flags(sp):
        sp.add_argument("--top-k", type=int, dest="top_k")
        sp.add_argument("--lam", type=float)
        sp.add_argument("--strategy", choices=["top_k", "mixed", "success_only"])
        sp.add_argument("--horizon", type=int)

    sp = add("ingest", cmd_ingest, "Add trajectory and semantic records to a memory store.")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--out")

    sp = add("query-memory", cmd_query_memory, "Retrieve semantic and experiential hits for an instruction.")
    sp.add_argument("--store", required=True)
    sp.add_argument("--query", required=True)
    sp.add_argument("--obs", help="observation JSON (screen_id, widgets); empty screen if omitted")
    sp.add_argument("--out")
    retrieval_flags(sp)

    sp = add("reward-eval", cmd_reward_eval, "Score agent outputs against ground-truth actions.")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out")
    for flag in ("w_f", "w_a", "w_t", "w_p", "tau_iou"):
        sp.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=float)

    sp = add("grpo-step", cmd_grpo_step, "Evaluate the clipped group-relative objective on a batch.")
    sp.add_argument("--batch", required=True)
    sp.add_argument("--k", type=float, default=0, help="current training step")
    sp.add_argument("--K", type=int, dest="total_steps", help="total training steps")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--eps-low", dest="eps_low", type=float)
    sp.add_argument("--eps-init", dest="eps_init", type=float)
    sp.add_argument("--eps-end", dest="eps_end", type=float)
    sp.add_argument("--out")

    sp = add("relabel", cmd_relabel, "Hindsight-relabel failed trajectories against verified sub-goals.")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--verifier", default="fixture")
    sp.add_argument("--fixture", action="append", help="environment fixture(s) providing sub-goals (default: all)")
    sp.add_argument("--out")

    sp = add("split", cmd_split, "Filter a trajectory pool and draw the ground/evolve splits.")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--ground", type=int, dest="quota_ground")
    sp.add_argument("--evolve", type=int, dest="quota_evolve")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--min-steps", type=int, dest="min_steps")
    sp.add_argument("--no-filter", action="store_true")

    sp = add("simulate", cmd_simulate, "Run scripted episodes in a fixture environment.")
    sp.add_argument("--fixture", required=True, help=f"one of {', '.join(ENV_FIXTURES)}")
    sp.add_argument("--task")
    sp.add_argument("--policy", default="oracle", choices=["oracle", "scripted", "blind", "malformed"])
    sp.add_argument("--episodes", type=int, default=1)
    sp.add_argument("--store", help="memory store directory (loaded if present, written after the run)")
    sp.add_argument("--memory-seed", help="memory seed fixture to load first, e.g. env-trap-memory")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--no-jitter", action="store_true")
    sp.add_argument("--out", help="episode trajectory records")
    retrieval_flags(sp)

    sp = add("stats", cmd_stats, "Summarize record files or memory stores emitted by other subcommands.")
    sp.add_argument("input", nargs="+")
    sp.add_argument("--out")
    return p


_CONFIG_FLAGS = ("top_k", "lam", "strategy", "horizon", "w_f", "w_a", "w_t", "w_p", "tau_iou", "total_steps", "beta",
                 "eps_low", "eps_init", "eps_end", "quota_ground", "quota_evolve", "seed", "min_steps")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
        cfg = load_config(args.config, overrides)
        if getattr(args, "episodes", 1) < 0:
            raise UsageError("--episodes must be non-negative")
        return args.fn(args, cfg)
    except UsageError as exc:
        print(f"mnemo: usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any failure becomes a diagnostic and a nonzero status
        print(f"mnemo: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
