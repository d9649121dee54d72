"""Command line entry point: ``crossmodal-il <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
from pathlib import Path

import yaml

from . import __version__
from .harness import (
    DEFAULT_LEXICON,
    ExpertAgent,
    SeedOverlapError,
    StudentAgent,
    ablation_suite,
    evaluate,
    noise_sweep,
    paraphrase_instructions,
    run_episodes,
    trajectory_records,
)
from .policy import PolicyParams
from .tasks import family_suite, generate_tasks, load_tasks, save_tasks
from .trainer import TrainConfig, collect_demos, dagger_dpo_suite, train_bc

log = logging.getLogger("crossmodal_il")


class ConfigError(Exception):
    pass


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# ------------------------------------------------------------------- config


# flag name -> TrainConfig field
_FLAGS = {
    "beta": "beta", "trials": "max_trials", "epochs_per_trial": "epochs_per_trial",
    "batch_size": "batch_size", "lr": "learning_rate", "bc_lr": "bc_learning_rate",
    "bc_epochs": "bc_epochs", "loss": "loss_mode", "rollout": "rollout_mode", "seed": "seed",
    "policy_dim": "policy_dim", "memory_capacity": "memory_capacity",
}


def read_config_file(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of config fields")
    return data


def build_config(args) -> TrainConfig:
    d = read_config_file(args.config) if args.config else {}
    for flag, name in _FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            d[name] = v
    if args.no_retrospection:
        d["retrospection"] = False
    if args.no_bc_init:
        d["bc_init"] = False
    if args.blind_expert:
        d["blind_expert"] = True
    try:
        return TrainConfig.from_dict(d)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


# ------------------------------------------------------------------- helpers


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_manifest(out: Path, args, config: TrainConfig | None, **extra) -> None:
    m = {
        "command": args.command,
        "version": version_string(),
        "config": config.to_dict() if config else None,
        "seed": args.seed,
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(m, indent=1, sort_keys=True) + "\n")


def _seeds(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _rates(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _tasks(args):
    if getattr(args, "tasks_file", None):
        return load_tasks(args.tasks_file)
    if getattr(args, "suite", None):
        return [t for s in _seeds(args.suite) for t in family_suite(s)]
    return generate_tasks(args.tasks, args.seed)


def _demos(args, config):
    src = generate_tasks(args.demo_tasks, args.demo_seed)
    return src, collect_demos(src, len(src), config)


def _ref(args, config) -> PolicyParams:
    if args.ref:
        return PolicyParams.load(args.ref)
    _, demos = _demos(args, config)
    return train_bc(demos, config)


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def _train_seeds(path) -> set[int] | None:
    if not path:
        return None
    m = json.loads(Path(path).read_text())
    return set(m.get("task_seeds", [])) | set(m.get("demo_task_seeds", []))


# ------------------------------------------------------------------ commands


def cmd_gen_tasks(args, config):
    out = _out(args)
    tasks = _tasks(args)
    save_tasks(tasks, out / "tasks.jsonl")
    _write_manifest(out, args, None, task_seeds=[t.seed for t in tasks])


def cmd_collect_demos(args, config):
    out = _out(args)
    tasks = _tasks(args)
    demos = collect_demos(tasks, len(tasks), config)
    rows = []
    for ep_i, ep in enumerate(demos):
        for t, d in enumerate(ep):
            rows.append({"episode": ep_i, "step": t, "instruction": d.instruction,
                         "s_v": [float(x) for x in d.obs.features], "action": d.expert_action.surface,
                         "candidates": [a.surface for a in d.candidates]})
    _write_jsonl(out / "demos.jsonl", rows)
    _write_manifest(out, args, config, task_seeds=[t.seed for t in tasks], episodes=len(demos))


def cmd_train_bc(args, config):
    out = _out(args)
    src, demos = _demos(args, config)
    losses: list[float] = []
    ref = train_bc(demos, config, losses=losses)
    ref.save(out / "ref.json")
    (out / "bc_loss.csv").write_text("epoch,loss\n" + "".join(f"{i + 1},{x:.6f}\n" for i, x in enumerate(losses)))
    _write_manifest(out, args, config, demo_task_seeds=[t.seed for t in src])


def cmd_train(args, config):
    out = _out(args)
    tasks = _tasks(args)
    ref = _ref(args, config)
    theta, tl = dagger_dpo_suite(tasks, config, ref)
    theta.save(out / "params.json")
    (out / "trial_log.jsonl").write_text(tl.to_jsonl(timing=not args.no_timing))
    curve = tl.padded_curve(config.max_trials)
    (out / "curve.csv").write_text("trial,success_rate\n" + "".join(f"{i + 1},{x:.6f}\n" for i, x in enumerate(curve)))
    _write_jsonl(out / "feedback.jsonl", tl.feedback)
    demo_seeds = [] if args.ref else [t.seed for t in generate_tasks(args.demo_tasks, args.demo_seed)]
    _write_manifest(out, args, config, task_seeds=[t.seed for t in tasks], demo_task_seeds=demo_seeds)


def _agent(args, config):
    if args.agent == "student":
        if not args.params:
            raise ConfigError("--params is required for the student agent")
        return StudentAgent(PolicyParams.load(args.params), args.noise_rate, config.obs_salt, config.obs_dim)
    return ExpertAgent(blind=args.agent == "blind-expert", text_noise=args.noise_rate)


def cmd_evaluate(args, config):
    out = _out(args)
    tasks = _tasks(args)
    agent = _agent(args, config)
    try:
        report = evaluate(agent, tasks, args.seed, train_seeds=_train_seeds(args.train_manifest))
    except SeedOverlapError as e:
        raise ConfigError(str(e)) from None
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "report.csv").write_text(report.to_csv())
    if args.trajectories:
        eps = run_episodes(agent, tasks, args.seed)
        _write_jsonl(out / "trajectories.jsonl",
                     (r for inst, ep in zip(tasks, eps) for r in trajectory_records(inst, ep)))
    _write_manifest(out, args, config, task_seeds=[t.seed for t in tasks], agent=args.agent)
    print(f"success_rate={report.success_rate:.4f} avg_steps={report.avg_steps:.2f}")


def cmd_noise_sweep(args, config):
    out = _out(args)
    tasks = _tasks(args)
    params = PolicyParams.load(args.params) if args.params else None
    if args.channel == "student-visual" and params is None:
        raise ConfigError("--params is required for the student-visual channel")
    rates = _rates(args.rates)
    if any(not 0.0 <= r <= 1.0 for r in rates):
        raise ConfigError("--rates must lie in [0, 1]")
    rep = noise_sweep(args.channel, tasks, rates, _seeds(args.seeds), params,
                      obs_salt=config.obs_salt, obs_dim=config.obs_dim)
    (out / "noise.csv").write_text(rep.to_csv())
    (out / "noise.json").write_text(json.dumps(rep.to_dict(), sort_keys=True) + "\n")
    _write_manifest(out, args, config, task_seeds=[t.seed for t in tasks], seeds=_seeds(args.seeds))


_VARIANTS = {
    "default": {},
    "no-retrospection": {"retrospection": False},
    "no-bc-init": {"bc_init": False},
    "ce": {"loss_mode": "ce"},
}


def cmd_ablate(args, config):
    out = _out(args)
    names = [v.strip() for v in args.variants.split(",") if v.strip()]
    unknown = [n for n in names if n not in _VARIANTS]
    if unknown:
        raise ConfigError(f"unknown variants {unknown}; choose from {sorted(_VARIANTS)}")
    base = config.to_dict()
    variants = [TrainConfig.from_dict({**base, **_VARIANTS[n]}) for n in names]
    ref = _ref(args, config)
    if args.tasks_file:
        tasks = load_tasks(args.tasks_file)
    else:
        def tasks(seed):
            return family_suite(seed)
    table = ablation_suite(variants, tasks, _seeds(args.seeds), ref, base=config)
    (out / "ablation.csv").write_text(table.to_csv())
    _write_manifest(out, args, config, seeds=_seeds(args.seeds), variants=names)


def cmd_paraphrase_eval(args, config):
    out = _out(args)
    tasks = _tasks(args)
    lexicon = read_config_file(args.lexicon) if args.lexicon else DEFAULT_LEXICON
    para = paraphrase_instructions(tasks, lexicon, args.seed)
    agent = StudentAgent(PolicyParams.load(args.params), 0.0, config.obs_salt, config.obs_dim)
    # the student is meant to be scored on the tasks it was trained on, so no seed guard here
    base = evaluate(agent, tasks, args.seed)
    new = evaluate(agent, para, args.seed)
    res = {"template": base.to_dict(), "paraphrase": new.to_dict(),
           "drop": base.success_rate - new.success_rate,
           "instructions": [[a.task.instruction, b.task.instruction] for a, b in zip(tasks, para)]}
    (out / "paraphrase.json").write_text(json.dumps(res, indent=1, sort_keys=True) + "\n")
    _write_manifest(out, args, config, task_seeds=[t.seed for t in tasks])
    print(f"template={base.success_rate:.4f} paraphrase={new.success_rate:.4f}")


# -------------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, tasks: bool = True) -> None:
    g = p.add_argument_group("training config")
    g.add_argument("--config", help="JSON or YAML file with config fields")
    g.add_argument("--beta", type=float)
    g.add_argument("--trials", type=int)
    g.add_argument("--epochs-per-trial", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--lr", type=float, help="DAgger-DPO learning rate")
    g.add_argument("--bc-lr", type=float)
    g.add_argument("--bc-epochs", type=int)
    g.add_argument("--loss", choices=["dpo", "ce"])
    g.add_argument("--rollout", choices=["sample", "greedy"])
    g.add_argument("--policy-dim", type=int)
    g.add_argument("--memory-capacity", type=int)
    g.add_argument("--no-retrospection", action="store_true")
    g.add_argument("--no-bc-init", action="store_true")
    g.add_argument("--blind-expert", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/latest")
    p.add_argument("--no-timing", action="store_true", help="omit wallclock fields for byte-stable logs")
    if tasks:
        t = p.add_argument_group("tasks")
        t.add_argument("--tasks", type=int, default=12, help="number of generated tasks")
        t.add_argument("--tasks-file", help="JSONL from gen-tasks")
        t.add_argument("--suite", help="comma-separated family-suite seeds (6 tasks each)")
    p.add_argument("--demo-tasks", type=int, default=60)
    p.add_argument("--demo-seed", type=int, default=999)
    p.add_argument("--ref", help="reference params JSON; trained by BC when omitted")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crossmodal-il", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    for name in ("gen-tasks", "collect-demos", "train-bc", "train"):
        _common(sub.add_parser(name))

    p = sub.add_parser("evaluate")
    _common(p)
    p.add_argument("--agent", choices=["student", "expert", "blind-expert"], default="student")
    p.add_argument("--params")
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--train-manifest", help="refuse tasks whose seeds appear in this manifest")
    p.add_argument("--trajectories", action="store_true", help="also write trajectories.jsonl")

    p = sub.add_parser("noise-sweep")
    _common(p)
    p.add_argument("--channel", choices=["student-visual", "expert-text"], required=True)
    p.add_argument("--params")
    p.add_argument("--rates", default="0,0.05,0.1,0.2,0.3")
    p.add_argument("--seeds", default="0,1,2")

    p = sub.add_parser("ablate")
    _common(p)
    p.add_argument("--variants", default="default,no-retrospection,no-bc-init,ce")
    p.add_argument("--seeds", default="0,1,2,3,4")

    p = sub.add_parser("paraphrase-eval")
    _common(p)
    p.add_argument("--params", required=True)
    p.add_argument("--lexicon", help="JSON or YAML mapping verb -> synonyms")
    return ap


COMMANDS = {
    "gen-tasks": cmd_gen_tasks,
    "collect-demos": cmd_collect_demos,
    "train-bc": cmd_train_bc,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "noise-sweep": cmd_noise_sweep,
    "ablate": cmd_ablate,
    "paraphrase-eval": cmd_paraphrase_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        if getattr(args, "noise_rate", 0.0) and not 0.0 <= args.noise_rate <= 1.0:
            raise ConfigError("--noise-rate must lie in [0, 1]")
        COMMANDS[args.command](args, config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
