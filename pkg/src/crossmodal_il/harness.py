"""Evaluation, noise sweeps, ablations and instruction paraphrasing."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .expert import MemoryPool, run_expert
from .observe import render_text, render_visual
from .policy import PolicyParams
from .tasks import TaskInstance, TaskSpec, TaskType
from .trainer import TrainConfig, dagger_dpo_suite, rollout
from .world import EPISODE_CAP, ActionInstance, WorldState

log = logging.getLogger(__name__)


# ------------------------------------------------------------------- agents


@dataclass
class Episode:
    success: bool
    states: list[WorldState]
    actions: list[ActionInstance]

    @property
    def steps(self) -> int:
        return len(self.actions)


@dataclass
class StudentAgent:
    """Greedy student acting on (optionally perturbed) visual observations."""

    params: PolicyParams
    visual_noise: float = 0.0
    obs_salt: int = 0
    obs_dim: int = 256

    def run(self, inst: TaskInstance, rng: np.random.Generator, cap: int = EPISODE_CAP) -> Episode:
        r = rollout(self.params, inst.world, inst.task, None, "greedy", cap, self.obs_salt, self.obs_dim,
                    self.visual_noise, rng)
        return Episode(r.success, r.states, r.actions)


@dataclass
class ExpertAgent:
    """The planner, privileged or blind, optionally reading noisy text."""

    blind: bool = False
    text_noise: float = 0.0
    memory: MemoryPool | None = None

    def run(self, inst: TaskInstance, rng: np.random.Generator, cap: int = EPISODE_CAP) -> Episode:
        ep = run_expert(inst.world, inst.task, self.memory, self.blind, cap, self.text_noise, rng)
        return Episode(ep.success, ep.states, ep.actions)


def as_agent(agent) -> StudentAgent | ExpertAgent:
    return StudentAgent(agent) if isinstance(agent, PolicyParams) else agent


# ------------------------------------------------------------------ reports


@dataclass(frozen=True)
class TaskResult:
    task_id: str
    task_type: str
    success: bool
    steps: int


@dataclass
class EvalReport:
    per_task: list[TaskResult]
    seed: int
    cap: int = EPISODE_CAP

    @property
    def success_rate(self) -> float:
        return sum(r.success for r in self.per_task) / len(self.per_task)

    @property
    def avg_steps(self) -> float:
        # failures are charged the full episode cap
        return float(np.mean([r.steps if r.success else self.cap for r in self.per_task]))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "successRate": self.success_rate,
            "avgSteps": self.avg_steps,
            "perTask": [
                {"taskId": r.task_id, "taskType": r.task_type, "success": r.success, "steps": r.steps}
                for r in self.per_task
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task_id", "task_type", "success", "steps"])
        for r in self.per_task:
            w.writerow([r.task_id, r.task_type, int(r.success), r.steps])
        return buf.getvalue()


class SeedOverlapError(ValueError):
    pass


def _episode_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index, 0xE7A1])


def run_episodes(agent, tasks: list[TaskInstance], seed: int, cap: int = EPISODE_CAP,
                 workers: int = 1) -> list[Episode]:
    """One episode per task, each on its own world copy and random stream."""
    agent = as_agent(agent)
    jobs = [(inst, _episode_rng(seed, i)) for i, inst in enumerate(tasks)]
    if workers <= 1:
        return [agent.run(inst, g, cap) for inst, g in jobs]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda j: agent.run(j[0], j[1], cap), jobs))


def evaluate(agent, tasks: list[TaskInstance], seed: int = 0, train_seeds=None,
             cap: int = EPISODE_CAP, workers: int = 1) -> EvalReport:
    """Greedy evaluation. ``train_seeds`` enables the held-out guard."""
    if not tasks:
        raise ValueError("no tasks to evaluate")
    if train_seeds is not None:
        overlap = sorted({t.seed for t in tasks} & set(train_seeds))
        if overlap:
            raise SeedOverlapError(f"evaluation tasks reuse training seeds {overlap[:5]}")
    eps = run_episodes(agent, tasks, seed, cap, workers)
    rows = [TaskResult(t.task_id, t.task.task_type.value, e.success, e.steps) for t, e in zip(tasks, eps)]
    return EvalReport(rows, seed, cap)


def trajectory_records(inst: TaskInstance, episode: Episode, obs_salt: int = 0, obs_dim: int = 256):
    """JSONL-ready rows carrying both views of every visited state."""
    for t, s in enumerate(episode.states):
        v = render_visual(s, s.last_action, obs_salt, obs_dim).features
        yield {
            "task_id": inst.task_id,
            "step": t,
            "state_hash": s.state_hash(),
            "s_v": [float(x) for x in v],
            "s_l": render_text(s, s.last_action).text,
            "action": episode.actions[t].surface if t < len(episode.actions) else None,
        }


# --------------------------------------------------------------- noise sweep


CHANNELS = {"student-visual": "visual", "expert-text": "text"}


@dataclass
class NoiseSweepReport:
    rates: list[float]
    success_by_rate: list[float]
    channel: str
    per_seed: list[list[float]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.rates) != len(self.success_by_rate):
            raise ValueError("rates and success_by_rate differ in length")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["channel", "rate", "success_rate"])
        for r, s in zip(self.rates, self.success_by_rate):
            w.writerow([self.channel, r, f"{s:.6f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"channel": self.channel, "rates": self.rates, "successByRate": self.success_by_rate,
                "perSeed": self.per_seed}


def noise_sweep(agent_spec: str, tasks: list[TaskInstance], rates, seeds, params: PolicyParams | None = None,
                cap: int = EPISODE_CAP, obs_salt: int = 0, obs_dim: int = 256) -> NoiseSweepReport:
    """Seed-averaged success rate at each noise rate for one channel."""
    if agent_spec not in CHANNELS:
        raise ValueError(f"agent spec must be one of {sorted(CHANNELS)}")
    if any(not 0.0 <= r <= 1.0 for r in rates):
        raise ValueError("noise rates must lie in [0, 1]")
    if agent_spec == "student-visual" and params is None:
        raise ValueError("student-visual sweep needs policy params")
    per_seed = []
    for seed in seeds:
        row = []
        for r in rates:
            if agent_spec == "student-visual":
                agent = StudentAgent(params, r, obs_salt, obs_dim)
            else:
                agent = ExpertAgent(blind=True, text_noise=r)
            row.append(evaluate(agent, tasks, seed, cap=cap).success_rate)
        per_seed.append(row)
    mean = np.mean(np.array(per_seed), axis=0) if per_seed else np.zeros(len(rates))
    return NoiseSweepReport(list(map(float, rates)), [float(x) for x in mean], CHANNELS[agent_spec], per_seed)


# ------------------------------------------------------------------ ablation


def config_delta(base: TrainConfig, variant: TrainConfig) -> dict:
    return {f.name: getattr(variant, f.name) for f in fields(TrainConfig)
            if f.name != "seed" and getattr(variant, f.name) != getattr(base, f.name)}


def variant_name(base: TrainConfig, variant: TrainConfig) -> str:
    delta = config_delta(base, variant)
    return ",".join(f"{k}={v}" for k, v in delta.items()) or "default"


@dataclass
class AblationTable:
    trials: int
    # (variant, seed, trial) -> success rate
    rows: list[tuple[str, int, int, float]] = field(default_factory=list)

    def curves(self) -> dict[str, list[float]]:
        """Seed-averaged per-trial curve for each variant."""
        acc: dict[str, dict[int, list[float]]] = {}
        for v, _, t, s in self.rows:
            acc.setdefault(v, {}).setdefault(t, []).append(s)
        return {v: [float(np.mean(by_t[t])) for t in sorted(by_t)] for v, by_t in acc.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variant", "seed", "trial", "success_rate"])
        for v, s, t, x in self.rows:
            w.writerow([v, s, t, f"{x:.6f}"])
        return buf.getvalue()


def ablation_suite(variants: list[TrainConfig], tasks, seeds, ref: PolicyParams,
                   base: TrainConfig | None = None) -> AblationTable:
    """Run DAgger-DPO for each variant and seed; record padded per-trial curves.

    ``tasks`` is either one suite shared by every seed or a callable mapping a
    seed to its suite.
    """
    base = base or TrainConfig()
    names = []
    for v in variants:
        delta = config_delta(base, v)
        if len(delta) > 1:
            raise ValueError(f"variant changes more than one field: {sorted(delta)}")
        names.append(variant_name(base, v))
    trials = base.max_trials
    table = AblationTable(trials)
    for name, v in zip(names, variants):
        for seed in seeds:
            suite = tasks(seed) if callable(tasks) else tasks
            _, tl = dagger_dpo_suite(suite, replace(v, seed=seed), ref)
            for t, x in enumerate(tl.padded_curve(trials), start=1):
                table.rows.append((name, seed, t, x))
    return table


# ---------------------------------------------------------------- paraphrase


DEFAULT_LEXICON: dict[str, list[str]] = {
    "put": ["place", "set", "move"],
    "clean": ["wash", "rinse"],
    "heat": ["warm", "microwave"],
    "cool": ["chill", "refrigerate"],
    "look": ["examine", "inspect"],
}

IDENTITY_LEXICON: dict[str, list[str]] = {k: [k] for k in DEFAULT_LEXICON}

_VERBS = {
    TaskType.PICK_PLACE: ("put",),
    TaskType.CLEAN_PLACE: ("put", "clean"),
    TaskType.HEAT_PLACE: ("put", "heat"),
    TaskType.COOL_PLACE: ("put", "cool"),
    TaskType.LOOK_IN_LIGHT: ("look",),
    TaskType.PICK_TWO_PLACE: ("put",),
}


def _a(word: str) -> str:
    return ("an " if word[0] in "aeiou" else "a ") + word


def _rewrite(task: TaskSpec, words: dict[str, str], form: int) -> str:
    o, t = task.object_type, task.target_type
    tt = task.task_type
    if tt is TaskType.PICK_PLACE:
        return (f"{words['put']} {_a(o)} in the {t}", f"find {_a(o)} and {words['put']} it in the {t}")[form]
    if tt is TaskType.PICK_TWO_PLACE:
        return (f"{words['put']} two {o} in the {t}", f"find two {o} and {words['put']} them in the {t}")[form]
    if tt is TaskType.LOOK_IN_LIGHT:
        return (f"{words['look']} the {o} under the {t}", f"turn on the {t} and {words['look']} the {o}")[form]
    verb = words[_VERBS[tt][1]]
    return (f"{verb} {_a(o)} and {words['put']} it in the {t}",
            f"{words['put']} {_a(o)} in the {t} after you {verb} it")[form]


def paraphrase_instructions(tasks: list[TaskInstance], lexicon: dict[str, list[str]] = DEFAULT_LEXICON,
                            seed: int = 0) -> list[TaskInstance]:
    """Synonym substitution plus clause reordering; only the instruction changes."""
    out = []
    for i, inst in enumerate(tasks):
        verbs = _VERBS[inst.task.task_type]
        missing = [v for v in verbs if not lexicon.get(v)]
        if missing:
            log.info("no synonyms for %s; %s left unchanged", missing, inst.task_id)
            out.append(inst)
            continue
        rng = np.random.default_rng([seed, i, 0x9A2A])
        words = {v: str(lexicon[v][rng.integers(len(lexicon[v]))]) for v in verbs}
        form = int(rng.integers(2))
        if all(words[v] == v for v in verbs):
            out.append(inst)
            continue
        out.append(inst.with_instruction(_rewrite(inst.task, words, form)))
    return out
