"""Behavior cloning, DPO / cross-entropy objectives and the DAgger-DPO loop."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import sparse
from scipy.special import expit

from .expert import (
    MemoryPool,
    TextTrajectory,
    actor_action,
    critic_feedback,
    memory_update,
    run_expert,
)
from .observe import FEATURE_DIM, VisualObservation, perturb_visual, render_text, render_visual
from .policy import POLICY_DIM, PolicyParams, action_log_probs, choose, log_prob_and_grad, snapshot
from .tasks import TaskInstance, TaskSpec
from .world import EPISODE_CAP, ActionInstance, WorldState, goal_reached, step, valid_actions

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    beta: float = 0.1
    max_trials: int = 12
    epochs_per_trial: int = 5
    batch_size: int = 16
    learning_rate: float = 0.3
    bc_learning_rate: float = 0.5
    bc_epochs: int = 10
    episode_cap: int = EPISODE_CAP
    loss_mode: str = "dpo"
    retrospection: bool = True
    bc_init: bool = True
    blind_expert: bool = False
    memory_capacity: int = 3
    rollout_mode: str = "sample"
    obs_salt: int = 0
    obs_dim: int = FEATURE_DIM
    policy_dim: int = POLICY_DIM
    seed: int = 0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.learning_rate <= 0 or self.bc_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        for name in ("max_trials", "epochs_per_trial", "batch_size", "episode_cap", "obs_dim", "policy_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.bc_epochs < 0 or self.memory_capacity < 0:
            raise ValueError("bc_epochs and memory_capacity must be non-negative")
        if self.loss_mode not in ("dpo", "ce"):
            raise ValueError(f"loss_mode must be 'dpo' or 'ce', got {self.loss_mode!r}")
        if self.rollout_mode not in ("sample", "greedy"):
            raise ValueError(f"rollout_mode must be 'sample' or 'greedy', got {self.rollout_mode!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# -------------------------------------------------------------------- records


@dataclass(eq=False)
class Demonstration:
    instruction: str
    obs: VisualObservation
    expert_action: ActionInstance
    candidates: tuple[ActionInstance, ...]


@dataclass(eq=False)
class PreferenceRecord:
    instruction: str
    obs: VisualObservation
    student_action: ActionInstance
    expert_action: ActionInstance
    candidates: tuple[ActionInstance, ...]

    def __post_init__(self):
        if self.student_action not in self.candidates or self.expert_action not in self.candidates:
            raise ValueError("both actions must be among the candidates")


class _Pack:
    """Feature rows of a growing dataset, stacked for fast minibatch access."""

    def __init__(self, dim: int, salt: int):
        self.dim, self.salt = dim, salt
        self._blocks: list[sparse.csr_matrix] = []
        self._X: sparse.csr_matrix | None = None
        self.sizes: list[int] = []
        self.targets: list[int] = []
        self.students: list[int] = []
        self.ref_t: list[float] = []
        self.ref_s: list[float] = []

    def __len__(self) -> int:
        return len(self.sizes)

    def add(self, feats: sparse.csr_matrix, target: int, student: int = -1,
            ref: PolicyParams | None = None) -> None:
        self._blocks.append(feats)
        self._X = None
        self.sizes.append(feats.shape[0])
        self.targets.append(target)
        self.students.append(target if student < 0 else student)
        if ref is not None:
            lp = action_log_probs(ref, feats)
            self.ref_t.append(float(lp[target]))
            self.ref_s.append(float(lp[self.students[-1]]))

    @property
    def X(self) -> sparse.csr_matrix:
        if self._X is None:
            self._X = sparse.vstack(self._blocks, format="csr")
            self._blocks = [self._X]
            self._offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        return self._X

    def batch(self, ids: np.ndarray):
        X = self.X
        sizes = np.asarray(self.sizes)[ids]
        rows = np.concatenate([np.arange(self._offsets[i], self._offsets[i + 1]) for i in ids])
        return X[rows], sizes


def _segment_log_softmax(scores: np.ndarray, sizes: np.ndarray):
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    m = np.maximum.reduceat(scores, starts)
    shifted = scores - np.repeat(m, sizes)
    lse = np.log(np.add.reduceat(np.exp(shifted), starts))
    return shifted - np.repeat(lse, sizes), starts


def _loss_grad(pack: _Pack, ids: np.ndarray, w: np.ndarray, mode: str, beta: float):
    """Per-record losses and the gradient of their mean."""
    Xb, sizes = pack.batch(ids)
    logp, starts = _segment_log_softmax(Xb @ w, sizes)
    n = len(ids)
    ti = starts + np.asarray(pack.targets)[ids]
    if mode == "ce":
        loss = -logp[ti]
        coeff = np.exp(logp)
        coeff[ti] -= 1.0
        coeff /= n
    else:
        si = starts + np.asarray(pack.students)[ids]
        ref_t = np.asarray(pack.ref_t)[ids]
        ref_s = np.asarray(pack.ref_s)[ids]
        z = beta * ((logp[ti] - ref_t) - (logp[si] - ref_s))
        loss = np.logaddexp(0.0, -z)
        g = -beta * expit(-z) / n
        coeff = np.zeros_like(logp)
        np.add.at(coeff, ti, g)
        np.add.at(coeff, si, -g)
    return loss, Xb.T @ coeff


def _descend(pack: _Pack, params: PolicyParams, mode: str, beta: float, lr: float, batch_size: int,
             epochs: int, rng: np.random.Generator) -> list[float]:
    """Plain minibatch gradient descent in place; returns mean loss per epoch."""
    n = len(pack)
    out = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for b in range(0, n, batch_size):
            ids = perm[b:b + batch_size]
            loss, grad = _loss_grad(pack, ids, params.weights, mode, beta)
            params.weights -= lr * grad
            total += float(loss.sum())
        out.append(total / n)
    return out


def _mean_loss(pack: _Pack, params: PolicyParams, mode: str, beta: float) -> float:
    if not len(pack):
        return float("nan")
    loss, _ = _loss_grad(pack, np.arange(len(pack)), params.weights, mode, beta)
    return float(loss.mean())


# ---------------------------------------------------------- single-record API


def dpo_loss(record: PreferenceRecord, theta: PolicyParams, ref: PolicyParams,
             beta: float) -> tuple[float, np.ndarray]:
    """``-log sigmoid(beta * (chosen log-ratio - rejected log-ratio))`` and its gradient."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    args = (record.obs, record.instruction, record.candidates)
    lt, gt = log_prob_and_grad(theta, *args, record.expert_action)
    ls, gs = log_prob_and_grad(theta, *args, record.student_action)
    rt, _ = log_prob_and_grad(ref, *args, record.expert_action)
    rs, _ = log_prob_and_grad(ref, *args, record.student_action)
    z = beta * ((lt - rt) - (ls - rs))
    loss = float(np.logaddexp(0.0, -z))
    return loss, -beta * float(expit(-z)) * (gt - gs)


def ce_loss(record, theta: PolicyParams) -> tuple[float, np.ndarray]:
    """``-log pi(expert action)`` and its gradient."""
    lp, g = log_prob_and_grad(theta, record.obs, record.instruction, record.candidates, record.expert_action)
    return -lp, -g


# ---------------------------------------------------------------- rollouts


@dataclass
class Rollout:
    states: list[WorldState]
    actions: list[ActionInstance]
    observations: list[VisualObservation]
    candidates: list[list[ActionInstance]]
    features: list[sparse.csr_matrix]
    success: bool

    @property
    def steps(self) -> int:
        return len(self.actions)


def rollout(params: PolicyParams, world: WorldState, task: TaskSpec, rng: np.random.Generator | None,
            mode: str = "sample", cap: int = EPISODE_CAP, obs_salt: int = 0, obs_dim: int = FEATURE_DIM,
            visual_noise: float = 0.0, noise_rng: np.random.Generator | None = None,
            instruction: str | None = None) -> Rollout:
    """Run the student in the visual world until success or the cap."""
    text = task.instruction if instruction is None else instruction
    state = world.copy()
    out = Rollout([state], [], [], [], [], False)
    while state.step < cap and not goal_reached(state, task):
        obs = render_visual(state, state.last_action, obs_salt, obs_dim)
        if visual_noise > 0:
            obs = perturb_visual(obs, visual_noise, noise_rng)
        cands = valid_actions(state)
        feats = params.features(obs, text, cands)
        act = cands[choose(action_log_probs(params, feats), rng, mode)]
        out.observations.append(obs)
        out.candidates.append(cands)
        out.features.append(feats)
        out.actions.append(act)
        state, _ = step(state, act, task, cap)
        out.states.append(state)
    out.success = goal_reached(state, task)
    return out


def greedy_probe(params: PolicyParams, inst: TaskInstance, config: TrainConfig) -> tuple[bool, int]:
    r = rollout(params, inst.world, inst.task, None, "greedy", config.episode_cap,
                config.obs_salt, config.obs_dim)
    return r.success, (r.steps if r.success else config.episode_cap)


# ----------------------------------------------------------------- BC


def collect_demos(tasks: list[TaskInstance], n: int, config: TrainConfig | None = None) -> list[list[Demonstration]]:
    """Privileged-planner episodes on the first ``n`` solvable tasks, one list per episode."""
    config = config or TrainConfig()
    episodes: list[list[Demonstration]] = []
    for inst in tasks:
        if len(episodes) >= n:
            break
        ep = run_expert(inst.world, inst.task, cap=config.episode_cap)
        if not ep.success:
            log.warning("planner failed on %s; skipped", inst.task_id)
            continue
        demo = []
        for s, a in zip(ep.states, ep.actions):
            obs = render_visual(s, s.last_action, config.obs_salt, config.obs_dim)
            demo.append(Demonstration(inst.task.instruction, obs, a, tuple(valid_actions(s))))
        episodes.append(demo)
    if len(episodes) < n:
        log.warning("collected %d of %d requested episodes", len(episodes), n)
    return episodes


def _flatten(demos):
    if demos and isinstance(demos[0], list):
        return [d for ep in demos for d in ep]
    return list(demos)


def train_bc(demos, config: TrainConfig | None = None, init: PolicyParams | None = None,
             losses: list | None = None) -> PolicyParams:
    """Minibatch gradient descent on the mean negative log-likelihood of expert actions.

    ``demos`` is a flat list of records or a list of episodes. Per-epoch mean
    losses are appended to ``losses`` when given.
    """
    config = config or TrainConfig()
    records = _flatten(demos)
    if not records:
        raise ValueError("no demonstrations")
    params = snapshot(init) if init is not None else PolicyParams.zeros(config.policy_dim)
    pack = _Pack(params.dim, params.feature_salt)
    for r in records:
        pack.add(params.features(r.obs, r.instruction, r.candidates), r.candidates.index(r.expert_action))
    rng = np.random.default_rng([config.seed, 0xBC])
    hist = _descend(pack, params, "ce", config.beta, config.bc_learning_rate, config.batch_size,
                    config.bc_epochs, rng)
    if losses is not None:
        losses.extend(hist)
    return params


# ---------------------------------------------------------------- DAgger-DPO


@dataclass
class TrialRow:
    trial: int
    task_id: str
    success: bool
    steps: int
    dataset_size: int
    mean_loss: float | None
    wallclock_ms: int


@dataclass
class TrialLog:
    rows: list[TrialRow] = field(default_factory=list)
    # greedy success rate over the suite after each round
    curve: list[float] = field(default_factory=list)
    initial_success: dict[str, bool] = field(default_factory=dict)
    feedback: list[dict] = field(default_factory=list)

    def to_jsonl(self, timing: bool = True) -> str:
        lines = []
        for r in self.rows:
            d = asdict(r)
            if not timing:
                d.pop("wallclock_ms")
            lines.append(json.dumps(d, sort_keys=True))
        return "".join(line + "\n" for line in lines)

    def padded_curve(self, trials: int) -> list[float]:
        """Per-trial success with the last value carried forward after an early stop."""
        c = list(self.curve)
        last = c[-1] if c else (float(np.mean(list(self.initial_success.values()))) if self.initial_success else 0.0)
        return (c + [last] * trials)[:trials]


def dagger_dpo_suite(tasks: list[TaskInstance], config: TrainConfig, ref: PolicyParams,
                     clock=time.perf_counter) -> tuple[PolicyParams, TrialLog]:
    """Round-robin DAgger-DPO over a task suite with one shared policy and dataset.

    Each round gives every still-unsolved task one trial: student rollout,
    text re-rendering, retrospection, expert relabeling, aggregation and
    ``epochs_per_trial`` passes of minibatch descent. Solved means the greedy
    student reaches the goal. Memory pools are per task.
    """
    if not tasks:
        raise ValueError("empty task suite")
    ref = snapshot(ref)
    if not config.bc_init:
        ref = PolicyParams.zeros(ref.dim, ref.feature_salt)
    theta = snapshot(ref)
    pack = _Pack(theta.dim, theta.feature_salt)
    memories = {t.task_id: MemoryPool(config.memory_capacity) for t in tasks}
    rng = np.random.default_rng([config.seed, 0xDA66])
    out = TrialLog()
    solved = {t.task_id: greedy_probe(theta, t, config)[0] for t in tasks}
    out.initial_success = dict(solved)

    for trial in range(config.max_trials):
        if all(solved.values()):
            break
        for inst in tasks:
            tid = inst.task_id
            if solved[tid]:
                continue
            t0 = clock()
            roll = rollout(theta, inst.world, inst.task, rng, config.rollout_mode, config.episode_cap,
                           config.obs_salt, config.obs_dim)
            text = [render_text(s, s.last_action) for s in roll.states]
            memory = None
            if config.retrospection:
                fb = critic_feedback(TextTrajectory(text, list(roll.actions), roll.success), inst.task, trial)
                memories[tid] = memory_update(memories[tid], fb)
                memory = memories[tid]
                out.feedback.extend({**r.to_dict(), "task_id": tid} for r in fb)
            history = []
            for t, act in enumerate(roll.actions):
                meta = None if config.blind_expert else roll.states[t]
                expert = actor_action(memory, inst.task, history, text[t], meta)
                history.append((text[t], act))
                cands = roll.candidates[t]
                if expert not in cands:
                    log.warning("expert action %s illegal at step %d of %s; dropped", expert, t, tid)
                    continue
                pack.add(roll.features[t], cands.index(expert), cands.index(act), ref)
            mean_loss = None
            if len(pack):
                _descend(pack, theta, config.loss_mode, config.beta, config.learning_rate,
                         config.batch_size, config.epochs_per_trial, rng)
                mean_loss = _mean_loss(pack, theta, config.loss_mode, config.beta)
            ok, steps = greedy_probe(theta, inst, config)
            solved[tid] = ok
            out.rows.append(TrialRow(trial, tid, ok, steps, len(pack), mean_loss,
                                     int(round((clock() - t0) * 1000))))
        solved = {t.task_id: greedy_probe(theta, t, config)[0] for t in tasks}
        out.curve.append(sum(solved.values()) / len(tasks))
    return theta, out


def dagger_dpo(task: TaskSpec, world: WorldState, config: TrainConfig, ref: PolicyParams,
               clock=time.perf_counter) -> tuple[PolicyParams, TrialLog]:
    """DAgger-DPO on a single task instruction."""
    return dagger_dpo_suite([TaskInstance(world, task)], config, ref, clock)
