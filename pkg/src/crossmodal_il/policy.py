"""Linear-softmax student over hashed (instruction, observation, action) conjunctions.

For a candidate action ``a`` the score is ``w . psi(a)``; the policy is the
softmax of the scores over the candidate set. ``psi`` hashes four families of
conjunctions into ``dim`` buckets, each value saturating at 1.0:

* action descriptor alone
* instruction token x descriptor
* observation bucket x descriptor (scaled by the bucket value)
* instruction token x observation bucket x descriptor

An action has three descriptors: its verb, verb plus argument kinds, and
verb plus argument ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import sparse

from .observe import VisualObservation, stable_hash
from .world import ActionInstance

POLICY_DIM = 65536

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)


def _mix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer over a ^ (b * golden); uint64 arithmetic wraps
    z = a ^ (b * _GOLD)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@lru_cache(maxsize=4096)
def _token_hash(token: str) -> int:
    return stable_hash("tok", token)


@lru_cache(maxsize=65536)
def _descriptor_hashes(action: ActionInstance) -> tuple[int, int, int]:
    v = action.verb.name
    return (
        stable_hash("verb", v),
        stable_hash("kinds", v, *(a.kind for a in action.args)),
        stable_hash("ids", v, *map(str, action.args)),
    )


def tokenize(instruction: str) -> list[str]:
    return sorted(set(instruction.lower().split()))


def _state_prefixes(obs: VisualObservation, instruction: str, salt: int) -> tuple[np.ndarray, np.ndarray]:
    """Hash prefixes for every state-side conjunction and their values."""
    with np.errstate(over="ignore"):
        base = _mix(np.array([salt], dtype=np.uint64), np.array([0x51], dtype=np.uint64))
        toks = np.array([_token_hash(t) for t in tokenize(instruction)], dtype=np.uint64)
        nz = np.flatnonzero(obs.features)
        vals = obs.features[nz].astype(float)
        buckets = nz.astype(np.uint64) + np.uint64(1)

        tok_p = _mix(np.repeat(base, len(toks)), toks)
        bkt_p = _mix(np.repeat(base ^ np.uint64(0xB0), len(buckets)), buckets)
        tb_p = _mix(np.repeat(tok_p, len(buckets)), np.tile(buckets, len(toks)))

    prefixes = np.concatenate([base, tok_p, bkt_p, tb_p])
    values = np.concatenate([[1.0], np.ones(len(toks)), vals, np.tile(vals, len(toks))])
    return prefixes, values


def feature_matrix(obs: VisualObservation, instruction: str, candidates, dim: int = POLICY_DIM,
                   salt: int = 0) -> sparse.csr_matrix:
    """Rows are the joint feature vectors of the candidates, in order."""
    k = len(candidates)
    prefixes, values = _state_prefixes(obs, instruction, salt)
    desc = np.array([_descriptor_hashes(a) for a in candidates], dtype=np.uint64).reshape(k, 3)
    with np.errstate(over="ignore"):
        idx = _mix(prefixes[None, :, None], desc[:, None, :])  # (k, P, 3)
    cols = (idx % np.uint64(dim)).astype(np.int64).reshape(k, -1)
    data = np.broadcast_to(values[None, :, None], idx.shape).reshape(k, -1)
    rows = np.repeat(np.arange(k), cols.shape[1])
    m = sparse.csr_matrix((data.ravel(), (rows, cols.ravel())), shape=(k, dim))
    m.sum_duplicates()
    np.minimum(m.data, 1.0, out=m.data)
    return m


def joint_features(obs: VisualObservation, instruction: str, action: ActionInstance,
                   dim: int = POLICY_DIM, salt: int = 0) -> np.ndarray:
    return feature_matrix(obs, instruction, [action], dim, salt).toarray()[0]


@dataclass
class PolicyParams:
    weights: np.ndarray
    feature_salt: int = 0

    @classmethod
    def zeros(cls, dim: int = POLICY_DIM, feature_salt: int = 0) -> "PolicyParams":
        return cls(np.zeros(dim), feature_salt)

    @property
    def dim(self) -> int:
        return len(self.weights)

    def features(self, obs: VisualObservation, instruction: str, candidates) -> sparse.csr_matrix:
        return feature_matrix(obs, instruction, candidates, self.dim, self.feature_salt)

    def to_dict(self) -> dict:
        return {"featureSalt": self.feature_salt, "F": self.dim, "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyParams":
        w = np.asarray(d["weights"], dtype=float)
        if len(w) != d["F"]:
            raise ValueError("weight length does not match F")
        return cls(w, int(d["featureSalt"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "PolicyParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def snapshot(params: PolicyParams) -> PolicyParams:
    return PolicyParams(params.weights.copy(), params.feature_salt)


@dataclass(frozen=True)
class ScoredAction:
    action: ActionInstance
    log_prob: float


def log_softmax(scores: np.ndarray) -> np.ndarray:
    m = scores.max()
    shifted = scores - m
    return shifted - np.log(np.exp(shifted).sum())


def _check(candidates) -> None:
    if len(candidates) == 0:
        raise ValueError("candidate set is empty")


def action_log_probs(params: PolicyParams, feats: sparse.csr_matrix) -> np.ndarray:
    return log_softmax(feats @ params.weights)


def action_distribution(params: PolicyParams, obs: VisualObservation, instruction: str,
                        candidates) -> list[ScoredAction]:
    _check(candidates)
    lp = action_log_probs(params, params.features(obs, instruction, candidates))
    return [ScoredAction(a, float(x)) for a, x in zip(candidates, lp)]


def choose(log_probs: np.ndarray, rng: np.random.Generator | None, mode: str) -> int:
    """Index of the chosen candidate. Greedy ties go to the earliest candidate."""
    if mode == "greedy":
        return int(np.argmax(log_probs))
    if mode != "sample":
        raise ValueError(f"unknown mode {mode!r}")
    p = np.exp(log_probs)
    return int(rng.choice(len(p), p=p / p.sum()))


def sample_action(params: PolicyParams, obs: VisualObservation, instruction: str, candidates,
                  rng: np.random.Generator | None = None, mode: str = "sample") -> ActionInstance:
    _check(candidates)
    lp = action_log_probs(params, params.features(obs, instruction, candidates))
    return candidates[choose(lp, rng, mode)]


def log_prob_and_grad(params: PolicyParams, obs: VisualObservation, instruction: str, candidates,
                      target: ActionInstance) -> tuple[float, np.ndarray]:
    """``log pi(target)`` and its gradient ``psi_target - sum_i p_i psi_i``."""
    _check(candidates)
    try:
        t = list(candidates).index(target)
    except ValueError:
        raise ValueError(f"target {target} is not among the candidates") from None
    feats = params.features(obs, instruction, candidates)
    lp = action_log_probs(params, feats)
    coeff = -np.exp(lp)
    coeff[t] += 1.0
    return float(lp[t]), feats.T @ coeff
