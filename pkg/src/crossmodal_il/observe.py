"""Parallel renderings of a world state: prose for the expert, hashed features for the student.

Both renderings are built from the same set of observable facts. A fact is
a tuple ``(relation, kind, index, flags)`` where ``index`` is ``None`` for
the kind-level copy that every instance-level fact also emits. Facts inside
closed receptacles, or at receptacles the agent is not standing at, are not
observable.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .catalog import VOCABULARY
from .world import ActionInstance, EntityId, Verb, WorldState

FEATURE_DIM = 256

AT = "at-agent-location"
HELD = "in-inventory"
VISIBLE = "visible-in-open-receptacle"
OPEN = "receptacle-open"
LAMP_ON = "lamp-on"

Fact = tuple[str, str, "int | None", str]


def stable_hash(*parts) -> int:
    """64-bit hash that does not depend on PYTHONHASHSEED."""
    blob = "\x1f".join(map(str, parts)).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def _both(rel: str, eid: EntityId, flags: str = "") -> list[Fact]:
    return [(rel, eid.kind, None, flags), (rel, eid.kind, eid.index, flags)]


def observable_facts(state: WorldState) -> frozenset:
    facts: list[Fact] = []
    here = state.agent_location
    if here is None:
        facts.append((AT, "start", None, ""))
    else:
        r = state.receptacles[here]
        facts += _both(AT, here)
        if r.openable and r.open:
            facts += _both(OPEN, here)
        if r.toggleable and r.on:
            facts += _both(LAMP_ON, here)
        if r.accessible:
            for o in r.contents:
                facts += _both(VISIBLE, o)
    if state.inventory is not None:
        o = state.objects[state.inventory]
        facts += _both(HELD, o.id, " ".join(o.flags()))
    return frozenset(facts)


def fact_bucket(fact: Fact, salt: int = 0, dim: int = FEATURE_DIM) -> int:
    return stable_hash("fact", salt, *fact) % dim


def features_from_facts(facts, salt: int = 0, dim: int = FEATURE_DIM) -> np.ndarray:
    v = np.zeros(dim)
    for f in facts:
        v[fact_bucket(f, salt, dim)] = 1.0
    return v


@dataclass(frozen=True, eq=False)
class VisualObservation:
    features: np.ndarray

    def __len__(self) -> int:
        return len(self.features)


def render_visual(state: WorldState, last_action: ActionInstance | None = None,
                  salt: int = 0, dim: int = FEATURE_DIM) -> VisualObservation:
    # pixels do not show what the last command was; last_action is accepted
    # for signature parity with render_text
    return VisualObservation(features_from_facts(observable_facts(state), salt, dim))


# ----------------------------------------------------------------------- text


def _listing(items) -> str:
    names = [f"a {x}" for x in items]
    if not names:
        return "nothing"
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + ", and " + names[-1]


def room_line(state: WorldState) -> str:
    recs = sorted(state.receptacles, key=lambda r: (r.kind, -r.index))
    return "You are in the middle of a room. Looking quickly around you, you see " + _listing(recs) + "."


def _view(state: WorldState, rid: EntityId) -> str:
    r = state.receptacles[rid]
    if r.toggleable:
        return f"The {rid} is {'on' if r.on else 'off'}."
    if r.openable and not r.open:
        return f"The {rid} is closed."
    contents = _listing(sorted(r.contents))
    if r.openable:
        return f"The {rid} is open. In it, you see {contents}."
    return f"On the {rid}, you see {contents}."


def _feedback(state: WorldState, action: ActionInstance | None) -> str:
    if action is None:
        return ""
    if state.last_valid is False:
        return "Nothing happens."
    v, a = action.verb, action.args
    if v is Verb.GOTO:
        r = state.receptacles[a[0]]
        if r.openable and not r.open:
            return f"The {a[0]} is closed."
        if r.toggleable:
            return _view(state, a[0])
        return f"On the {a[0]}, you see {_listing(sorted(r.contents))}."
    if v is Verb.OPEN:
        return f"You open the {a[0]}. " + _view(state, a[0])
    if v is Verb.CLOSE:
        return f"You close the {a[0]}."
    if v is Verb.TOGGLE_ON:
        return f"You turn on the {a[0]}."
    if v is Verb.TAKE:
        return f"You pick up the {a[0]} from the {a[1]}."
    if v is Verb.PUT:
        return f"You put the {a[0]} in/on the {a[1]}."
    return f"You {v.name.lower()} the {a[0]} using the {a[1]}."


def _location_line(state: WorldState) -> str:
    here = state.agent_location
    if here is None:
        return "You are in the middle of the room."
    return f"You are at the {here}. " + _view(state, here)


def _inventory_line(state: WorldState) -> str:
    if state.inventory is None:
        return "You are not carrying anything."
    o = state.objects[state.inventory]
    adj = "".join(f"{f} " for f in o.flags())
    return f"You are carrying a {adj}{o.id}."


_ENTITY = re.compile(r"\ba ((?:(?:dirty|hot|cold) )*)([a-z]+) (\d+)\b")
_AT_RE = re.compile(r"^You are at the ([a-z]+) (\d+)\.")
_STATUS_RE = re.compile(r"\bThe ([a-z]+) (\d+) is (open|closed|on|off)\b")
_SEE_RE = re.compile(r"you see (.*?)\.?$")


@dataclass(frozen=True)
class TextObservation:
    """Lines shown to the text agent plus fields parsed back out of them.

    The structured fields are always derived from the lines, so perturbing
    the lines perturbs what a reader of the structured fields sees.
    """

    room_line: str
    feedback_line: str
    location_line: str
    inventory_line: str
    receptacles: tuple[EntityId, ...]
    agent_location: EntityId | None
    location_status: str | None  # open / closed / on / off
    observed_objects: tuple[tuple[EntityId, EntityId], ...]
    inventory: tuple[EntityId, ...]
    inventory_flags: tuple[str, ...]

    @classmethod
    def from_lines(cls, room: str, feedback: str, location: str, inventory: str) -> "TextObservation":
        recs = tuple(EntityId(k, int(i)) for _, k, i in _ENTITY.findall(room))
        here = None
        status = None
        seen: list[tuple[EntityId, EntityId]] = []
        m = _AT_RE.match(location)
        if m:
            here = EntityId(m.group(1), int(m.group(2)))
            s = _STATUS_RE.search(location)
            if s and (s.group(1), int(s.group(2))) == (here.kind, here.index):
                status = s.group(3)
            see = _SEE_RE.search(location)
            if see and status != "closed":
                seen = [(EntityId(k, int(i)), here) for _, k, i in _ENTITY.findall(see.group(1))]
        inv = []
        flags = []
        if inventory.startswith("You are carrying"):
            for adj, k, i in _ENTITY.findall(inventory)[:1]:
                inv.append(EntityId(k, int(i)))
                flags.append(adj.strip())
        return cls(room, feedback, location, inventory, recs, here, status,
                   tuple(seen), tuple(inv), tuple(flags))

    @property
    def lines(self) -> tuple[str, str, str, str]:
        return (self.room_line, self.feedback_line, self.location_line, self.inventory_line)

    @property
    def text(self) -> str:
        return "\n".join(self.lines)


def render_text(state: WorldState, last_action: ActionInstance | None = None) -> TextObservation:
    return TextObservation.from_lines(
        room_line(state), _feedback(state, last_action), _location_line(state), _inventory_line(state)
    )


def facts_from_text(obs: TextObservation) -> frozenset:
    """Rebuild the observable fact set from a text observation."""
    facts: list[Fact] = []
    here = obs.agent_location
    if here is None:
        facts.append((AT, "start", None, ""))
    else:
        facts += _both(AT, here)
        if obs.location_status == "open":
            facts += _both(OPEN, here)
        if obs.location_status == "on":
            facts += _both(LAMP_ON, here)
        for o, _ in obs.observed_objects:
            facts += _both(VISIBLE, o)
    for o, f in zip(obs.inventory, obs.inventory_flags):
        facts += _both(HELD, o, f)
    return frozenset(facts)


# ---------------------------------------------------------------------- noise


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"noise rate must be in [0, 1], got {rate}")


def perturb_visual(obs: VisualObservation, noise_rate: float, rng: np.random.Generator) -> VisualObservation:
    """Zero a random contiguous window and rescale the rest (crop-and-resize analog)."""
    _check_rate(noise_rate)
    x = obs.features.copy()
    if noise_rate == 0.0:
        return VisualObservation(x)
    if noise_rate == 1.0:
        return VisualObservation(np.zeros_like(x))
    d = len(x)
    n = math.floor(noise_rate * d)
    start = int(rng.integers(0, d - n + 1))
    x[start:start + n] = 0.0
    x = np.clip(x / (1.0 - noise_rate), 0.0, 1.0)
    return VisualObservation(x)


def perturb_text(obs: TextObservation, noise_rate: float, rng: np.random.Generator,
                 vocab=VOCABULARY) -> TextObservation:
    """Replace each whitespace token independently with a random vocabulary token."""
    _check_rate(noise_rate)
    if noise_rate > 0 and not len(vocab):
        raise ValueError("empty vocabulary with positive noise rate")
    if noise_rate == 0.0:
        return obs
    vocab = list(vocab)
    lines = []
    for line in obs.lines:
        toks = line.split()
        hit = rng.random(len(toks)) < noise_rate
        picks = rng.integers(0, len(vocab), size=len(toks))
        lines.append(" ".join(vocab[p] if h else t for t, h, p in zip(toks, hit, picks)))
    return TextObservation.from_lines(*lines)
