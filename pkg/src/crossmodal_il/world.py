"""Symbolic household world: entities, transition function and goal predicates.

A :class:`WorldState` is treated as a value. :func:`step` never mutates its
input; it returns a fresh copy. Invalid actions are no-ops that only advance
the step counter.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .catalog import (
    COOL_KINDS,
    HEAT_KINDS,
    LAMPS,
    OPENABLE,
    SINK_KINDS,
    ObjectAttr,
    get_profile,
    object_attrs,
)

EPISODE_CAP = 30
INVENTORY = "inventory"


class EpisodeOver(RuntimeError):
    """Raised when stepping a state that already reached the episode cap."""


@dataclass(frozen=True, order=True)
class EntityId:
    kind: str
    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"entity index must be >= 1, got {self.index}")

    def __str__(self) -> str:
        return f"{self.kind} {self.index}"

    @classmethod
    def parse(cls, text: str) -> "EntityId":
        kind, _, idx = text.strip().rpartition(" ")
        if not kind or not idx.isdigit():
            raise ValueError(f"not an entity id: {text!r}")
        return cls(kind, int(idx))


class Verb(enum.IntEnum):
    # values give the canonical ordering rank
    GOTO = 0
    OPEN = 1
    CLOSE = 2
    TAKE = 3
    PUT = 4
    CLEAN = 5
    HEAT = 6
    COOL = 7
    TOGGLE_ON = 8


PROCESS_VERBS = frozenset({Verb.CLEAN, Verb.HEAT, Verb.COOL})

_ARITY = {
    Verb.GOTO: 1, Verb.OPEN: 1, Verb.CLOSE: 1, Verb.TOGGLE_ON: 1,
    Verb.TAKE: 2, Verb.PUT: 2, Verb.CLEAN: 2, Verb.HEAT: 2, Verb.COOL: 2,
}

_ENT = r"([a-z]+ \d+)"
_SURFACE_PATTERNS = [
    (Verb.GOTO, re.compile(rf"^go to {_ENT}$")),
    (Verb.OPEN, re.compile(rf"^open {_ENT}$")),
    (Verb.CLOSE, re.compile(rf"^close {_ENT}$")),
    (Verb.TAKE, re.compile(rf"^take {_ENT} from {_ENT}$")),
    (Verb.PUT, re.compile(rf"^put {_ENT} in/on {_ENT}$")),
    (Verb.CLEAN, re.compile(rf"^clean {_ENT} with {_ENT}$")),
    (Verb.HEAT, re.compile(rf"^heat {_ENT} with {_ENT}$")),
    (Verb.COOL, re.compile(rf"^cool {_ENT} with {_ENT}$")),
    (Verb.TOGGLE_ON, re.compile(rf"^use {_ENT}$")),
]


@dataclass(frozen=True, order=True)
class ActionInstance:
    verb: Verb
    args: tuple[EntityId, ...]

    def __post_init__(self):
        if len(self.args) != _ARITY[self.verb]:
            raise ValueError(f"{self.verb.name} takes {_ARITY[self.verb]} argument(s)")

    @property
    def surface(self) -> str:
        a = [str(x) for x in self.args]
        v = self.verb
        if v is Verb.GOTO:
            return f"go to {a[0]}"
        if v is Verb.OPEN:
            return f"open {a[0]}"
        if v is Verb.CLOSE:
            return f"close {a[0]}"
        if v is Verb.TAKE:
            return f"take {a[0]} from {a[1]}"
        if v is Verb.PUT:
            return f"put {a[0]} in/on {a[1]}"
        if v is Verb.TOGGLE_ON:
            return f"use {a[0]}"
        return f"{v.name.lower()} {a[0]} with {a[1]}"

    def __str__(self) -> str:
        return self.surface

    @classmethod
    def parse(cls, text: str) -> "ActionInstance":
        text = " ".join(text.strip().split())
        for verb, pat in _SURFACE_PATTERNS:
            m = pat.match(text)
            if m:
                return cls(verb, tuple(EntityId.parse(g) for g in m.groups()))
        raise ValueError(f"unparseable action: {text!r}")


def goto(r: EntityId) -> ActionInstance:
    return ActionInstance(Verb.GOTO, (r,))


@dataclass
class ObjectState:
    id: EntityId
    attrs: ObjectAttr
    dirty: bool = False
    hot: bool = False
    cold: bool = False
    location: EntityId | str = INVENTORY

    def flags(self) -> tuple[str, ...]:
        return tuple(n for n, on in (("dirty", self.dirty), ("hot", self.hot), ("cold", self.cold)) if on)


@dataclass
class ReceptacleState:
    id: EntityId
    openable: bool = False
    open: bool = False
    toggleable: bool = False
    on: bool = False
    contents: set[EntityId] = field(default_factory=set)

    @property
    def accessible(self) -> bool:
        """Contents are visible and reachable."""
        return not self.openable or self.open


@dataclass
class WorldState:
    receptacles: dict[EntityId, ReceptacleState]
    objects: dict[EntityId, ObjectState]
    agent_location: EntityId | None = None  # None: middle of the room
    inventory: EntityId | None = None
    step: int = 0
    seed: int = 0
    profile: str = ""
    last_action: ActionInstance | None = None
    last_valid: bool | None = None

    def copy(self) -> "WorldState":
        recs = {
            k: ReceptacleState(r.id, r.openable, r.open, r.toggleable, r.on, set(r.contents))
            for k, r in self.receptacles.items()
        }
        objs = {
            k: ObjectState(o.id, o.attrs, o.dirty, o.hot, o.cold, o.location)
            for k, o in self.objects.items()
        }
        return WorldState(
            recs, objs, self.agent_location, self.inventory, self.step,
            self.seed, self.profile, self.last_action, self.last_valid,
        )

    def objects_of(self, kind: str) -> list[ObjectState]:
        return [self.objects[k] for k in sorted(self.objects) if k.kind == kind]

    def receptacles_of(self, kind: str) -> list[ReceptacleState]:
        return [self.receptacles[k] for k in sorted(self.receptacles) if k.kind == kind]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "profile": self.profile,
            "receptacles": [
                {
                    "id": str(r.id), "openable": r.openable, "open": r.open,
                    "toggleable": r.toggleable, "on": r.on,
                    "contents": [str(c) for c in sorted(r.contents)],
                }
                for _, r in sorted(self.receptacles.items())
            ],
            "objects": [
                {
                    "id": str(o.id),
                    "attrs": {
                        "pickupable": o.attrs.pickupable, "dirtyable": o.attrs.dirtyable,
                        "heatable": o.attrs.heatable, "coolable": o.attrs.coolable,
                        "examinable": o.attrs.examinable,
                    },
                    "dirty": o.dirty, "hot": o.hot, "cold": o.cold,
                    "location": str(o.location),
                }
                for _, o in sorted(self.objects.items())
            ],
            "agent_location": None if self.agent_location is None else str(self.agent_location),
            "inventory": None if self.inventory is None else str(self.inventory),
            "step": self.step,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldState":
        recs = {}
        for r in d["receptacles"]:
            rid = EntityId.parse(r["id"])
            recs[rid] = ReceptacleState(
                rid, r["openable"], r["open"], r["toggleable"], r["on"],
                {EntityId.parse(c) for c in r["contents"]},
            )
        objs = {}
        for o in d["objects"]:
            oid = EntityId.parse(o["id"])
            loc = o["location"]
            objs[oid] = ObjectState(
                oid, ObjectAttr(**o["attrs"]), o["dirty"], o["hot"], o["cold"],
                INVENTORY if loc == INVENTORY else EntityId.parse(loc),
            )
        agent = d.get("agent_location")
        inv = d.get("inventory")
        return cls(
            recs, objs,
            None if agent is None else EntityId.parse(agent),
            None if inv is None else EntityId.parse(inv),
            d.get("step", 0), d.get("seed", 0), d.get("profile", ""),
        )

    def state_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(blob.encode(), digest_size=8).hexdigest()


# ---------------------------------------------------------------- generation


def generate_world(seed: int, profile: str) -> WorldState:
    """Sample a world from a room catalog.

    Every catalog type appears at least once. Objects are placed uniformly
    among the present receptacles their type may start in. Dirtyable
    objects start dirty so that cleaning tasks are never trivial.
    """
    prof = get_profile(profile)
    rng = np.random.default_rng([seed, 0x5EED])
    recs: dict[EntityId, ReceptacleState] = {}
    for kind in sorted(prof.receptacles):
        n = int(rng.integers(1, prof.receptacles[kind] + 1))
        for i in range(1, n + 1):
            rid = EntityId(kind, i)
            recs[rid] = ReceptacleState(rid, openable=kind in OPENABLE, toggleable=kind in LAMPS)
    present = {r.kind for r in recs}
    objs: dict[EntityId, ObjectState] = {}
    for kind in sorted(prof.objects):
        n = int(rng.integers(1, prof.objects[kind] + 1))
        spots = [rid for rid in sorted(recs) if rid.kind in prof.placement[kind] and rid.kind in present]
        for i in range(1, n + 1):
            oid = EntityId(kind, i)
            attrs = object_attrs(kind)
            where = spots[int(rng.integers(len(spots)))]
            objs[oid] = ObjectState(oid, attrs, dirty=attrs.dirtyable, location=where)
            recs[where].contents.add(oid)
    return WorldState(recs, objs, seed=seed, profile=profile)


# --------------------------------------------------------------- transitions


@dataclass(frozen=True)
class StepOutcome:
    valid: bool
    goal_reached: bool = False


def _at(state: WorldState, rid: EntityId) -> ReceptacleState | None:
    if state.agent_location != rid:
        return None
    return state.receptacles.get(rid)


def is_valid(state: WorldState, action: ActionInstance) -> bool:
    v, args = action.verb, action.args
    if any(a not in state.receptacles and a not in state.objects for a in args):
        return False
    if v is Verb.GOTO:
        return args[0] in state.receptacles
    if v in (Verb.OPEN, Verb.CLOSE, Verb.TOGGLE_ON):
        r = _at(state, args[0])
        if r is None:
            return False
        if v is Verb.OPEN:
            return r.openable and not r.open
        if v is Verb.CLOSE:
            return r.openable and r.open
        return r.toggleable and not r.on
    obj, rid = args
    o = state.objects.get(obj)
    r = _at(state, rid)
    if o is None or r is None:
        return False
    if v is Verb.TAKE:
        return (state.inventory is None and r.accessible and obj in r.contents
                and o.attrs.pickupable)
    if state.inventory != obj:
        return False
    if v is Verb.PUT:
        return r.accessible and not r.toggleable
    if v is Verb.CLEAN:
        return o.attrs.dirtyable and rid.kind in SINK_KINDS
    if v is Verb.HEAT:
        return o.attrs.heatable and rid.kind in HEAT_KINDS
    if v is Verb.COOL:
        return o.attrs.coolable and rid.kind in COOL_KINDS
    return False


def valid_actions(state: WorldState) -> list[ActionInstance]:
    """All legal actions in canonical order (verb rank, then arguments)."""
    out = [goto(r) for r in state.receptacles]
    here = state.agent_location
    r = state.receptacles.get(here) if here is not None else None
    if r is not None:
        if r.openable:
            out.append(ActionInstance(Verb.CLOSE if r.open else Verb.OPEN, (here,)))
        if r.toggleable and not r.on:
            out.append(ActionInstance(Verb.TOGGLE_ON, (here,)))
        held = state.inventory
        if held is None:
            if r.accessible:
                out.extend(ActionInstance(Verb.TAKE, (o, here)) for o in r.contents
                           if state.objects[o].attrs.pickupable)
        else:
            attrs = state.objects[held].attrs
            if r.accessible and not r.toggleable:
                out.append(ActionInstance(Verb.PUT, (held, here)))
            if attrs.dirtyable and here.kind in SINK_KINDS:
                out.append(ActionInstance(Verb.CLEAN, (held, here)))
            if attrs.heatable and here.kind in HEAT_KINDS:
                out.append(ActionInstance(Verb.HEAT, (held, here)))
            if attrs.coolable and here.kind in COOL_KINDS:
                out.append(ActionInstance(Verb.COOL, (held, here)))
    out.sort()
    return out


def step(state: WorldState, action: ActionInstance, task=None,
         cap: int = EPISODE_CAP) -> tuple[WorldState, StepOutcome]:
    if state.step >= cap:
        raise EpisodeOver(f"episode cap {cap} reached")
    nxt = state.copy()
    nxt.step += 1
    nxt.last_action = action
    valid = is_valid(state, action)
    nxt.last_valid = valid
    if valid:
        _apply(nxt, action)
    done = goal_reached(nxt, task) if task is not None else False
    return nxt, StepOutcome(valid, done)


def _apply(s: WorldState, action: ActionInstance) -> None:
    v, args = action.verb, action.args
    if v is Verb.GOTO:
        s.agent_location = args[0]
    elif v is Verb.OPEN:
        s.receptacles[args[0]].open = True
    elif v is Verb.CLOSE:
        s.receptacles[args[0]].open = False
    elif v is Verb.TOGGLE_ON:
        s.receptacles[args[0]].on = True
    else:
        obj, rid = args
        o = s.objects[obj]
        if v is Verb.TAKE:
            s.receptacles[rid].contents.discard(obj)
            o.location = INVENTORY
            s.inventory = obj
        elif v is Verb.PUT:
            s.receptacles[rid].contents.add(obj)
            o.location = rid
            s.inventory = None
        elif v is Verb.CLEAN:
            o.dirty = False
        elif v is Verb.HEAT:
            o.hot, o.cold = True, False
        elif v is Verb.COOL:
            o.cold, o.hot = True, False


# ---------------------------------------------------------------------- goals


def goal_reached(state: WorldState, task) -> bool:
    from .tasks import TaskType

    tt = task.task_type
    if tt is TaskType.LOOK_IN_LIGHT:
        if state.inventory is None or state.inventory.kind != task.object_type:
            return False
        here = state.agent_location
        return (here is not None and here.kind == task.target_type
                and state.receptacles[here].on)

    def satisfied(o: ObjectState) -> bool:
        if not isinstance(o.location, EntityId) or o.location.kind != task.target_type:
            return False
        if tt is TaskType.CLEAN_PLACE:
            return not o.dirty
        if tt is TaskType.HEAT_PLACE:
            return o.hot
        if tt is TaskType.COOL_PLACE:
            return o.cold
        return True

    n = sum(satisfied(o) for o in state.objects_of(task.object_type))
    return n >= (2 if tt is TaskType.PICK_TWO_PLACE else 1)


def trajectory_log(states: list[WorldState], task) -> list[dict]:
    """Line records ``{step, state_hash, action_surface, valid, goal_reached}``.

    ``states[0]`` is the initial state; each later state carries the action
    that produced it.
    """
    rows = []
    for s in states:
        rows.append({
            "step": s.step,
            "state_hash": s.state_hash(),
            "action_surface": None if s.last_action is None else s.last_action.surface,
            "valid": s.last_valid,
            "goal_reached": goal_reached(s, task),
        })
    return rows
