"""Scripted text-world expert: planning actor, retrospection critic, FIFO memory.

The actor reads only :class:`TextObservation` values, except in privileged
mode where it is also handed the full world state (ground-truth object
placement). In blind mode it has to search, and the critic's records steer
that search on later trials.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .catalog import COOL_KINDS, HEAT_KINDS, LAMPS, PROFILES, SINK_KINDS, VOCABULARY
from .observe import TextObservation, perturb_text, render_text
from .tasks import TaskSpec, TaskType
from .world import (
    EPISODE_CAP,
    PROCESS_VERBS,
    ActionInstance,
    EntityId,
    Verb,
    WorldState,
    goal_reached,
    goto,
    step,
)

log = logging.getLogger(__name__)


class FeedbackKind(str, enum.Enum):
    REPEATED_ACTION_LOOP = "RepeatedActionLoop"
    KNOWN_EMPTY_RECEPTACLE = "KnownEmptyReceptacle"
    KNOWN_OBJECT_LOCATION = "KnownObjectLocation"
    PREMATURE_PROCESSING = "PrematureProcessing"


@dataclass(frozen=True)
class FeedbackRecord:
    kind: FeedbackKind
    payload: tuple[str, ...]
    trial: int = 0

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "payload": list(self.payload), "trial": self.trial}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRecord":
        return cls(FeedbackKind(d["kind"]), tuple(d["payload"]), d["trial"])


@dataclass(frozen=True)
class MemoryPool:
    capacity: int = 3
    records: tuple[FeedbackRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, kind: FeedbackKind) -> list[FeedbackRecord]:
        return [r for r in self.records if r.kind is kind]


def memory_update(memory: MemoryPool, feedback) -> MemoryPool:
    """Append in order, evicting oldest first beyond capacity."""
    recs = memory.records + tuple(feedback)
    if memory.capacity <= 0:
        recs = ()
    elif len(recs) > memory.capacity:
        recs = recs[-memory.capacity:]
    return MemoryPool(memory.capacity, recs)


# -------------------------------------------------------------------- beliefs


@dataclass
class Belief:
    receptacles: tuple[EntityId, ...]
    location: EntityId | None
    holding: EntityId | None
    holding_flags: frozenset[str]
    contents: dict[EntityId, frozenset[EntityId]]  # receptacles whose contents are known
    closed: set[EntityId] = field(default_factory=set)
    lamp_on: set[EntityId] = field(default_factory=set)


def belief_from_state(state: WorldState) -> Belief:
    held = state.inventory
    flags = frozenset(state.objects[held].flags()) if held is not None else frozenset()
    return Belief(
        receptacles=tuple(sorted(state.receptacles)),
        location=state.agent_location,
        holding=held,
        holding_flags=flags,
        contents={k: frozenset(r.contents) for k, r in state.receptacles.items() if not r.toggleable},
        closed={k for k, r in state.receptacles.items() if r.openable and not r.open},
        lamp_on={k for k, r in state.receptacles.items() if r.toggleable and r.on},
    )


def belief_from_text(history, obs: TextObservation) -> Belief:
    seen = [h[0] for h in history] + [obs]
    # union over the episode so one garbled room line does not erase the map
    recs = {r for o in seen for r in o.receptacles}
    contents: dict[EntityId, frozenset[EntityId]] = {}
    closed: set[EntityId] = set()
    lamp_on: set[EntityId] = set()
    for o in seen:
        here = o.agent_location
        for held in o.inventory:
            contents = {k: v - {held} for k, v in contents.items()}
        if here is None:
            continue
        st = o.location_status
        if st == "closed":
            closed.add(here)
        elif st in ("on", "off"):
            (lamp_on.add if st == "on" else lamp_on.discard)(here)
        else:
            closed.discard(here)
            contents[here] = frozenset(x for x, _ in o.observed_objects)
    held = obs.inventory[0] if obs.inventory else None
    flags = frozenset(obs.inventory_flags[0].split()) if obs.inventory else frozenset()
    return Belief(tuple(sorted(set(recs))), obs.agent_location, held, flags, contents, closed, lamp_on)


# -------------------------------------------------------------------- planner


class Phase(str, enum.Enum):
    LOCATE = "Locate"
    ACQUIRE = "Acquire"
    PROCESS = "Process"
    DELIVER = "Deliver"
    ILLUMINATE = "Illuminate"


@dataclass
class PlannerState:
    phase: Phase
    search_order: list[EntityId]
    visited: set[EntityId]


_PROCESS = {
    TaskType.CLEAN_PLACE: (Verb.CLEAN, SINK_KINDS),
    TaskType.HEAT_PLACE: (Verb.HEAT, HEAT_KINDS),
    TaskType.COOL_PLACE: (Verb.COOL, COOL_KINDS),
}


def _prior_kinds(obj_kind: str) -> list[str]:
    out: list[str] = []
    for prof in PROFILES.values():
        for k in prof.placement.get(obj_kind, ()):
            if k not in out:
                out.append(k)
    return out


def search_order(task: TaskSpec, receptacles, memory: MemoryPool | None = None) -> list[EntityId]:
    """Catalog prior for the object type, then lexicographic; memory reorders.

    Receptacles named by a known-location record move to the front, those
    named by a known-empty record move to the back.
    """
    recs = sorted(r for r in set(receptacles) if r.kind not in LAMPS)
    prior = _prior_kinds(task.object_type)
    order = [r for k in prior for r in recs if r.kind == k]
    order += [r for r in recs if r not in order]
    if memory is None:
        return order
    front: list[EntityId] = []
    back: list[EntityId] = []
    for rec in memory.records:
        try:
            if rec.kind is FeedbackKind.KNOWN_OBJECT_LOCATION:
                obj, rid = (EntityId.parse(p) for p in rec.payload)
                if obj.kind == task.object_type and rid in order and rid not in front:
                    front.append(rid)
            elif rec.kind is FeedbackKind.KNOWN_EMPTY_RECEPTACLE:
                rid = EntityId.parse(rec.payload[0])
                if rid in order and rid not in back:
                    back.append(rid)
        except ValueError:
            continue
    back = [r for r in back if r not in front]
    middle = [r for r in order if r not in front and r not in back]
    return front + middle + back


def _first_of(b: Belief, kinds) -> EntityId | None:
    return next((r for r in b.receptacles if r.kind in kinds), None)


def _delivered(b: Belief, task: TaskSpec) -> set[EntityId]:
    if task.task_type is TaskType.LOOK_IN_LIGHT:
        return set()
    return {o for r, cs in b.contents.items() if r.kind == task.target_type
            for o in cs if o.kind == task.object_type}


def _needs_processing(b: Belief, task: TaskSpec) -> bool:
    tt = task.task_type
    if tt is TaskType.CLEAN_PLACE:
        return "dirty" in b.holding_flags
    if tt is TaskType.HEAT_PLACE:
        return "hot" not in b.holding_flags
    if tt is TaskType.COOL_PLACE:
        return "cold" not in b.holding_flags
    return False


def _reach(b: Belief, rid: EntityId) -> ActionInstance | None:
    """Go to ``rid`` and make it accessible; None once there and open."""
    if b.location != rid:
        return goto(rid)
    if rid in b.closed:
        return ActionInstance(Verb.OPEN, (rid,))
    return None


def _known_target(b: Belief, task: TaskSpec, order: list[EntityId]) -> tuple[EntityId, EntityId] | None:
    done = _delivered(b, task)
    rank = {r: i for i, r in enumerate(order)}
    found = [(o, r) for r, cs in b.contents.items() for o in cs
             if o.kind == task.object_type and o not in done]
    if not found:
        return None
    return min(found, key=lambda p: (p[1] != b.location, rank.get(p[1], len(rank)), p[1], p[0]))


def _phase(b: Belief, task: TaskSpec, order) -> Phase:
    if b.holding is not None and b.holding.kind == task.object_type and b.holding not in _delivered(b, task):
        if _needs_processing(b, task):
            return Phase.PROCESS
        return Phase.ILLUMINATE if task.task_type is TaskType.LOOK_IN_LIGHT else Phase.DELIVER
    if _known_target(b, task, order) is not None:
        return Phase.ACQUIRE
    return Phase.LOCATE


def _plan(b: Belief, task: TaskSpec, order: list[EntityId]) -> ActionInstance:
    tt = task.task_type
    held = b.holding
    phase = _phase(b, task, order)
    if phase is Phase.PROCESS:
        verb, kinds = _PROCESS[tt]
        dev = _first_of(b, kinds)
        if dev is not None:
            if b.location != dev:
                return goto(dev)
            return ActionInstance(verb, (held, dev))
    if phase is Phase.ILLUMINATE:
        lamp = _first_of(b, {task.target_type})
        if lamp is not None:
            if b.location != lamp or lamp in b.lamp_on:
                return goto(lamp)
            return ActionInstance(Verb.TOGGLE_ON, (lamp,))
    if phase in (Phase.DELIVER, Phase.PROCESS, Phase.ILLUMINATE):
        target = _first_of(b, {task.target_type})
        if target is not None:
            return _reach(b, target) or ActionInstance(Verb.PUT, (held, target))
    if held is not None:
        # carrying something useless: set it down
        here = b.location
        if here is not None and here.kind not in LAMPS:
            return _reach(b, here) or ActionInstance(Verb.PUT, (held, here))
        spot = next((r for r in order if r not in b.closed), order[0] if order else None)
        if spot is not None:
            return goto(spot)
    if phase is Phase.ACQUIRE:
        obj, rid = _known_target(b, task, order)
        return _reach(b, rid) or ActionInstance(Verb.TAKE, (obj, rid))
    for rid in order:
        if rid not in b.contents:
            act = _reach(b, rid)
            if act is not None:
                return act
    # everything searched; revisit in order
    if order:
        return goto(next((r for r in order if r != b.location), order[0]))
    if b.receptacles:
        return goto(b.receptacles[0])
    # nothing legible yet: guess the target named in the instruction
    return goto(EntityId(task.target_type, 1))


def planner_state(task: TaskSpec, history, obs: TextObservation, metadata: WorldState | None = None,
                  memory: MemoryPool | None = None) -> PlannerState:
    b = belief_from_state(metadata) if metadata is not None else belief_from_text(history, obs)
    order = search_order(task, b.receptacles, memory)
    return PlannerState(_phase(b, task, order), order, set(b.contents))


def actor_action(memory: MemoryPool | None, task: TaskSpec, history, obs: TextObservation,
                 metadata: WorldState | None = None) -> ActionInstance:
    """Next expert action.

    ``history`` is the list of ``(TextObservation, ActionInstance)`` pairs
    preceding ``obs``. Passing ``metadata`` (the true world state) gives the
    actor privileged, fully observable access; ``None`` means blind mode.
    """
    b = belief_from_state(metadata) if metadata is not None else belief_from_text(history, obs)
    order = search_order(task, b.receptacles, memory if metadata is None else None)
    act = _plan(b, task, order)
    if memory is not None and len(history) >= 2:
        looped = {r.payload[0] for r in memory.of_kind(FeedbackKind.REPEATED_ACTION_LOOP)}
        last = [a for _, a in history[-2:]]
        if act.surface in looped and all(a == act for a in last):
            alt = [r for r in (order or list(b.receptacles)) if r != b.location and goto(r) != act]
            if alt:
                act = goto(alt[0])
    return act


# --------------------------------------------------------------------- critic


@dataclass
class TextTrajectory:
    """``observations`` has one more entry than ``actions`` (the final state)."""

    observations: list[TextObservation]
    actions: list[ActionInstance]
    success: bool


def critic_feedback(trajectory: TextTrajectory, task: TaskSpec, trial: int = 0) -> list[FeedbackRecord]:
    out: list[FeedbackRecord] = []
    surfaces = [a.surface for a in trajectory.actions]
    looped: list[str] = []
    run = 1
    for i in range(1, len(surfaces) + 1):
        if i < len(surfaces) and surfaces[i] == surfaces[i - 1]:
            run += 1
            continue
        if run >= 3 and surfaces[i - 1] not in looped:
            looped.append(surfaces[i - 1])
        run = 1
    out += [FeedbackRecord(FeedbackKind.REPEATED_ACTION_LOOP, (s,), trial) for s in looped]

    premature: list[str] = []
    for obs, act in zip(trajectory.observations, trajectory.actions):
        if act.verb in PROCESS_VERBS and not obs.inventory and act.surface not in premature:
            premature.append(act.surface)
    out += [FeedbackRecord(FeedbackKind.PREMATURE_PROCESSING, (s,), trial) for s in premature]

    if trajectory.success:
        return out

    visited: list[EntityId] = []
    has_target: set[EntityId] = set()
    located: dict[EntityId, EntityId] = {}
    for obs in trajectory.observations:
        here = obs.agent_location
        if here is None or obs.location_status in ("closed", "on", "off"):
            continue
        if here not in visited:
            visited.append(here)
        for o, r in obs.observed_objects:
            if o.kind == task.object_type:
                has_target.add(r)
                located.setdefault(o, r)
    out += [FeedbackRecord(FeedbackKind.KNOWN_EMPTY_RECEPTACLE, (str(r),), trial)
            for r in visited if r not in has_target]
    # location records last so FIFO eviction drops them last
    out += [FeedbackRecord(FeedbackKind.KNOWN_OBJECT_LOCATION, (str(o), str(r)), trial)
            for o, r in located.items()]
    return out


# ------------------------------------------------------------------- rollouts


@dataclass
class ExpertEpisode:
    states: list[WorldState]
    actions: list[ActionInstance]
    observations: list[TextObservation]
    success: bool

    @property
    def steps(self) -> int:
        return len(self.actions)

    def text_trajectory(self) -> TextTrajectory:
        return TextTrajectory(self.observations, self.actions, self.success)


def run_expert(world: WorldState, task: TaskSpec, memory: MemoryPool | None = None, blind: bool = False,
               cap: int = EPISODE_CAP, text_noise: float = 0.0, rng: np.random.Generator | None = None,
               vocab=VOCABULARY) -> ExpertEpisode:
    """Let the expert act in the world until success or the step cap."""
    if text_noise > 0 and rng is None:
        raise ValueError("text noise needs a random stream")
    state = world.copy()
    states = [state]
    actions: list[ActionInstance] = []

    def see(s, a):
        o = render_text(s, a)
        return perturb_text(o, text_noise, rng, vocab) if text_noise > 0 else o

    observations = [see(state, None)]
    history: list[tuple[TextObservation, ActionInstance]] = []
    while state.step < cap and not goal_reached(state, task):
        act = actor_action(memory, task, history, observations[-1], None if blind else state)
        history.append((observations[-1], act))
        actions.append(act)
        state, _ = step(state, act, task, cap)
        states.append(state)
        observations.append(see(state, act))
    return ExpertEpisode(states, actions, observations, goal_reached(state, task))


def solves(world: WorldState, task: TaskSpec, cap: int = EPISODE_CAP) -> bool:
    return run_expert(world, task, cap=cap).success
