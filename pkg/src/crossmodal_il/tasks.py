"""Task families, template instructions and procedural task generation."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .catalog import COOL_KINDS, HEAT_KINDS, LAMPS, SINK_KINDS, get_profile
from .world import EPISODE_CAP, EntityId, WorldState, generate_world, goal_reached


class TaskType(str, enum.Enum):
    PICK_PLACE = "PickPlace"
    CLEAN_PLACE = "CleanPlace"
    HEAT_PLACE = "HeatPlace"
    COOL_PLACE = "CoolPlace"
    LOOK_IN_LIGHT = "LookInLight"
    PICK_TWO_PLACE = "PickTwoPlace"


# family name used in generated task lists
ALFRED_NAMES = {
    TaskType.PICK_PLACE: "pick_and_place_simple",
    TaskType.CLEAN_PLACE: "pick_clean_then_place_in_recep",
    TaskType.HEAT_PLACE: "pick_heat_then_place_in_recep",
    TaskType.COOL_PLACE: "pick_cool_then_place_in_recep",
    TaskType.LOOK_IN_LIGHT: "look_at_obj_in_light",
    TaskType.PICK_TWO_PLACE: "pick_two_obj_and_place",
}

_DEVICE = {
    TaskType.CLEAN_PLACE: SINK_KINDS,
    TaskType.HEAT_PLACE: HEAT_KINDS,
    TaskType.COOL_PLACE: COOL_KINDS,
}
_ATTR = {
    TaskType.CLEAN_PLACE: "dirtyable",
    TaskType.HEAT_PLACE: "heatable",
    TaskType.COOL_PLACE: "coolable",
    TaskType.LOOK_IN_LIGHT: "examinable",
}


def instruction_for(task_type: TaskType, obj: str, target: str) -> str:
    if task_type is TaskType.PICK_PLACE:
        return f"put a {obj} in {target}"
    if task_type is TaskType.CLEAN_PLACE:
        return f"put a clean {obj} in {target}"
    if task_type is TaskType.HEAT_PLACE:
        return f"put a hot {obj} in {target}"
    if task_type is TaskType.COOL_PLACE:
        return f"put a cool {obj} in {target}"
    if task_type is TaskType.LOOK_IN_LIGHT:
        return f"look at {obj} under the {target}"
    return f"put two {obj} in {target}"


@dataclass(frozen=True)
class TaskSpec:
    task_type: TaskType
    object_type: str
    target_type: str
    instruction: str

    @classmethod
    def make(cls, task_type: TaskType | str, obj: str, target: str) -> "TaskSpec":
        tt = TaskType(task_type)
        return cls(tt, obj, target, instruction_for(tt, obj, target))

    def to_dict(self) -> dict:
        return {"task_type": self.task_type.value, "object_type": self.object_type,
                "target_type": self.target_type, "instruction": self.instruction}

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(TaskType(d["task_type"]), d["object_type"], d["target_type"], d["instruction"])


class TaskGenerationError(RuntimeError):
    pass


@dataclass
class TaskInstance:
    """A world paired with the task to solve in it."""

    world: WorldState
    task: TaskSpec

    @property
    def seed(self) -> int:
        return self.world.seed

    @property
    def task_id(self) -> str:
        t = self.task
        return f"{self.world.profile}-{self.world.seed}-{t.task_type.value}-{t.object_type}-{t.target_type}"

    def with_instruction(self, text: str) -> "TaskInstance":
        return TaskInstance(self.world, replace(self.task, instruction=text))

    def to_dict(self) -> dict:
        d = self.world.to_dict()
        d["task"] = self.task.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaskInstance":
        return cls(WorldState.from_dict(d), TaskSpec.from_dict(d["task"]))


def candidate_tasks(world: WorldState) -> list[tuple[TaskType, str, str]]:
    """Attribute-compatible (type, object, target) triples not already satisfied."""
    prof = get_profile(world.profile)
    rec_kinds = sorted({r.kind for r in world.receptacles})
    counts: dict[str, int] = {}
    for o in world.objects.values():
        counts[o.id.kind] = counts.get(o.id.kind, 0) + 1
    out = []
    for obj in sorted(counts):
        attrs = world.objects[EntityId(obj, 1)].attrs
        # a target kind that already holds this object type would make the goal trivial
        occupied = {o.location.kind for o in world.objects_of(obj)}
        places = [k for k in prof.placement[obj] if k in rec_kinds and k not in occupied]
        for tt in TaskType:
            if tt is TaskType.LOOK_IN_LIGHT:
                if attrs.examinable:
                    out.extend((tt, obj, lamp) for lamp in rec_kinds if lamp in LAMPS)
                continue
            if tt in _ATTR and not getattr(attrs, _ATTR[tt]):
                continue
            if tt in _DEVICE and not (_DEVICE[tt] & set(rec_kinds)):
                continue
            if tt is TaskType.PICK_TWO_PLACE and counts[obj] < 2:
                continue
            for target in places:
                if tt in _DEVICE and target in _DEVICE[tt]:
                    continue
                out.append((tt, obj, target))
    return out


def generate_task(seed: int, world: WorldState, task_type: TaskType | str | None = None,
                  cap: int = EPISODE_CAP) -> TaskSpec:
    """Pick a task uniformly among solvable candidates of the world.

    Solvability is checked by rolling out the privileged planner.
    """
    from .expert import solves

    rng = np.random.default_rng([seed, 0x7A5C])
    cands = candidate_tasks(world)
    if task_type is not None:
        tt = TaskType(task_type)
        cands = [c for c in cands if c[0] is tt]
    order = rng.permutation(len(cands))
    for i in order:
        spec = TaskSpec.make(*cands[i])
        if goal_reached(world, spec):
            continue
        if solves(world, spec, cap=cap):
            return spec
    raise TaskGenerationError(
        f"no solvable task{'' if task_type is None else ' of type ' + str(task_type)} "
        f"in {world.profile} world seed={world.seed}"
    )


FAMILY_PROFILES = {
    TaskType.PICK_PLACE: "kitchen",
    TaskType.CLEAN_PLACE: "kitchen",
    TaskType.HEAT_PLACE: "kitchen",
    TaskType.COOL_PLACE: "kitchen",
    TaskType.LOOK_IN_LIGHT: "bedroom",
    TaskType.PICK_TWO_PLACE: "bathroom",
}


def make_instance(seed: int, profile: str, task_type: TaskType | str | None = None) -> TaskInstance:
    world = generate_world(seed, profile)
    return TaskInstance(world, generate_task(seed, world, task_type))


def family_suite(seed: int) -> list[TaskInstance]:
    """One task per family, each in its own world. World seeds are ``seed*100 + k``."""
    return [make_instance(seed * 100 + k, FAMILY_PROFILES[tt], tt) for k, tt in enumerate(TaskType)]


def generate_tasks(n: int, seed: int, profiles: tuple[str, ...] = ("kitchen", "bathroom", "bedroom"),
                   ) -> list[TaskInstance]:
    """``n`` tasks over rotating profiles with world seeds ``seed*10000 + i``."""
    out = []
    for i in range(n):
        out.append(make_instance(seed * 10000 + i, profiles[i % len(profiles)]))
    return out


def save_tasks(tasks: list[TaskInstance], path: str | Path) -> None:
    with open(path, "w") as f:
        for t in tasks:
            f.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


def load_tasks(path: str | Path) -> list[TaskInstance]:
    with open(path) as f:
        return [TaskInstance.from_dict(json.loads(line)) for line in f if line.strip()]
