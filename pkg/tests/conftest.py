from pathlib import Path

import numpy as np
import pytest

from crossmodal_il.catalog import LAMPS, OPENABLE, object_attrs
from crossmodal_il.world import EntityId, ObjectState, ReceptacleState, WorldState


def E(text: str) -> EntityId:
    return EntityId.parse(text)


def build_world(receptacles, placement, agent=None, inventory=None, dirty=None, seed=0,
                profile="kitchen") -> WorldState:
    """Hand-made world. ``placement`` maps object id text -> receptacle id text."""
    recs = {}
    for text in receptacles:
        rid = E(text)
        recs[rid] = ReceptacleState(rid, openable=rid.kind in OPENABLE, toggleable=rid.kind in LAMPS)
    objs = {}
    for otext, rtext in placement.items():
        oid = E(otext)
        attrs = object_attrs(oid.kind)
        d = attrs.dirtyable if dirty is None else (otext in dirty)
        objs[oid] = ObjectState(oid, attrs, dirty=d, location=E(rtext))
        recs[E(rtext)].contents.add(oid)
    w = WorldState(recs, objs, seed=seed, profile=profile)
    if agent is not None:
        w.agent_location = E(agent)
    if inventory is not None:
        oid = E(inventory)
        attrs = object_attrs(oid.kind)
        objs[oid] = ObjectState(oid, attrs, dirty=attrs.dirtyable if dirty is None else inventory in dirty)
        w.inventory = oid
    return w


_SMALL_RECS = ["cabinet", "countertop", "sinkbasin", "microwave", "fridge", "desklamp", "drawer"]
_SMALL_OBJS = ["mug", "apple", "book", "cloth", "fork"]


def random_small_world(rng: np.random.Generator) -> WorldState:
    nrec = int(rng.integers(2, 5))
    kinds = rng.choice(_SMALL_RECS, size=nrec, replace=True)
    recs = []
    counts: dict[str, int] = {}
    for k in kinds:
        counts[k] = counts.get(k, 0) + 1
        recs.append(f"{k} {counts[k]}")
    holders = [r for r in recs if E(r).kind not in LAMPS] or [recs[0]]
    if all(E(r).kind in LAMPS for r in recs):
        recs.append("countertop 1")
        holders = ["countertop 1"]
    nobj = int(rng.integers(2, 6))
    placement = {}
    ocounts: dict[str, int] = {}
    for _ in range(nobj):
        k = str(rng.choice(_SMALL_OBJS))
        ocounts[k] = ocounts.get(k, 0) + 1
        placement[f"{k} {ocounts[k]}"] = str(rng.choice(holders))
    w = build_world(recs, placement)
    for o in w.objects.values():
        o.dirty = bool(o.attrs.dirtyable and rng.random() < 0.5)
        o.hot = bool(rng.random() < 0.2)
        o.cold = (not o.hot) and bool(rng.random() < 0.2)
    for r in w.receptacles.values():
        r.open = bool(r.openable and rng.random() < 0.5)
        r.on = bool(r.toggleable and rng.random() < 0.3)
    if rng.random() < 0.7:
        w.agent_location = E(str(rng.choice(recs)))
    return w


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run and archived
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    lines = [ACCEPTANCE[k] for k in sorted(ACCEPTANCE)]
    for line in lines:
        terminalreporter.write_line(line)
    out = Path(__file__).resolve().parents[1] / "artifacts"
    out.mkdir(exist_ok=True)
    (out / "acceptance.txt").write_text("\n".join(lines) + "\n")
