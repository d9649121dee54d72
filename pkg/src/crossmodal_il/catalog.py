"""Static room catalogs: receptacle and object types, attributes, placement rules.

Counts are upper bounds; world generation samples each count uniformly in
``[1, max]``. Placement lists double as the search prior used by the blind
expert, so their order matters.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ObjectAttr:
    pickupable: bool = True
    dirtyable: bool = False
    heatable: bool = False
    coolable: bool = False
    examinable: bool = False


OPENABLE = frozenset({"cabinet", "drawer", "fridge", "microwave", "safe"})
LAMPS = frozenset({"desklamp", "floorlamp"})

# device kind required by each processing verb
SINK_KINDS = frozenset({"sinkbasin"})
HEAT_KINDS = frozenset({"microwave"})
COOL_KINDS = frozenset({"fridge"})

_PRODUCE = ("apple", "potato", "tomato", "egg", "lettuce", "bread")
_DISHES = ("mug", "cup", "bowl", "plate")
_COOKWARE = ("pan", "pot")
_UTENSILS = ("fork", "spoon", "butterknife", "spatula")

DIRTYABLE = frozenset(
    {"apple", "potato", "tomato", "egg", "lettuce"}
    | set(_DISHES) | set(_COOKWARE) | set(_UTENSILS)
    | {"dishsponge", "cloth", "soapbar"}
)
HEATABLE = frozenset({"apple", "potato", "tomato", "egg", "bread", "mug", "cup", "bowl", "plate"})
COOLABLE = frozenset(set(_PRODUCE) | set(_DISHES) | set(_COOKWARE))
EXAMINABLE = frozenset(
    {"book", "cellphone", "pen", "pencil", "alarmclock", "cd", "keychain", "creditcard", "laptop", "pillow"}
)


def object_attrs(kind: str) -> ObjectAttr:
    return ObjectAttr(
        pickupable=True,
        dirtyable=kind in DIRTYABLE,
        heatable=kind in HEATABLE,
        coolable=kind in COOLABLE,
        examinable=kind in EXAMINABLE,
    )


@dataclass(frozen=True)
class RoomProfile:
    name: str
    receptacles: dict[str, int]
    objects: dict[str, int]
    # object kind -> receptacle kinds it may start in, most likely first
    placement: dict[str, tuple[str, ...]]


_produce_spots = ("countertop", "diningtable", "fridge", "microwave", "garbagecan")
_dish_spots = ("countertop", "cabinet", "coffeemachine", "sinkbasin", "diningtable", "shelf", "microwave", "fridge")
_plate_spots = ("countertop", "cabinet", "diningtable", "shelf", "sinkbasin", "fridge", "microwave")

KITCHEN = RoomProfile(
    name="kitchen",
    receptacles={
        "cabinet": 4, "coffeemachine": 1, "countertop": 2, "diningtable": 1, "drawer": 3,
        "fridge": 1, "garbagecan": 1, "microwave": 1, "shelf": 2, "sinkbasin": 1, "stoveburner": 2,
    },
    objects={
        "apple": 2, "bread": 2, "bowl": 2, "butterknife": 2, "creditcard": 2, "cup": 1, "dishsponge": 2,
        "egg": 1, "fork": 2, "lettuce": 1, "mug": 2, "pan": 1, "peppershaker": 2, "plate": 2, "pot": 2,
        "potato": 3, "saltshaker": 2, "spatula": 1, "spoon": 1, "tomato": 1,
    },
    placement={
        **{k: _produce_spots for k in _PRODUCE},
        "mug": _dish_spots,
        "cup": _dish_spots,
        "bowl": _plate_spots,
        "plate": _plate_spots,
        **{k: ("stoveburner", "countertop", "cabinet", "sinkbasin", "diningtable") for k in _COOKWARE},
        **{k: ("drawer", "countertop", "diningtable", "sinkbasin") for k in _UTENSILS},
        "saltshaker": ("countertop", "cabinet", "shelf", "diningtable", "drawer"),
        "peppershaker": ("countertop", "cabinet", "shelf", "diningtable", "drawer"),
        "dishsponge": ("sinkbasin", "countertop", "cabinet", "drawer"),
        "creditcard": ("countertop", "diningtable", "drawer", "shelf"),
    },
)

BATHROOM = RoomProfile(
    name="bathroom",
    receptacles={
        "cabinet": 4, "countertop": 1, "drawer": 2, "garbagecan": 1, "handtowelholder": 2,
        "shelf": 2, "sinkbasin": 2, "toilet": 1, "toiletpaperhanger": 1, "towelholder": 1,
    },
    objects={
        "candle": 2, "cloth": 2, "handtowel": 2, "soapbar": 2, "soapbottle": 2,
        "spraybottle": 2, "tissuebox": 1, "toiletpaper": 2, "towel": 1,
    },
    placement={
        "candle": ("countertop", "cabinet", "toilet", "shelf", "garbagecan"),
        "cloth": ("cabinet", "countertop", "sinkbasin", "toilet", "drawer", "garbagecan", "shelf"),
        "handtowel": ("handtowelholder", "countertop", "cabinet"),
        "soapbar": ("sinkbasin", "countertop", "cabinet", "toilet", "garbagecan"),
        "soapbottle": ("countertop", "cabinet", "toilet", "shelf", "garbagecan"),
        "spraybottle": ("cabinet", "countertop", "toilet", "shelf", "garbagecan"),
        "tissuebox": ("countertop", "toilet", "shelf", "cabinet"),
        "toiletpaper": ("toiletpaperhanger", "toilet", "cabinet", "countertop", "shelf"),
        "towel": ("towelholder", "countertop", "cabinet"),
    },
)

BEDROOM = RoomProfile(
    name="bedroom",
    receptacles={
        "bed": 1, "desk": 1, "desklamp": 1, "drawer": 4, "dresser": 1, "floorlamp": 1,
        "garbagecan": 1, "safe": 1, "shelf": 3, "sidetable": 2,
    },
    objects={
        "alarmclock": 2, "book": 2, "cd": 2, "cellphone": 2, "creditcard": 2,
        "keychain": 2, "laptop": 1, "pen": 2, "pencil": 2, "pillow": 2,
    },
    placement={
        "alarmclock": ("desk", "sidetable", "dresser", "shelf"),
        "book": ("desk", "bed", "shelf", "sidetable", "dresser", "drawer", "safe"),
        "cd": ("desk", "drawer", "safe", "shelf", "sidetable", "garbagecan"),
        "cellphone": ("bed", "desk", "sidetable", "dresser", "drawer", "safe"),
        "creditcard": ("desk", "drawer", "safe", "sidetable", "dresser"),
        "keychain": ("drawer", "dresser", "safe", "sidetable", "desk"),
        "laptop": ("bed", "desk"),
        "pen": ("desk", "drawer", "sidetable", "shelf", "dresser"),
        "pencil": ("desk", "drawer", "sidetable", "shelf", "dresser"),
        "pillow": ("bed", "dresser"),
    },
)

PROFILES: dict[str, RoomProfile] = {p.name: p for p in (KITCHEN, BATHROOM, BEDROOM)}

# template words of the catalog, used as the default replacement vocabulary
# for text noise
VOCABULARY: tuple[str, ...] = tuple(sorted(
    {k for p in PROFILES.values() for k in p.receptacles}
    | {k for p in PROFILES.values() for k in p.objects}
    | {str(i) for i in range(1, 10)}
    | {"a", "the", "is", "in", "on", "at", "you", "see", "open", "closed", "nothing",
       "dirty", "hot", "cold", "carrying", "are", "and", "it", "off"}
))


def get_profile(name: str) -> RoomProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown room profile {name!r}; expected one of {sorted(PROFILES)}") from None
