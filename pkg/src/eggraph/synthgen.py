"""Seeded generator of synthetic scenes, event streams, and QA datasets.

The generator maintains its own world model (who is where when, what
happened) and derives gold answers from that model by direct simulation,
never from the ingested graph. Graph-construction or ingestion bugs
therefore surface as score drops instead of being baked into the gold.

Everything is a pure function of the parameters: the same seed yields
byte-identical manifests, records, and datasets.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .agents.base import Modality, QueryRecord
from .core import Position3, TimeInterval
from .errors import InfeasibleParamsError
from .serialization import (
    AttributeSnapshot,
    EventRecord,
    ObjectSpec,
    RecordGrounding,
    RoomSpec,
    RoomStay,
    SceneManifest,
)

ROOM_NAMES = (
    "coffee room",
    "office",
    "kitchen",
    "meeting room",
    "lab",
    "workshop",
    "lounge",
    "storage room",
    "hallway",
    "library",
    "studio",
    "server room",
)

#: (semantic class, adjective pool) for object naming.
OBJECT_CLASSES = (
    ("mug", ("red ceramic", "blue", "green glass", "white porcelain", "black")),
    ("kettle", ("steel", "copper", "black plastic")),
    ("laptop", ("silver", "black", "gray")),
    ("chair", ("wooden", "leather", "mesh")),
    ("plant", ("potted", "hanging", "small")),
    ("notebook", ("spiral", "leather-bound", "yellow")),
    ("phone", ("desk", "cordless", "vintage")),
    ("lamp", ("brass", "clip-on", "tall")),
    ("monitor", ("curved", "ultrawide", "compact")),
    ("whiteboard", ("rolling", "wall-mounted", "magnetic")),
)

CAPTION_DETAILS = (
    "with a glossy finish",
    "with a chipped handle",
    "covered in stickers",
    "with a woven pattern",
    "with a matte surface",
    "with a small dent",
    "with a paper label",
    "with rounded corners",
    "with a worn grip",
    "with a faded print",
)

TOGGLE_CLASSES = frozenset({"lamp", "kettle", "monitor", "laptop"})

MAKE_COFFEE = "make_coffee"
MOVE_OBJECT = "move_object"
USE_OBJECT = "use_object"
TOGGLE_STATE = "toggle_state"
TEMPLATES = (MAKE_COFFEE, MOVE_OBJECT, USE_OBJECT, TOGGLE_STATE)

#: Question budget fractions per modality (text, binary, node, time).
_MODALITY_FRACTIONS = (
    (Modality.TEXT, 24),
    (Modality.BINARY, 27),
    (Modality.NODE, 19),
    (Modality.TIME, 10),
)

_DEFAULT_HORIZON = TimeInterval(
    int(datetime(2025, 8, 30, 8, 0, tzinfo=timezone.utc).timestamp() * 1_000_000),
    int(datetime(2025, 8, 30, 18, 0, tzinfo=timezone.utc).timestamp() * 1_000_000),
)


@dataclass(frozen=True)
class GenParams:
    """Scenario shape: scene size, event count and mix, question budget."""

    seed: int = 42
    n_rooms: int = 2
    n_objects: int = 21
    n_events: int = 35
    horizon: TimeInterval = _DEFAULT_HORIZON
    template_mix: tuple[tuple[str, float], ...] = (
        (MAKE_COFFEE, 2.0),
        (MOVE_OBJECT, 3.0),
        (USE_OBJECT, 3.0),
        (TOGGLE_STATE, 2.0),
    )
    n_questions: int = 80
    caption_word_dropout: float = 0.0


@dataclass
class _WorldEvent:
    event_id: str
    template: str
    interval: TimeInterval
    room_id: str
    # (object_id, description, first snapshot, last snapshot)
    participants: list[tuple[str, str, AttributeSnapshot, AttributeSnapshot]]
    summary: str
    move_dest: str | None = None


@dataclass
class _WorldObject:
    id: str
    name: str
    semantic_class: str
    caption: str
    room_changes: list[tuple[int, str]] = field(default_factory=list)  # (time, room)
    state: str = "off"
    event_ids: list[str] = field(default_factory=list)

    def room_at(self, t: int, horizon: TimeInterval) -> str | None:
        if not (horizon.start <= t <= horizon.end):
            return None
        room = None
        for change_time, room_id in self.room_changes:
            if change_time <= t:
                room = room_id
            else:
                break
        return room

    def segments(self, horizon: TimeInterval) -> list[tuple[str, TimeInterval]]:
        """Room stays as (room_id, interval) tiles over the horizon."""
        out = []
        for i, (change_time, room_id) in enumerate(self.room_changes):
            end = (
                self.room_changes[i + 1][0]
                if i + 1 < len(self.room_changes)
                else horizon.end
            )
            out.append((room_id, TimeInterval(change_time, end)))
        return out


def _check_feasible(params: GenParams) -> dict[str, float]:
    if params.n_rooms < 0 or params.n_objects < 0 or params.n_events < 0:
        raise InfeasibleParamsError("counts must be non-negative")
    if params.n_objects > 0 and params.n_rooms == 0:
        raise InfeasibleParamsError("objects need at least one room to start in")
    if params.n_rooms > len(ROOM_NAMES):
        raise InfeasibleParamsError(f"at most {len(ROOM_NAMES)} rooms are nameable")
    mix = {name: weight for name, weight in params.template_mix if weight > 0}
    if params.n_events > 0:
        if params.n_objects == 0:
            raise InfeasibleParamsError("events need at least one object")
        if not mix:
            raise InfeasibleParamsError("event template mix is empty")
        unknown = set(mix) - set(TEMPLATES)
        if unknown:
            raise InfeasibleParamsError(f"unknown event templates: {sorted(unknown)}")
        if set(mix) == {MOVE_OBJECT} and params.n_rooms < 2:
            raise InfeasibleParamsError("moving objects needs at least two rooms")
    return mix


def _dropout(text: str, p: float, rng: random.Random) -> str:
    """Degrade caption text by dropping words; stands in for noisy captioning."""
    if p <= 0:
        return text
    words = text.split()
    kept = [w for w in words if rng.random() >= p]
    return " ".join(kept) if kept else words[0]


def _build_rooms(params: GenParams) -> list[RoomSpec]:
    return [
        RoomSpec(
            id=f"room_{i + 1}",
            name=ROOM_NAMES[i],
            position=Position3(8.0 * i, 0.0, 0.0),
        )
        for i in range(params.n_rooms)
    ]


def _build_objects(params: GenParams, rng: random.Random) -> list[_WorldObject]:
    combos = [
        (cls, adjective)
        for cls, adjectives in OBJECT_CLASSES
        for adjective in adjectives
    ]
    if params.n_objects > len(combos):
        raise InfeasibleParamsError(f"at most {len(combos)} objects are nameable")
    # Keep the archetype classes present in small scenes, then vary.
    head = combos[:4]  # two mugs, a kettle, a laptop
    tail = combos[4:]
    rng.shuffle(tail)
    chosen = (head + tail)[: params.n_objects]
    objects = []
    for i, (cls, adjective) in enumerate(chosen):
        name = f"{adjective} {cls}"
        detail = CAPTION_DETAILS[i % len(CAPTION_DETAILS)]
        objects.append(
            _WorldObject(
                id=f"object_{i + 1}",
                name=name,
                semantic_class=cls,
                caption=f"A {name} {detail}.",
            )
        )
    return objects


def _event_intervals(params: GenParams) -> list[TimeInterval]:
    """Disjoint, evenly spread intervals across the horizon."""
    n = params.n_events
    span = params.horizon.duration
    if n > 0 and span < 2 * n:
        raise InfeasibleParamsError("horizon too short for the requested event count")
    slots = []
    for i in range(n):
        lo = params.horizon.start + (span * i) // n
        hi = params.horizon.start + (span * (i + 1)) // n
        pad = max(1, (hi - lo) // 10)
        slots.append(TimeInterval(lo + pad, max(lo + pad + 1, hi - pad)))
    return slots


def _jitter(rng: random.Random, base: Position3, spread: float = 1.5) -> Position3:
    return Position3(
        round(base.x + rng.uniform(-spread, spread), 3),
        round(base.y + rng.uniform(-spread, spread), 3),
        round(base.z + rng.uniform(0.5, 1.5), 3),
    )


class _Scenario:
    """Mutable world state while events are being simulated."""

    def __init__(self, params: GenParams, rng: random.Random):
        self.params = params
        self.rng = rng
        self.rooms = _build_rooms(params)
        self.room_pos = {room.id: room.position for room in self.rooms}
        self.objects = _build_objects(params, rng)
        for obj in self.objects:
            obj.room_changes.append((params.horizon.start, rng.choice(self.rooms).id))
        self.by_id = {obj.id: obj for obj in self.objects}
        self.events: list[_WorldEvent] = []

    # -- template feasibility and sampling --

    def _objects_of(self, classes: frozenset[str] | None = None) -> list[_WorldObject]:
        return [
            obj
            for obj in self.objects
            if classes is None or obj.semantic_class in classes
        ]

    def _pick_template(self, requested: str) -> str:
        if requested == MAKE_COFFEE and self._objects_of(frozenset({"mug"})):
            return MAKE_COFFEE
        if requested == MOVE_OBJECT and len(self.rooms) >= 2:
            return MOVE_OBJECT
        if requested == TOGGLE_STATE and self._objects_of(TOGGLE_CLASSES):
            return TOGGLE_STATE
        if requested == USE_OBJECT:
            return USE_OBJECT
        return USE_OBJECT  # always satisfiable fallback

    def simulate(self, interval: TimeInterval, requested: str, index: int) -> None:
        template = self._pick_template(requested)
        event_id = f"event_{index + 1}"
        rng = self.rng
        horizon = self.params.horizon

        if template == MAKE_COFFEE:
            mugs = self._objects_of(frozenset({"mug"}))
            mug = rng.choice(mugs)
            room_id = mug.room_at(interval.start, horizon)
            kettles = [
                k
                for k in self._objects_of(frozenset({"kettle"}))
                if k.room_at(interval.start, horizon) == room_id
            ]
            room_name = self._room_name(room_id)
            summary = f"A person makes coffee in the {room_name}."
            participants = [self._participation(mug, interval, room_id, "was used to drink coffee")]
            if kettles:
                kettle = rng.choice(kettles)
                participants.append(
                    self._participation(kettle, interval, room_id, "was used to boil water")
                )
        elif template == MOVE_OBJECT:
            obj = rng.choice(self.objects)
            src = obj.room_at(interval.start, horizon)
            dest = rng.choice([room.id for room in self.rooms if room.id != src])
            src_name, dest_name = self._room_name(src), self._room_name(dest)
            summary = f"A person carries the {obj.name} to the {dest_name}."
            role = f"was moved from the {src_name} to the {dest_name}"
            first = AttributeSnapshot(interval.start, _jitter(rng, self.room_pos[src]))
            last = AttributeSnapshot(interval.end, _jitter(rng, self.room_pos[dest]))
            participants = [(obj.id, self._role_text(obj, role), first, last)]
            obj.room_changes.append((interval.end, dest))
            obj.event_ids.append(event_id)
            room_id = src
            self.events.append(
                _WorldEvent(
                    event_id, template, interval, room_id, participants, summary, move_dest=dest
                )
            )
            return
        elif template == TOGGLE_STATE:
            candidates = self._objects_of(TOGGLE_CLASSES)
            obj = rng.choice(candidates)
            room_id = obj.room_at(interval.start, horizon)
            new_state = "off" if obj.state == "on" else "on"
            room_name = self._room_name(room_id)
            summary = f"A person turns {new_state} the {obj.name} in the {room_name}."
            role = f"was turned {new_state}"
            base = self.room_pos[room_id]
            first = AttributeSnapshot(interval.start, _jitter(rng, base), state=obj.state)
            last = AttributeSnapshot(interval.end, _jitter(rng, base), state=new_state)
            obj.state = new_state
            participants = [(obj.id, self._role_text(obj, role), first, last)]
        else:  # USE_OBJECT
            obj = rng.choice(self.objects)
            room_id = obj.room_at(interval.start, horizon)
            room_name = self._room_name(room_id)
            verb = "works on" if obj.semantic_class in ("laptop", "notebook") else "uses"
            summary = f"A person {verb} the {obj.name} in the {room_name}."
            participants = [
                self._participation(obj, interval, room_id, "was used by the person")
            ]

        for object_id, _, _, _ in participants:
            self.by_id[object_id].event_ids.append(event_id)
        self.events.append(
            _WorldEvent(event_id, template, interval, room_id, participants, summary)
        )

    def _participation(
        self, obj: _WorldObject, interval: TimeInterval, room_id: str, role: str
    ) -> tuple[str, str, AttributeSnapshot, AttributeSnapshot]:
        base = self.room_pos[room_id]
        first = AttributeSnapshot(interval.start, _jitter(self.rng, base))
        last = AttributeSnapshot(interval.end, _jitter(self.rng, base))
        return (obj.id, self._role_text(obj, role), first, last)

    def _role_text(self, obj: _WorldObject, role: str) -> str:
        return f"The {obj.name} {role}."

    def _room_name(self, room_id: str) -> str:
        return next(room.name for room in self.rooms if room.id == room_id)


def _emit_manifest(scenario: _Scenario, params: GenParams) -> SceneManifest:
    objects = []
    for obj in scenario.objects:
        segments = obj.segments(params.horizon)
        transitions = tuple(
            RoomStay(room_id, interval) for room_id, interval in segments[1:]
        )
        objects.append(
            ObjectSpec(
                id=obj.id,
                name=obj.name,
                semantic_class=obj.semantic_class,
                caption=obj.caption,
                initial_room=segments[0][0],
                transitions=transitions,
            )
        )
    return SceneManifest(
        rooms=tuple(scenario.rooms), objects=tuple(objects), horizon=params.horizon
    )


def _emit_records(scenario: _Scenario, params: GenParams, rng: random.Random) -> list[EventRecord]:
    records = []
    for event in scenario.events:
        base = scenario.room_pos[event.room_id]
        cameras = tuple(
            _jitter(rng, base) for _ in range(rng.randint(1, 3))
        )
        groundings = tuple(
            RecordGrounding(
                spatial_id=object_id,
                description=_dropout(description, params.caption_word_dropout, rng),
                first=first,
                last=last,
            )
            for object_id, description, first, last in event.participants
        )
        records.append(
            EventRecord(
                event_id=event.event_id,
                interval=event.interval,
                summary=_dropout(event.summary, params.caption_word_dropout, rng),
                camera_positions=cameras,
                groundings=groundings,
                room_hint=event.room_id,
            )
        )
    return records


# --- question construction ---------------------------------------------------


def _modality_counts(n_questions: int) -> dict[Modality, int]:
    total_weight = sum(weight for _, weight in _MODALITY_FRACTIONS)
    counts = {}
    remainders = []
    assigned = 0
    for modality, weight in _MODALITY_FRACTIONS:
        exact = n_questions * weight / total_weight
        counts[modality] = int(exact)
        assigned += int(exact)
        remainders.append((exact - int(exact), modality))
    remainders.sort(key=lambda pair: (-pair[0], pair[1].value))
    for _, modality in remainders[: n_questions - assigned]:
        counts[modality] += 1
    return counts


def _question_pools(
    scenario: _Scenario, params: GenParams
) -> dict[Modality, list[tuple[str, object, tuple[str, ...]]]]:
    horizon = params.horizon
    objects = scenario.objects
    involved = [obj for obj in objects if obj.event_ids]
    events_by_id = {event.event_id: event for event in scenario.events}
    coffee_events = [e for e in scenario.events if e.template == MAKE_COFFEE]
    move_events = [e for e in scenario.events if e.template == MOVE_OBJECT]
    toggle_events = [e for e in scenario.events if e.template == TOGGLE_STATE]

    def participants(event: _WorldEvent) -> list[str]:
        return [object_id for object_id, _, _, _ in event.participants]

    coffee_objects = sorted({o for e in coffee_events for o in participants(e)})
    toggled_objects = sorted({o for e in toggle_events for o in participants(e)})
    moved_pairs = sorted({(participants(e)[0], e.move_dest) for e in move_events})

    binary: list[tuple[str, object, tuple[str, ...]]] = []
    for object_id in coffee_objects:
        obj = scenario.by_id[object_id]
        binary.append(
            (f"Was the {obj.name} ever used to make coffee?", True, ("event", "instance"))
        )
    for object_id, dest in moved_pairs:
        obj = scenario.by_id[object_id]
        binary.append(
            (
                f"Was the {obj.name} ever moved to the {scenario._room_name(dest)}?",
                True,
                ("event", "instance"),
            )
        )
    for obj in involved:
        binary.append((f"Did anyone ever use the {obj.name}?", True, ("event", "instance")))
    for object_id in toggled_objects:
        obj = scenario.by_id[object_id]
        binary.append(
            (f"Was the {obj.name} ever turned on or off?", True, ("event", "instance"))
        )
    # Negatives: absent involvement makes the gold answer "no".
    if coffee_events:
        for obj in objects:
            if obj.semantic_class == "mug" and obj.id not in coffee_objects:
                binary.append(
                    (f"Was the {obj.name} ever used to make coffee?", False, ("event-negative",))
                )
    if scenario.events:
        for obj in objects:
            if not obj.event_ids:
                binary.append(
                    (f"Did anyone ever use the {obj.name}?", False, ("event-negative",))
                )
    moved_set = set(moved_pairs)
    for obj in involved:
        for room in scenario.rooms:
            if (obj.id, room.id) not in moved_set:
                binary.append(
                    (
                        f"Was the {obj.name} ever moved to the {room.name}?",
                        False,
                        ("event-negative",),
                    )
                )

    node: list[tuple[str, object, tuple[str, ...]]] = []
    if coffee_events:
        rooms_with_coffee = frozenset(e.room_id for e in coffee_events)
        node.append(("Where can I get some coffee?", rooms_with_coffee, ("event",)))
        mugs = frozenset(
            o for o in coffee_objects if scenario.by_id[o].semantic_class == "mug"
        )
        node.append(("Which mug was used for making coffee?", mugs, ("event", "instance")))
        kettles = frozenset(
            o for o in coffee_objects if scenario.by_id[o].semantic_class == "kettle"
        )
        if kettles:
            node.append(
                ("Which kettle was used for making coffee?", kettles, ("event", "instance"))
            )
    carried: dict[tuple[str, str], set[str]] = {}
    for object_id, dest in moved_pairs:
        cls = scenario.by_id[object_id].semantic_class
        carried.setdefault((cls, dest), set()).add(object_id)
    for (cls, dest), ids in sorted(carried.items()):
        node.append(
            (
                f"Which {cls} did someone carry to the {scenario._room_name(dest)}?",
                frozenset(ids),
                ("event", "instance"),
            )
        )
    for obj in involved:
        for room_id, segment in obj.segments(horizon):
            if segment.duration < 2:
                continue
            midpoint = segment.start + segment.duration // 2
            node.append(
                (
                    f"Where was the {obj.name} at time {midpoint}?",
                    frozenset({room_id}),
                    ("spatial",),
                )
            )

    time_pool: list[tuple[str, object, tuple[str, ...]]] = []
    if coffee_events:
        time_pool.append(
            ("When did someone first make coffee?", coffee_events[0].interval, ("event",))
        )
    for obj in involved:
        last_event = events_by_id[obj.event_ids[-1]]
        time_pool.append(
            (
                f"When did someone last interact with the {obj.name}?",
                last_event.interval,
                ("event", "instance"),
            )
        )

    text: list[tuple[str, object, tuple[str, ...]]] = []
    for obj in involved:
        text.append((f"Describe the {obj.name}.", obj.caption, ("static",)))
    for obj in involved:
        descriptions = []
        for event_id in obj.event_ids:
            event = events_by_id[event_id]
            for object_id, description, _, _ in event.participants:
                if object_id == obj.id:
                    descriptions.append(description)
        text.append(
            (
                f"What did the person do with the {obj.name}?",
                " ".join(descriptions),
                ("event-text",),
            )
        )
    if not scenario.events:
        # Static-only fallbacks so event-free scenes still yield questions.
        for obj in objects:
            text.append((f"Describe the {obj.name}.", obj.caption, ("static",)))
            segments = obj.segments(horizon)
            room_id, segment = segments[0]
            if segment.duration >= 2:
                midpoint = segment.start + segment.duration // 2
                node.append(
                    (
                        f"Where was the {obj.name} at time {midpoint}?",
                        frozenset({room_id}),
                        ("spatial",),
                    )
                )

    return {
        Modality.TEXT: text,
        Modality.BINARY: binary,
        Modality.NODE: node,
        Modality.TIME: time_pool,
    }


def _build_questions(
    scenario: _Scenario, params: GenParams, rng: random.Random
) -> list[QueryRecord]:
    pools = _question_pools(scenario, params)
    for pool in pools.values():
        seen: set[str] = set()
        deduped = [
            entry for entry in pool if not (entry[0] in seen or seen.add(entry[0]))
        ]
        pool[:] = deduped
    counts = _modality_counts(params.n_questions)
    order = [m for m, _ in _MODALITY_FRACTIONS]

    # Give unmet quotas to modalities with spare candidates, deterministically.
    taken: dict[Modality, int] = {}
    spare = 0
    for modality in order:
        available = len(pools[modality])
        taken[modality] = min(counts[modality], available)
        spare += counts[modality] - taken[modality]
    for modality in order:
        if spare <= 0:
            break
        room_left = len(pools[modality]) - taken[modality]
        extra = min(room_left, spare)
        taken[modality] += extra
        spare -= extra

    questions: list[QueryRecord] = []
    index = 0
    for modality in order:
        picked = rng.sample(pools[modality], taken[modality])
        for question, gold, tags in picked:
            index += 1
            questions.append(
                QueryRecord(
                    id=f"q_{index}",
                    question=question,
                    modality=modality,
                    gold=gold,
                    tags=tags,
                )
            )
    return questions


def generate(
    params: GenParams = GenParams(),
) -> tuple[SceneManifest, list[EventRecord], list[QueryRecord]]:
    """Produce a manifest, event records, and a QA dataset for one scenario."""
    mix = _check_feasible(params)
    rng = random.Random(params.seed)

    scenario = _Scenario(params, rng)
    intervals = _event_intervals(params)
    names = list(mix.keys())
    weights = [mix[name] for name in names]
    for index, interval in enumerate(intervals):
        requested = rng.choices(names, weights=weights, k=1)[0]
        scenario.simulate(interval, requested, index)

    manifest = _emit_manifest(scenario, params)
    records = _emit_records(scenario, params, rng)
    questions = _build_questions(scenario, params, rng)
    return manifest, records, questions
