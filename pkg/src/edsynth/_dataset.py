"""Annotated instances, the dataset file format and the N-per-event sampler."""

import logging
from collections import Counter
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import Enum
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Iterable
from typing import Iterator
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Set
from typing import Tuple
from typing import Union

import pandas as pd
import pandera as pa

from ._errors import DuplicateIdError
from ._errors import ParseError
from ._errors import ValidationError
from ._io import iter_jsonl
from ._io import write_jsonl
from ._ontology import Ontology


logger = logging.getLogger(__name__)

META_KEY = "_meta"
DIGESTS_KEY = "prompt_digests"
GOLD_PREFIX = "gold-"


def normalize_trigger(surface: str) -> str:
    """Lowercase and collapse internal whitespace."""
    return " ".join(surface.lower().split())


class Origin(str, Enum):
    SAMPLED = "sampled"
    REFINED = "refined"
    GOLD = "gold"
    WEAK = "weak"


@dataclass(frozen=True)
class EventMention:
    event_type: str
    trigger: str
    start: int
    end: int
    origin: Origin = Origin.SAMPLED

    @property
    def span(self) -> Tuple[int, int]:
        return self.start, self.end

    def sort_key(self) -> Tuple[int, str, int]:
        return self.start, self.event_type, self.end

    def to_row(self) -> Dict[str, Any]:
        return {
            "type": self.event_type,
            "trigger": self.trigger,
            "start": self.start,
            "end": self.end,
            "origin": self.origin.value,
        }


@dataclass(frozen=True)
class SyntheticInstance:
    id: str
    passage: str
    mentions: Tuple[EventMention, ...] = ()
    metadata: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def build(
        cls,
        id: str,
        passage: str,
        mentions: Iterable[EventMention],
        metadata: Optional[Mapping[str, Any]] = None,
    ) -> "SyntheticInstance":
        ordered = tuple(sorted(mentions, key=EventMention.sort_key))
        return cls(id=id, passage=passage, mentions=ordered, metadata=dict(metadata or {}))

    @property
    def event_types(self) -> List[str]:
        """Distinct event types in first-mention order."""
        return list(dict.fromkeys(m.event_type for m in self.mentions))

    def with_mentions(self, mentions: Iterable[EventMention]) -> "SyntheticInstance":
        return replace(self, mentions=tuple(sorted(mentions, key=EventMention.sort_key)))

    def to_row(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "text": self.passage,
            "mentions": [m.to_row() for m in self.mentions],
        }


def validate_instance(instance: SyntheticInstance, ontology: Optional[Ontology] = None) -> None:
    """Check the span and uniqueness invariants of one instance.

    Raises:
        ValidationError: Naming the instance id and the offending mention.
    """
    seen: Set[Tuple[int, int, str]] = set()
    length = len(instance.passage)
    for mention in instance.mentions:
        where = f"instance {instance.id!r}, mention {mention.to_row()}"
        if not 0 <= mention.start < mention.end <= length:
            raise ValidationError(f"{where}: span out of range for text of length {length}")
        if instance.passage[mention.start : mention.end] != mention.trigger:
            raise ValidationError(
                f"{where}: text at span is "
                f"{instance.passage[mention.start:mention.end]!r}, not the trigger"
            )
        if ontology is not None and ontology.resolve(mention.event_type) is None:
            raise ValidationError(f"{where}: unknown event type {mention.event_type!r}")
        key = (mention.start, mention.end, mention.event_type)
        if key in seen:
            raise ValidationError(f"{where}: duplicate mention")
        seen.add(key)
    if list(instance.mentions) != sorted(instance.mentions, key=EventMention.sort_key):
        raise ValidationError(f"instance {instance.id!r}: mentions are not sorted")


MENTION_SCHEMA = pa.DataFrameSchema(
    {
        "instance_id": pa.Column(str),
        "event_type": pa.Column(str),
        "trigger": pa.Column(str, pa.Check.str_length(min_value=1)),
        "start": pa.Column(int, pa.Check.ge(0)),
        "end": pa.Column(int, pa.Check.gt(0)),
        "origin": pa.Column(str, pa.Check.isin([o.value for o in Origin])),
    },
    checks=pa.Check(lambda df: df["end"] > df["start"], error="end must exceed start"),
    strict=True,
    ordered=True,
)

MENTION_COLUMNS = ["instance_id", "event_type", "trigger", "start", "end", "origin"]


@dataclass(frozen=True)
class Dataset:
    instances: Tuple[SyntheticInstance, ...] = ()
    ontology_digest: str = ""
    metadata: Mapping[str, Any] = field(default_factory=dict)
    sample_stats: Mapping[str, Mapping[str, int]] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        seen: Set[str] = set()
        for instance in self.instances:
            if instance.id in seen:
                raise DuplicateIdError(instance.id, "dataset")
            seen.add(instance.id)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[SyntheticInstance]:
        return iter(self.instances)

    @property
    def stats(self) -> Dict[str, int]:
        """Mention count per event type."""
        counts: Counter[str] = Counter(
            m.event_type for instance in self.instances for m in instance.mentions
        )
        return dict(sorted(counts.items()))

    def by_id(self) -> Dict[str, SyntheticInstance]:
        return {instance.id: instance for instance in self.instances}

    def mention_frame(self) -> pd.DataFrame:
        """One row per mention, validated against :data:`MENTION_SCHEMA`."""
        rows = [
            (instance.id, m.event_type, m.trigger, m.start, m.end, m.origin.value)
            for instance in self.instances
            for m in instance.mentions
        ]
        frame = pd.DataFrame(rows, columns=MENTION_COLUMNS)
        frame = frame.astype(
            {
                "instance_id": str,
                "event_type": str,
                "trigger": str,
                "start": "int64",
                "end": "int64",
                "origin": str,
            }
        )
        return MENTION_SCHEMA.validate(frame)


def greedy_sample(
    pool: Sequence[SyntheticInstance], ontology: Ontology, n: int
) -> Dataset:
    """Pick instances until every event type has ``n`` selected instances.

    Each round takes the event with the largest remaining deficit (ties in
    ontology order) and selects, among unselected instances mentioning it, the
    one covering the most events that still have a deficit (ties: earliest in
    the pool). A selected instance counts for every distinct event it mentions.
    The loop ends when all deficits are zero or no unselected instance can
    reduce any remaining deficit.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    names = ontology.names
    selected_count = {name: 0 for name in names}
    instance_events: List[List[str]] = []
    candidates: Dict[str, List[int]] = {name: [] for name in names}
    for index, instance in enumerate(pool):
        events = []
        for raw in instance.event_types:
            event = ontology.resolve(raw)
            if event is not None and event.name not in events:
                events.append(event.name)
                candidates[event.name].append(index)
        instance_events.append(events)

    def deficit(name: str) -> int:
        return n - selected_count[name]

    selected: List[int] = []
    taken: Set[int] = set()
    while True:
        open_events = sorted(
            (name for name in names if deficit(name) > 0),
            key=lambda name: (-deficit(name), ontology.position(name)),
        )
        choice = None
        for name in open_events:
            best_score = 0
            for index in candidates[name]:
                if index in taken:
                    continue
                score = sum(1 for e in instance_events[index] if deficit(e) > 0)
                if score > best_score:
                    choice, best_score = index, score
            if choice is not None:
                break
        if choice is None:
            break
        taken.add(choice)
        selected.append(choice)
        for name in instance_events[choice]:
            selected_count[name] += 1

    stats = {
        name: {
            "selected": selected_count[name],
            "target": n,
            "shortfall": max(0, deficit(name)),
        }
        for name in names
    }
    short = [name for name in names if stats[name]["shortfall"]]
    if short:
        logger.warning("events below quota %d: %s", n, ", ".join(short))
    return Dataset(
        instances=tuple(pool[i] for i in selected),
        ontology_digest=ontology.digest(),
        sample_stats=stats,
    )


def append_gold(
    dataset: Dataset, gold: Iterable[SyntheticInstance], ontology: Ontology
) -> Dataset:
    """Append gold instances after the synthetic ones, ids prefixed ``gold-``.

    Raises:
        ValidationError: A gold mention uses an event type outside the ontology.
    """
    appended = []
    for instance in gold:
        mentions = []
        for mention in instance.mentions:
            event = ontology.resolve(mention.event_type)
            if event is None:
                raise ValidationError(
                    f"gold instance {instance.id!r}: unknown event type {mention.event_type!r}"
                )
            mentions.append(replace(mention, event_type=event.name, origin=Origin.GOLD))
        appended.append(
            SyntheticInstance.build(
                GOLD_PREFIX + instance.id, instance.passage, mentions, instance.metadata
            )
        )
    for instance in appended:
        validate_instance(instance, ontology)
    return replace(dataset, instances=dataset.instances + tuple(appended))


def write_dataset(dataset: Dataset, path: Union[str, Path]) -> int:
    """Write the metadata row followed by one row per instance.

    Per-instance prompt digests go into the metadata row, keyed by instance id,
    so instance rows stay in the plain ED format.
    """
    meta: Dict[str, Any] = {"ontology_digest": dataset.ontology_digest}
    for key in ("model", "seed", "pipeline_version"):
        if key in dataset.metadata:
            meta[key] = dataset.metadata[key]
    digests = {
        instance.id: list(instance.metadata[DIGESTS_KEY])
        for instance in dataset.instances
        if instance.metadata.get(DIGESTS_KEY)
    }
    if digests:
        meta[DIGESTS_KEY] = digests
    rows = [{META_KEY: meta}] + [instance.to_row() for instance in dataset.instances]
    return write_jsonl(path, rows) - 1


def _parse_mention(
    raw: Any, path: Path, line: int, ontology: Optional[Ontology]
) -> EventMention:
    if not isinstance(raw, dict):
        raise ParseError("mention must be an object", path, line)
    try:
        event_type = str(raw["type"])
        trigger = str(raw["trigger"])
        start, end = raw["start"], raw["end"]
        origin = Origin(raw.get("origin", Origin.GOLD.value))
    except KeyError as exc:
        raise ParseError(f"mention lacks field {exc.args[0]!r}", path, line) from exc
    except ValueError as exc:
        raise ParseError(f"bad mention origin {raw.get('origin')!r}", path, line) from exc
    if not isinstance(start, int) or not isinstance(end, int):
        raise ParseError("mention offsets must be integers", path, line)
    if ontology is not None:
        event = ontology.resolve(event_type)
        if event is not None:
            event_type = event.name
    return EventMention(event_type, trigger, start, end, origin)


def read_dataset(path: Union[str, Path], ontology: Optional[Ontology] = None) -> Dataset:
    """Read a dataset file and revalidate every instance.

    Raises:
        ParseError: A row is malformed.
        ValidationError: A mention violates the span invariants, or ids repeat.
    """
    path = Path(path)
    meta: Dict[str, Any] = {}
    instances: List[SyntheticInstance] = []
    seen: Set[str] = set()
    for line, row in iter_jsonl(path):
        if META_KEY in row:
            meta = dict(row[META_KEY])
            continue
        if not isinstance(row.get("id"), str) or not isinstance(row.get("text"), str):
            raise ParseError("row needs string 'id' and 'text'", path, line)
        raw_mentions = row.get("mentions", [])
        if not isinstance(raw_mentions, list):
            raise ParseError("'mentions' must be a list", path, line)
        instance = SyntheticInstance.build(
            row["id"],
            row["text"],
            [_parse_mention(m, path, line, ontology) for m in raw_mentions],
        )
        if instance.id in seen:
            raise ValidationError(f"{path}:{line}: duplicate instance id {instance.id!r}")
        seen.add(instance.id)
        validate_instance(instance, ontology)
        instances.append(instance)
    digests = meta.pop(DIGESTS_KEY, {})
    if not isinstance(digests, dict) or not all(
        isinstance(v, list) and all(isinstance(d, str) for d in v) for v in digests.values()
    ):
        raise ParseError(f"'{DIGESTS_KEY}' must map instance ids to lists of digests", path)
    unknown = sorted(set(digests) - seen)
    if unknown:
        raise ParseError(f"'{DIGESTS_KEY}' names unknown instance ids: {unknown}", path)
    instances = [
        replace(instance, metadata={DIGESTS_KEY: list(digests[instance.id])})
        if instance.id in digests
        else instance
        for instance in instances
    ]
    digest = str(meta.pop("ontology_digest", ""))
    return Dataset(instances=tuple(instances), ontology_digest=digest, metadata=meta)
