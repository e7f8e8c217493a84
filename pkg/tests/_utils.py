import re
import threading
import time
from collections import Counter
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from edsynth import BackendUnavailable
from edsynth import Dataset
from edsynth import EventMention
from edsynth import LlmRequest
from edsynth import Origin
from edsynth import SyntheticInstance

# Trigger vocabulary of the toy ontology, in the order the scripted Scout picks them.
WORLD: Dict[str, Tuple[str, ...]] = {
    "Attack": ("shooting", "bombing", "raid", "war", "strike"),
    "Arrest-Jail": ("arrested", "detained", "jailed", "custody"),
    "Infect": ("positive", "infected", "contracted", "infection"),
}

FILLERS = ("", " Later, police arrested a witness.", " Several guards were infected.")

_TRIGGER_LINE = re.compile(r'^Trigger word: "(.*)"$', re.M)
_SAMPLE_LINE = re.compile(r"^Sample id: (\d+)$", re.M)
_PASSAGE_LINE = re.compile(r"^Passage: (.*)$", re.M)
_SENTENCE_LINE = re.compile(r"^Sentence: (.*)$", re.M)
_EVENT_LINE = re.compile(r"^Event type: (.*)$", re.M)


def words_in(text: str, event: str) -> List[str]:
    return [w for w in WORLD[event] if re.search(rf"\b{w}\b", text, re.I)]


def expected_counts(sentences: Iterable[str]) -> Dict[str, Counter]:
    """Brute-force trigger counts: the first vocabulary word of each event per sentence."""
    counts: Dict[str, Counter] = {event: Counter() for event in WORLD}
    for text in sentences:
        for event in WORLD:
            found = words_in(text, event)
            if found:
                counts[event][found[0]] += 1
    return {event: c for event, c in counts.items() if c}


def narrator_passage(triggers: Sequence[str], sample_id: int) -> str:
    body = " and the ".join(triggers)
    return f"Officials said the {body} shocked the town.{FILLERS[sample_id % 3]}"


class ScriptedBackend:
    """Answers every stage prompt from WORLD, like a perfectly consistent LLM.

    ``fail`` marks requests that should fail; ``delay`` makes requests sleep.
    """

    def __init__(
        self,
        fail: Callable[[LlmRequest], bool] = lambda request: False,
        delay: Callable[[LlmRequest], float] = lambda request: 0.0,
        empty: Callable[[LlmRequest], bool] = lambda request: False,
    ) -> None:
        self.fail = fail
        self.delay = delay
        self.empty = empty
        self.tags: List[str] = []
        self.in_flight = 0
        self.peak_in_flight = 0
        self._lock = threading.Lock()

    def generate(self, request: LlmRequest) -> str:
        with self._lock:
            self.tags.append(request.tag)
            self.in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self.in_flight)
        try:
            time.sleep(self.delay(request))
            if self.fail(request):
                raise BackendUnavailable(f"scripted failure for {request.tag}")
            if self.empty(request):
                return "   "
            return self._answer(request.user)
        finally:
            with self._lock:
                self.in_flight -= 1

    def _answer(self, user: str) -> str:
        triggers = _TRIGGER_LINE.findall(user)
        if triggers:
            sample = _SAMPLE_LINE.search(user)
            return f'"{narrator_passage(triggers, int(sample.group(1)) if sample else 0)}"'
        passage = _PASSAGE_LINE.search(user)
        if passage:
            lines = [
                f"{event} | {words_in(passage.group(1), event)[0]}"
                for event in WORLD
                if words_in(passage.group(1), event)
            ]
            return "\n".join(lines + ["Celebration | town"])
        sentence = _SENTENCE_LINE.search(user)
        event = _EVENT_LINE.search(user)
        if event and sentence:
            found = words_in(sentence.group(1), event.group(1))
            return f'"{found[0]}"' if found else "none"
        if event:
            return ", ".join(WORLD[event.group(1)])
        if sentence:
            text = sentence.group(1)
            names = [name for name in WORLD if words_in(text, name)]
            if "outbreak" in text:
                names.append("PandemicOutbreak")
            return ", ".join(names) if names else "None"
        raise AssertionError(f"unexpected prompt: {user[:80]!r}")


def make_instance(
    instance_id: str,
    text: str,
    mentions: Sequence[Tuple[str, str]],
    origin: Origin = Origin.GOLD,
) -> SyntheticInstance:
    """Instance whose mentions are anchored at the first occurrence of each trigger."""
    built = []
    for event_type, trigger in mentions:
        start = text.index(trigger)
        built.append(EventMention(event_type, trigger, start, start + len(trigger), origin))
    return SyntheticInstance.build(instance_id, text, built)


GOLD_ROWS = [
    ("g1", "Gunmen opened fire in a shooting at the mall.", [("Attack", "shooting")]),
    ("g2", "Some 3,000 people have been arrested in the campaigns.", [("Arrest-Jail", "arrested")]),
    ("g3", "The pilot tested positive for the flu.", [("Infect", "positive")]),
    ("g4", "Soldiers were detained after the ambush attack.", [("Arrest-Jail", "detained"), ("Attack", "ambush")]),
    ("g5", "A farmer was infected by the herd.", [("Infect", "infected")]),
    ("g6", "The bombing killed six.", [("Attack", "bombing")]),
]


def gold_dataset(ontology_digest: str = "") -> Dataset:
    return Dataset(
        instances=tuple(make_instance(i, text, m) for i, text, m in GOLD_ROWS),
        ontology_digest=ontology_digest,
    )


def random_dataset(
    rng: np.random.Generator,
    ids: Sequence[str],
    events: Sequence[str] = tuple(WORLD),
    max_mentions: int = 3,
    one_per_type: bool = False,
) -> Dataset:
    """Small random dataset over a fixed 40-character passage per id."""
    passage = "abcd efgh ijkl mnop qrst uvwx yzab cdef"
    spans = [(m.start(), m.end()) for m in re.finditer(r"\w+", passage)]
    instances = []
    for instance_id in ids:
        mentions = {}
        for _ in range(int(rng.integers(0, max_mentions + 1))):
            event = events[int(rng.integers(len(events)))]
            if one_per_type and any(key[2] == event for key in mentions):
                continue
            start, end = spans[int(rng.integers(len(spans)))]
            mentions[(start, end, event)] = EventMention(
                event, passage[start:end], start, end, Origin.SAMPLED
            )
        instances.append(SyntheticInstance.build(instance_id, passage, mentions.values()))
    return Dataset(instances=tuple(instances))


def units(dataset: Dataset, tri_c: bool) -> set:
    return {
        (i.id, m.start, m.end, m.event_type) if tri_c else (i.id, m.event_type)
        for i in dataset.instances
        for m in i.mentions
    }


def f1_oracle(pred: set, gold: set) -> float:
    matched = len(pred & gold)
    p = matched / len(pred) if pred else 0.0
    r = matched / len(gold) if gold else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def no_sleep(seconds: float) -> None:
    return None
