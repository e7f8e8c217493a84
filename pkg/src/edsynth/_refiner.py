"""Turn drafts into annotated instances and add the mentions the Narrator missed."""

import logging
import re
import string
from dataclasses import dataclass
from dataclasses import replace
from typing import Iterator
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Set
from typing import Tuple
from typing import Union

from ._dataset import EventMention
from ._dataset import Origin
from ._dataset import SyntheticInstance
from ._errors import EdsynthError
from ._gateway import Gateway
from ._gateway import LlmExchange
from ._gateway import LlmRequest
from ._narrator import DraftInstance
from ._ontology import Ontology
from ._prompts import TemplateSet
from ._prompts import format_event_list
from ._report import RunReport


logger = logging.getLogger(__name__)

DEFAULT_SUFFIXES: Tuple[str, ...] = ("s", "es", "ed", "d", "ing", "ion", "ions")

_WORD = re.compile(r"[^\W_]+")
_QUOTES = "\"'`“”‘’«»*"
_SEPARATORS = ("|", "\t", "->", "→", ":")
_NONE_ANSWERS = {"none", "none of the above", "n/a", "no events", "no event"}


@dataclass(frozen=True)
class Anchor:
    surface: str
    start: int
    end: int
    tier: int


@dataclass(frozen=True)
class Rejected:
    draft_id: str
    reason: str
    missing: Tuple[str, ...]


def _is_boundary(text: str, start: int, end: int) -> bool:
    before = text[start - 1] if start > 0 else ""
    after = text[end] if end < len(text) else ""
    return not before.isalnum() and not after.isalnum()


def _whole_word_matches(
    passage: str, trigger: str, flags: int = 0
) -> Iterator[Tuple[int, int]]:
    pattern = re.compile(f"(?=({re.escape(trigger)}))", flags)
    for match in pattern.finditer(passage):
        start, end = match.start(1), match.end(1)
        if end > start and _is_boundary(passage, start, end):
            yield start, end


def _stems(word: str, suffixes: Sequence[str]) -> Set[str]:
    word = word.lower()
    stems = {word}
    for suffix in suffixes:
        if word.endswith(suffix) and len(word) > len(suffix):
            stems.add(word[: -len(suffix)])
    return stems


def _variant_matches(
    passage: str, trigger: str, suffixes: Sequence[str]
) -> Iterator[Tuple[int, int]]:
    words = list(_WORD.finditer(trigger))
    if not words:
        return
    last = words[-1]
    prefix = trigger[: last.start()]
    if trigger[last.end() :].strip():
        return
    wanted = _stems(last.group(), suffixes)
    pattern = re.compile(f"(?=({re.escape(prefix)})([^\\W_]+))", re.IGNORECASE)
    for match in pattern.finditer(passage):
        start, end = match.start(1), match.end(2)
        if not _is_boundary(passage, start, end):
            continue
        if _stems(match.group(2), suffixes) & wanted:
            yield start, end


def anchor_trigger(
    passage: str, trigger: str, suffixes: Sequence[str] = DEFAULT_SUFFIXES
) -> Optional[Anchor]:
    """Locate a trigger in a passage.

    Tiers, first hit wins and the earliest position wins within a tier:
    exact whole-word match, case-insensitive whole-word match, then a
    whole-word match after stripping one suffix from both sides.
    Returns ``None`` when no tier matches.
    """
    trigger = trigger.strip()
    if not trigger:
        raise ValueError("trigger must be nonempty")
    tiers = (
        lambda: _whole_word_matches(passage, trigger),
        lambda: _whole_word_matches(passage, trigger, re.IGNORECASE),
        lambda: _variant_matches(passage, trigger, suffixes),
    )
    for tier, matches in enumerate(tiers, start=1):
        first = next(iter(matches()), None)
        if first is not None:
            start, end = first
            return Anchor(passage[start:end], start, end, tier)
    return None


def verify_and_anchor(
    draft: DraftInstance,
    ontology: Optional[Ontology] = None,
    *,
    metadata: Optional[Mapping[str, object]] = None,
    suffixes: Sequence[str] = DEFAULT_SUFFIXES,
) -> Union[SyntheticInstance, Rejected]:
    """Anchor every sampled trigger of a draft, or reject the draft.

    With an ontology, target event types are resolved to their canonical names
    first and a draft naming a type outside the ontology is rejected.
    """
    event_types = [target.event_type for target in draft.spec.targets]
    if ontology is not None:
        resolved = [ontology.resolve(name) for name in event_types]
        unknown = [name for name, event in zip(event_types, resolved) if event is None]
        if unknown:
            return Rejected(
                draft.id,
                "unknown event type(s): " + ", ".join(repr(name) for name in unknown),
                (),
            )
        event_types = [event.name for event in resolved if event is not None]
    mentions = []
    missing = []
    for event_type, target in zip(event_types, draft.spec.targets):
        anchor = anchor_trigger(draft.passage, target.trigger, suffixes)
        if anchor is None:
            missing.append(target.trigger)
            continue
        mentions.append(
            EventMention(event_type, anchor.surface, anchor.start, anchor.end, Origin.SAMPLED)
        )
    if missing:
        return Rejected(
            draft.id,
            "sampled trigger(s) not found in passage: " + ", ".join(repr(m) for m in missing),
            tuple(missing),
        )
    meta = dict(metadata or {})
    meta["prompt_digests"] = [draft.exchange_ref]
    return SyntheticInstance.build(draft.id, draft.passage, mentions, meta)


def parse_refiner_response(text: str) -> List[Tuple[str, str]]:
    """Read ``<event type> | <trigger>`` lines; other separators are tolerated."""
    pairs = []
    for line in text.splitlines():
        line = re.sub(r"^\s*(?:[-*•]|\d+[.)])\s*", "", line).strip()
        if not line or line.strip(" .").lower() in _NONE_ANSWERS:
            continue
        for separator in _SEPARATORS:
            if separator in line:
                if separator == ":":
                    raw_type, raw_trigger = line.rsplit(separator, 1)
                else:
                    raw_type, raw_trigger = line.split(separator, 1)
                break
        else:
            continue
        trigger = raw_trigger.strip(string.whitespace + _QUOTES + ".,;")
        if raw_type.strip() and trigger:
            pairs.append((raw_type.strip(), trigger))
    return pairs


class Refiner:
    """Adds mentions of event types that the sampled labels do not cover.

    Existing mentions are never modified or removed. A proposed mention is kept
    only when its event type is not present yet, resolves in the ontology and
    its trigger anchors in the passage; at most one mention is added per new
    event type.
    """

    def __init__(
        self,
        gateway: Gateway,
        ontology: Ontology,
        templates: TemplateSet,
        *,
        report: Optional[RunReport] = None,
        suffixes: Sequence[str] = DEFAULT_SUFFIXES,
    ) -> None:
        self.gateway = gateway
        self.ontology = ontology
        self.templates = templates
        self.report = report if report is not None else RunReport()
        self.suffixes = tuple(suffixes)
        self._event_list = format_event_list(
            {event.name: event.definition for event in ontology.events}
        )

    def _request(self, instance: SyntheticInstance) -> LlmRequest:
        system, user = self.templates["refiner"].render(
            event_list=self._event_list, passage=instance.passage
        )
        return self.gateway.request(system, user, f"refiner:{instance.id}")

    def merge(self, instance: SyntheticInstance, response_text: str) -> SyntheticInstance:
        present = {m.event_type for m in instance.mentions}
        existing = {(m.start, m.end, m.event_type) for m in instance.mentions}
        added = []
        for raw_type, trigger in parse_refiner_response(response_text):
            event = self.ontology.resolve(raw_type)
            if event is None:
                self.report.incr("refine_unknown_type")
                logger.debug("%s: dropping unknown event type %r", instance.id, raw_type)
                continue
            if event.name in present:
                self.report.incr("refine_already_present")
                continue
            anchor = anchor_trigger(instance.passage, trigger, self.suffixes)
            if anchor is None:
                self.report.incr("refine_unanchored")
                continue
            if (anchor.start, anchor.end, event.name) in existing:
                continue
            added.append(
                EventMention(event.name, anchor.surface, anchor.start, anchor.end, Origin.REFINED)
            )
            present.add(event.name)
            existing.add((anchor.start, anchor.end, event.name))
        if not added:
            return instance
        self.report.incr("refined_mentions", len(added))
        return instance.with_mentions(instance.mentions + tuple(added))

    def _apply(self, instance: SyntheticInstance, exchange: LlmExchange) -> SyntheticInstance:
        merged = self.merge(instance, exchange.response_text)
        meta = dict(merged.metadata)
        meta["prompt_digests"] = list(meta.get("prompt_digests", [])) + [exchange.prompt_digest]
        return replace(merged, metadata=meta)

    def refine(self, instance: SyntheticInstance) -> SyntheticInstance:
        try:
            exchange = self.gateway.complete(self._request(instance))
        except EdsynthError as exc:
            self.report.incr("refine_errors")
            logger.warning("%s: refinement failed, keeping sampled mentions: %s", instance.id, exc)
            return instance
        return self._apply(instance, exchange)

    def refine_batch(self, instances: Sequence[SyntheticInstance]) -> List[SyntheticInstance]:
        results = self.gateway.complete_batch([self._request(i) for i in instances])
        refined = []
        for instance, result in zip(instances, results):
            if isinstance(result, LlmExchange):
                refined.append(self._apply(instance, result))
            else:
                self.report.incr("refine_errors")
                refined.append(instance)
        return refined
