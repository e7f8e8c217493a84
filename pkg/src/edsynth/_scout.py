"""Mine domain-specific trigger lexicons from unlabeled text.

Each sentence goes through two prompts: the first names the event types the
sentence mentions, the second asks for the trigger of each named type.
Triggers are then counted over the whole corpus and the most frequent ``t``
per event type are kept.
"""

import logging
import re
import string
import zlib
from dataclasses import dataclass
from dataclasses import field
from datetime import datetime
from datetime import timezone
from enum import Enum
from pathlib import Path
from typing import Any
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
import pandera as pa

from ._corpus import Corpus
from ._corpus import UnlabeledSentence
from ._dataset import Dataset
from ._dataset import EventMention
from ._dataset import Origin
from ._dataset import SyntheticInstance
from ._dataset import normalize_trigger
from ._errors import InvalidStrategyParam
from ._errors import ParseError
from ._gateway import Gateway
from ._gateway import LlmExchange
from ._gateway import LlmRequest
from ._io import read_json
from ._io import write_json
from ._ontology import EventType
from ._ontology import Ontology
from ._prompts import TemplateSet
from ._prompts import format_event_list
from ._report import RunReport


logger = logging.getLogger(__name__)

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")
_TRIM = string.whitespace + "\"'`“”‘’«».,;:!?*()[]"
_NONE_ANSWERS = {"none", "none of the above", "n/a", "no event", "no events", "nothing"}

EXTRACTION_SCHEMA = pa.DataFrameSchema(
    {
        "event_type": pa.Column(str, pa.Check.str_length(min_value=1)),
        "surface": pa.Column(str, pa.Check(lambda s: s.str.strip().str.len() > 0)),
    },
    strict=True,
)


class Strategy(str, Enum):
    FREQUENCY_RANKING = "frequency_ranking"
    UNIFORM_SAMPLING = "uniform_sampling"
    WEIGHTED_SAMPLING = "weighted_sampling"
    MIN_COUNT = "min_count"


@dataclass(frozen=True)
class SentenceExtraction:
    sentence_id: str
    mentions: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class TriggerStat:
    event_type: str
    trigger_key: str
    count: int
    variants: Mapping[str, int] = field(default_factory=dict)

    def rank_key(self) -> Tuple[int, str]:
        return -self.count, self.trigger_key


@dataclass(frozen=True)
class TriggerLexicon:
    per_event: Mapping[str, Tuple[TriggerStat, ...]]
    t: int
    strategy: str = Strategy.FREQUENCY_RANKING.value
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def triggers(self, event_type: str) -> List[str]:
        return [stat.trigger_key for stat in self.per_event.get(event_type, ())]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "strategy": self.strategy,
            "provenance": dict(self.provenance),
            "events": {
                event: [
                    {
                        "trigger": stat.trigger_key,
                        "count": stat.count,
                        "variants": dict(stat.variants),
                    }
                    for stat in stats
                ]
                for event, stats in self.per_event.items()
            },
        }


StatsMap = Mapping[str, Sequence[TriggerStat]]


def write_lexicon(lexicon: TriggerLexicon, path: Union[str, Path]) -> None:
    write_json(path, lexicon.to_dict())


def read_lexicon(path: Union[str, Path]) -> TriggerLexicon:
    document = read_json(path)
    try:
        per_event = {
            event: tuple(
                TriggerStat(
                    event_type=event,
                    trigger_key=str(entry["trigger"]),
                    count=int(entry["count"]),
                    variants={str(k): int(v) for k, v in entry.get("variants", {}).items()},
                )
                for entry in entries
            )
            for event, entries in document["events"].items()
        }
        return TriggerLexicon(
            per_event=per_event,
            t=int(document["t"]),
            strategy=str(document.get("strategy", Strategy.FREQUENCY_RANKING.value)),
            provenance=dict(document.get("provenance", {})),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"malformed lexicon ({exc!r})", path) from exc


def _ranked(stats: Sequence[TriggerStat]) -> Tuple[TriggerStat, ...]:
    return tuple(sorted(stats, key=TriggerStat.rank_key))


def aggregate(extractions: Sequence[SentenceExtraction]) -> Dict[str, Tuple[TriggerStat, ...]]:
    """Count normalized triggers per event type over the whole corpus.

    The result does not depend on the order of ``extractions``: events are
    sorted by name and each list by (count descending, trigger ascending).
    """
    rows = [(event, surface) for ex in extractions for event, surface in ex.mentions]
    if not rows:
        return {}
    frame = EXTRACTION_SCHEMA.validate(pd.DataFrame(rows, columns=["event_type", "surface"]))
    frame["trigger_key"] = frame["surface"].map(normalize_trigger)
    counts = frame.groupby(["event_type", "trigger_key", "surface"], sort=True).size()
    stats: Dict[str, List[TriggerStat]] = {}
    for (event, key), group in counts.groupby(level=["event_type", "trigger_key"], sort=True):
        variants = {surface: int(n) for (_, _, surface), n in group.items()}
        stats.setdefault(event, []).append(
            TriggerStat(event, key, sum(variants.values()), dict(sorted(variants.items())))
        )
    return {event: _ranked(stats[event]) for event in sorted(stats)}


def filter_top_t(
    stats: StatsMap, t: int, provenance: Optional[Mapping[str, Any]] = None
) -> TriggerLexicon:
    """Keep the ``t`` most frequent triggers per event (ties: trigger ascending)."""
    if t < 1:
        raise InvalidStrategyParam(f"t must be at least 1, got {t}")
    return TriggerLexicon(
        per_event={event: _ranked(items)[:t] for event, items in sorted(stats.items())},
        t=t,
        strategy=Strategy.FREQUENCY_RANKING.value,
        provenance=dict(provenance or {}),
    )


def _event_rng(seed: int, event: str) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFF, zlib.crc32(event.encode("utf-8"))])


def select_triggers(
    stats: StatsMap,
    strategy: Union[str, Strategy],
    t: int,
    seed: int = 0,
    *,
    min_count: Optional[int] = None,
    provenance: Optional[Mapping[str, Any]] = None,
) -> TriggerLexicon:
    """Choose ``t`` triggers per event with a pluggable strategy.

    ``frequency_ranking`` is :func:`filter_top_t`. ``uniform_sampling`` and
    ``weighted_sampling`` draw ``t`` distinct triggers without replacement,
    the latter with probability proportional to count. ``min_count`` drops
    triggers seen fewer than ``min_count`` times, then samples uniformly.
    Sampling is seeded per event, so results do not depend on dict order.
    """
    try:
        strategy = Strategy(strategy)
    except ValueError:
        raise InvalidStrategyParam(f"unknown trigger-selection strategy {strategy!r}") from None
    if t < 1:
        raise InvalidStrategyParam(f"t must be at least 1, got {t}")
    if strategy == Strategy.FREQUENCY_RANKING:
        return filter_top_t(stats, t, provenance)
    if strategy == Strategy.MIN_COUNT:
        if min_count is None or min_count < 1:
            raise InvalidStrategyParam(f"min_count strategy needs m >= 1, got {min_count}")
    per_event = {}
    for event, items in sorted(stats.items()):
        candidates = sorted(items, key=lambda stat: stat.trigger_key)
        if strategy == Strategy.MIN_COUNT:
            candidates = [stat for stat in candidates if stat.count >= min_count]
        size = min(t, len(candidates))
        if size == 0:
            per_event[event] = ()
            continue
        rng = _event_rng(seed, event)
        weights = None
        if strategy == Strategy.WEIGHTED_SAMPLING:
            counts = np.array([stat.count for stat in candidates], dtype=float)
            weights = counts / counts.sum()
        picked = rng.choice(len(candidates), size=size, replace=False, p=weights)
        per_event[event] = _ranked([candidates[i] for i in picked])
    label = strategy.value
    if strategy == Strategy.MIN_COUNT:
        label = f"{label}({min_count})"
    return TriggerLexicon(per_event=per_event, t=t, strategy=label, provenance=dict(provenance or {}))


def _clean_item(raw: str) -> str:
    return _LIST_MARKER.sub("", raw).strip(_TRIM)


def split_answer_list(text: str) -> List[str]:
    """Split a comma- or newline-separated LLM answer into cleaned items."""
    items = []
    for part in re.split(r"[,\n;]", text):
        item = _clean_item(part)
        if item:
            items.append(item)
    return items


def _timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


class Scout:
    """Runs the extraction prompts against one gateway."""

    def __init__(
        self,
        gateway: Gateway,
        ontology: Ontology,
        templates: TemplateSet,
        *,
        report: Optional[RunReport] = None,
    ) -> None:
        self.gateway = gateway
        self.ontology = ontology
        self.templates = templates
        self.report = report if report is not None else RunReport()
        self._event_list = format_event_list(
            {event.name: event.definition for event in ontology.events}
        )

    def _stage1_request(self, sentence: UnlabeledSentence) -> LlmRequest:
        system, user = self.templates["scout_stage1"].render(
            event_list=self._event_list, sentence=sentence.text
        )
        return self.gateway.request(system, user, f"scout.stage1:{sentence.id}")

    def _stage2_request(self, sentence: UnlabeledSentence, event: EventType) -> LlmRequest:
        system, user = self.templates["scout_stage2"].render(
            event_name=event.name, event_definition=event.definition, sentence=sentence.text
        )
        return self.gateway.request(system, user, f"scout.stage2:{sentence.id}:{event.name}")

    def parse_stage1(self, text: str, sentence_id: str = "") -> List[EventType]:
        resolved: List[EventType] = []
        if text.strip().strip(_TRIM).lower() in _NONE_ANSWERS:
            return resolved
        for item in split_answer_list(text):
            if item.lower() in _NONE_ANSWERS:
                continue
            event = self.ontology.resolve(item)
            if event is None:
                self.report.incr("stage1_dropped_names")
                logger.warning("%s: dropping unknown event type %r", sentence_id, item)
                continue
            if event not in resolved:
                resolved.append(event)
        return resolved

    def parse_stage2(self, text: str, sentence: UnlabeledSentence) -> Optional[str]:
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            return None
        candidate = _clean_item(lines[0])
        candidate = re.sub(r"^trigger\s*(?:word)?\s*[:=-]\s*", "", candidate, flags=re.I)
        candidate = candidate.strip(_TRIM)
        if not candidate:
            return None
        match = re.search(re.escape(candidate), sentence.text, re.IGNORECASE)
        if match is None:
            self.report.incr("stage2_rejected")
            logger.debug("%s: trigger %r not in sentence", sentence.id, candidate)
            return None
        return sentence.text[match.start() : match.end()]

    def stage1_identify(self, sentence: UnlabeledSentence) -> List[EventType]:
        exchange = self.gateway.complete(self._stage1_request(sentence))
        return self.parse_stage1(exchange.response_text, sentence.id)

    def stage2_extract(self, sentence: UnlabeledSentence, event: EventType) -> Optional[str]:
        exchange = self.gateway.complete(self._stage2_request(sentence, event))
        return self.parse_stage2(exchange.response_text, sentence)

    def extract_corpus(self, corpus: Corpus) -> List[SentenceExtraction]:
        """Run both stages over a corpus; one extraction per sentence, in corpus order."""
        sentences = list(corpus.sentences)
        stage1 = self.gateway.complete_batch([self._stage1_request(s) for s in sentences])
        pairs: List[Tuple[int, EventType]] = []
        for index, (sentence, result) in enumerate(zip(sentences, stage1)):
            if not isinstance(result, LlmExchange):
                self.report.incr("stage1_errors")
                continue
            for event in self.parse_stage1(result.response_text, sentence.id):
                pairs.append((index, event))
        stage2 = self.gateway.complete_batch(
            [self._stage2_request(sentences[i], event) for i, event in pairs]
        )
        found: Dict[int, List[Tuple[str, str]]] = {}
        for (index, event), result in zip(pairs, stage2):
            if not isinstance(result, LlmExchange):
                self.report.incr("stage2_errors")
                continue
            trigger = self.parse_stage2(result.response_text, sentences[index])
            if trigger is not None:
                found.setdefault(index, []).append((event.name, trigger))
        extractions = [
            SentenceExtraction(sentence.id, tuple(found.get(index, [])))
            for index, sentence in enumerate(sentences)
        ]
        self.report.incr("sentences", len(sentences))
        self.report.incr("extracted_mentions", sum(len(ex.mentions) for ex in extractions))
        logger.info(
            "scout: %d sentences, %d stage-2 calls, %d mentions",
            len(sentences),
            len(pairs),
            self.report["extracted_mentions"],
        )
        return extractions

    def build_lexicon(
        self,
        corpus: Corpus,
        t: int,
        strategy: Union[str, Strategy] = Strategy.FREQUENCY_RANKING,
        seed: int = 0,
        *,
        min_count: Optional[int] = None,
    ) -> TriggerLexicon:
        provenance = {
            "source": "corpus",
            "corpus_digest": corpus.digest(),
            "model": self.gateway.config.model,
            "timestamp": _timestamp(),
        }
        stats = aggregate(self.extract_corpus(corpus))
        lexicon = select_triggers(stats, strategy, t, seed, min_count=min_count, provenance=provenance)
        for event in self.ontology.names:
            if not lexicon.per_event.get(event):
                logger.warning("scout found no trigger for %s", event)
        return lexicon

    def generate_triggers_internal(self, t: int) -> TriggerLexicon:
        """Ask the LLM for ``t`` typical triggers per event, with no corpus evidence."""
        if t < 1:
            raise InvalidStrategyParam(f"t must be at least 1, got {t}")
        requests = []
        for event in self.ontology.events:
            system, user = self.templates["scout_internal"].render(
                event_name=event.name, event_definition=event.definition, t=t
            )
            requests.append(self.gateway.request(system, user, f"scout.internal:{event.name}"))
        per_event: Dict[str, Tuple[TriggerStat, ...]] = {}
        for event, result in zip(self.ontology.events, self.gateway.complete_batch(requests)):
            keys: Dict[str, str] = {}
            if isinstance(result, LlmExchange):
                for item in split_answer_list(result.response_text):
                    keys.setdefault(normalize_trigger(item), item)
            else:
                self.report.incr("internal_errors")
            if not keys:
                logger.warning("no triggers generated for %s", event.name)
            chosen = list(keys.items())[:t]
            per_event[event.name] = _ranked(
                [TriggerStat(event.name, key, 1, {surface: 1}) for key, surface in chosen]
            )
        return TriggerLexicon(
            per_event=per_event,
            t=t,
            strategy="llm-internal",
            provenance={
                "source": "llm-internal",
                "model": self.gateway.config.model,
                "timestamp": _timestamp(),
            },
        )

    def label_sentences(self, corpus: Corpus) -> Dataset:
        """Weak supervision: annotate each corpus sentence with its extracted mentions."""
        instances = []
        for sentence, extraction in zip(corpus.sentences, self.extract_corpus(corpus)):
            mentions = []
            for event_type, trigger in extraction.mentions:
                match = re.search(re.escape(trigger), sentence.text, re.IGNORECASE)
                if match is None:
                    self.report.incr("label_span_not_found")
                    logger.warning("%s: trigger %r has no span", sentence.id, trigger)
                    continue
                mentions.append(
                    EventMention(
                        event_type,
                        sentence.text[match.start() : match.end()],
                        match.start(),
                        match.end(),
                        Origin.WEAK,
                    )
                )
            instances.append(SyntheticInstance.build(sentence.id, sentence.text, mentions))
        self.report.incr("labeled_instances", len(instances))
        self.report.incr("negative_instances", sum(1 for i in instances if not i.mentions))
        return Dataset(
            instances=tuple(instances),
            ontology_digest=self.ontology.digest(),
            metadata={"model": self.gateway.config.model, "seed": self.gateway.config.seed},
        )


