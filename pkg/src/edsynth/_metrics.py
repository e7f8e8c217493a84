"""Event-identification and trigger-classification scores, plus trigger hit rates."""

import logging
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Dict
from typing import List
from typing import Mapping
from typing import Set
from typing import Tuple

import pandas as pd

from ._dataset import Dataset
from ._dataset import normalize_trigger
from ._errors import AlignmentError


logger = logging.getLogger(__name__)

EVE_I_UNIT = ["instance_id", "event_type"]
TRI_C_SPAN_UNIT = ["instance_id", "start", "end", "event_type"]
TRI_C_STRING_UNIT = ["instance_id", "trigger_key", "event_type"]


@dataclass(frozen=True)
class MetricScores:
    precision: float
    recall: float
    f1: float
    num_pred: int
    num_gold: int
    num_matched: int

    @classmethod
    def from_counts(cls, num_pred: int, num_gold: int, num_matched: int) -> "MetricScores":
        precision = num_matched / num_pred if num_pred else 0.0
        recall = num_matched / num_gold if num_gold else 0.0
        total = precision + recall
        f1 = 2 * precision * recall / total if total else 0.0
        return cls(precision, recall, f1, num_pred, num_gold, num_matched)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "counts": {
                "num_pred": self.num_pred,
                "num_gold": self.num_gold,
                "num_matched": self.num_matched,
            },
        }


@dataclass(frozen=True)
class ScoreReport:
    eve_i: MetricScores
    tri_c: MetricScores
    per_event: Mapping[str, Mapping[str, MetricScores]] = field(default_factory=dict)
    string_match: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eve_i": self.eve_i.to_dict(),
            "tri_c": self.tri_c.to_dict(),
            "tri_c_matching": "string" if self.string_match else "span",
            "per_event": {
                event: {metric: scores.to_dict() for metric, scores in metrics.items()}
                for event, metrics in self.per_event.items()
            },
        }


def _units(dataset: Dataset, columns: List[str]) -> pd.DataFrame:
    frame = dataset.mention_frame()
    frame["trigger_key"] = frame["trigger"].map(normalize_trigger).astype(str)
    return frame[columns].drop_duplicates().reset_index(drop=True)


def _compare(
    pred: pd.DataFrame, gold: pd.DataFrame, columns: List[str]
) -> Tuple[MetricScores, Dict[str, MetricScores]]:
    matched = pred.merge(gold, on=columns, how="inner")
    overall = MetricScores.from_counts(len(pred), len(gold), len(matched))
    pred_counts = pred.groupby("event_type").size()
    gold_counts = gold.groupby("event_type").size()
    matched_counts = matched.groupby("event_type").size()
    events = sorted(set(pred_counts.index) | set(gold_counts.index))
    per_event = {
        event: MetricScores.from_counts(
            int(pred_counts.get(event, 0)),
            int(gold_counts.get(event, 0)),
            int(matched_counts.get(event, 0)),
        )
        for event in events
    }
    return overall, per_event


def score(pred: Dataset, gold: Dataset, *, string_match: bool = False) -> ScoreReport:
    """Micro-averaged Eve-I and Tri-C precision, recall and F1.

    An Eve-I unit is a distinct (instance, event type); a Tri-C unit is a
    distinct (instance, span, event type), or (instance, normalized trigger,
    event type) with ``string_match``. Gold instances absent from ``pred``
    count as instances with no predictions.

    Raises:
        AlignmentError: ``pred`` holds instance ids that ``gold`` lacks.
    """
    gold_ids = set(gold.by_id())
    unknown = sorted(i.id for i in pred.instances if i.id not in gold_ids)
    if unknown:
        shown = ", ".join(repr(i) for i in unknown[:5])
        raise AlignmentError(f"{len(unknown)} predicted instance(s) not in gold: {shown}")
    eve_i, eve_i_events = _compare(_units(pred, EVE_I_UNIT), _units(gold, EVE_I_UNIT), EVE_I_UNIT)
    tri_c_unit = TRI_C_STRING_UNIT if string_match else TRI_C_SPAN_UNIT
    tri_c, tri_c_events = _compare(_units(pred, tri_c_unit), _units(gold, tri_c_unit), tri_c_unit)
    per_event = {
        event: {"eve_i": eve_i_events[event], "tri_c": tri_c_events[event]}
        for event in sorted(eve_i_events)
    }
    logger.info("scored %d instances: Eve-I F1 %.4f, Tri-C F1 %.4f", len(pred), eve_i.f1, tri_c.f1)
    return ScoreReport(eve_i=eve_i, tri_c=tri_c, per_event=per_event, string_match=string_match)


@dataclass(frozen=True)
class EventHitRate:
    synthetic_trigger_count: int
    hits: int
    hit_rate: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "synthetic_trigger_count": self.synthetic_trigger_count,
            "hits": self.hits,
            "hit_rate": self.hit_rate,
        }


@dataclass(frozen=True)
class HitRateReport:
    per_event: Mapping[str, EventHitRate]
    macro_average: float
    micro_average: float
    weighted: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_event": {event: rate.to_dict() for event, rate in self.per_event.items()},
            "macro_average": self.macro_average,
            "micro_average": self.micro_average,
            "weighted": self.weighted,
        }


def extract_gold_triggers(gold: Dataset) -> Dict[str, Set[str]]:
    triggers: Dict[str, Set[str]] = {}
    for instance in gold.instances:
        for mention in instance.mentions:
            triggers.setdefault(mention.event_type, set()).add(normalize_trigger(mention.trigger))
    return dict(sorted(triggers.items()))


def hit_rate(
    synthetic: Dataset, gold_triggers: Mapping[str, Set[str]], *, weighted: bool = False
) -> HitRateReport:
    """Share of synthetic triggers that also occur among the gold triggers.

    By default each event's distinct normalized triggers are counted once;
    ``weighted`` counts every mention instead. Events without synthetic
    triggers are reported with rate 0 and left out of the macro average.
    """
    frame = synthetic.mention_frame()
    frame["trigger_key"] = frame["trigger"].map(normalize_trigger).astype(str)
    if not weighted:
        frame = frame.drop_duplicates(["event_type", "trigger_key"])
    frame["hit"] = [
        key in gold_triggers.get(event, set())
        for event, key in zip(frame["event_type"], frame["trigger_key"])
    ]
    sizes = frame.groupby("event_type").size()
    hit_counts = frame.groupby("event_type")["hit"].sum()
    per_event = {}
    for event in sorted(set(sizes.index) | set(gold_triggers)):
        size = int(sizes.get(event, 0))
        hits = int(hit_counts.get(event, 0))
        per_event[event] = EventHitRate(size, hits, hits / size if size else 0.0)
    rated = [rate for rate in per_event.values() if rate.synthetic_trigger_count]
    macro = sum(rate.hit_rate for rate in rated) / len(rated) if rated else 0.0
    total = sum(rate.synthetic_trigger_count for rate in rated)
    micro = sum(rate.hits for rate in rated) / total if total else 0.0
    return HitRateReport(per_event=per_event, macro_average=macro, micro_average=micro, weighted=weighted)
