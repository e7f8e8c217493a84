"""Sample label specifications and generate passages that realize them."""

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict
from typing import List
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Set
from typing import Tuple
from typing import Union

import numpy as np

from ._errors import EmptyLexiconError
from ._errors import InvalidStrategyParam
from ._errors import ParseError
from ._errors import ValidationError
from ._fewshot import FewShotBank
from ._fewshot import render_examples
from ._gateway import Gateway
from ._gateway import LlmExchange
from ._gateway import LlmRequest
from ._io import iter_jsonl
from ._io import write_jsonl
from ._ontology import Ontology
from ._prompts import TemplateSet
from ._report import RunReport
from ._scout import TriggerLexicon


logger = logging.getLogger(__name__)

TRIGGER_WEIGHTINGS = ("uniform", "count")

_FENCE = re.compile(r"^```[^\n]*\n(.*?)\n?```$", re.DOTALL)
_PREFIX = re.compile(r"^(?:passage|text)\s*:\s*", re.IGNORECASE)
_QUOTE_PAIRS = {'"': '"', "'": "'", "“": "”", "‘": "’", "«": "»"}


class Target(NamedTuple):
    event_type: str
    trigger: str


@dataclass(frozen=True)
class LabelSpec:
    targets: Tuple[Target, ...]
    sample_seed: int

    def __post_init__(self) -> None:
        if not 1 <= len(self.targets) <= 2:
            raise ValidationError(f"a label spec has 1 or 2 targets, got {len(self.targets)}")
        if len({t.event_type for t in self.targets}) != len(self.targets):
            raise ValidationError(f"label spec repeats an event type: {self.targets}")
        for target in self.targets:
            if not target.event_type.strip() or not target.trigger.strip():
                raise ValidationError(f"label spec target needs a type and a trigger: {target}")

    @property
    def event_types(self) -> List[str]:
        return [t.event_type for t in self.targets]


@dataclass(frozen=True)
class DraftInstance:
    id: str
    passage: str
    spec: LabelSpec
    exchange_ref: str

    def __post_init__(self) -> None:
        if not self.passage.strip():
            raise ValidationError(f"draft {self.id!r} has an empty passage")


def _quota(oversample_factor: float, count_per_event: int) -> int:
    return math.ceil(round(oversample_factor * count_per_event, 9))


def sample_label_specs(
    lexicon: TriggerLexicon,
    ontology: Ontology,
    count_per_event: int,
    pair_probability: float = 0.5,
    seed: int = 0,
    *,
    oversample_factor: float = 1.5,
    trigger_weighting: str = "uniform",
) -> List[LabelSpec]:
    """Draw label specs so each event is the primary target of its quota.

    Every event gets ``ceil(oversample_factor * count_per_event)`` specs in
    ontology order. With probability ``pair_probability`` a spec gains a second
    event drawn uniformly from the others. Triggers come from the lexicon,
    uniformly or proportionally to their corpus count.

    Raises:
        EmptyLexiconError: Some ontology events have no trigger.
    """
    if count_per_event < 1:
        raise ValueError(f"count_per_event must be positive, got {count_per_event}")
    if not 0.0 <= pair_probability <= 1.0:
        raise ValueError(f"pair_probability must be in [0, 1], got {pair_probability}")
    if oversample_factor < 1.0:
        raise ValueError(f"oversample_factor must be at least 1, got {oversample_factor}")
    if trigger_weighting not in TRIGGER_WEIGHTINGS:
        raise InvalidStrategyParam(f"unknown trigger weighting {trigger_weighting!r}")
    names = ontology.names
    empty = [name for name in names if not lexicon.per_event.get(name)]
    if empty:
        raise EmptyLexiconError(empty)

    rng = np.random.default_rng(seed)

    def pick(event: str) -> Target:
        stats = lexicon.per_event[event]
        weights = None
        if trigger_weighting == "count":
            counts = np.array([max(stat.count, 1) for stat in stats], dtype=float)
            weights = counts / counts.sum()
        return Target(event, stats[int(rng.choice(len(stats), p=weights))].trigger_key)

    specs = []
    used_seeds: Set[int] = set()
    for event in names:
        others = [name for name in names if name != event]
        for _ in range(_quota(oversample_factor, count_per_event)):
            targets = [pick(event)]
            if others and rng.random() < pair_probability:
                targets.append(pick(others[int(rng.integers(len(others)))]))
            sample_seed = int(rng.integers(2**31))
            while sample_seed in used_seeds:
                sample_seed = int(rng.integers(2**31))
            used_seeds.add(sample_seed)
            specs.append(LabelSpec(tuple(targets), sample_seed))
    logger.info("sampled %d label specs for %d events", len(specs), len(names))
    return specs


def _event_blocks(spec: LabelSpec, ontology: Ontology) -> str:
    blocks = []
    for target in spec.targets:
        event = ontology.get(target.event_type)
        blocks.append(
            f"Event: {event.name}\n"
            f"Definition: {event.definition}\n"
            f'Trigger word: "{target.trigger}"'
        )
    return "\n\n".join(blocks)


def _instructions(spec: LabelSpec) -> str:
    words = ", ".join(f'"{t.trigger}"' for t in spec.targets)
    noun = "event" if len(spec.targets) == 1 else "events"
    return (
        f"Write a realistic passage of 1 to 3 sentences that describes the {noun} above. "
        f"The passage must contain the trigger word(s) {words} exactly as written. "
        "Return only the passage.\n"
        f"Sample id: {spec.sample_seed}"
    )


def render_narrator_prompt(
    spec: LabelSpec,
    ontology: Ontology,
    few_shot: Optional[FewShotBank],
    templates: TemplateSet,
) -> Tuple[str, str]:
    examples = render_examples(few_shot, spec.event_types) if few_shot else ""
    return templates["narrator"].render(
        event_blocks=_event_blocks(spec, ontology),
        few_shot=examples,
        instructions=_instructions(spec),
    )


def clean_passage(text: str) -> str:
    """Strip markdown fences, a ``Passage:`` label and surrounding quotes."""
    passage = text.strip()
    fenced = _FENCE.match(passage)
    if fenced:
        passage = fenced.group(1).strip()
    passage = _PREFIX.sub("", passage).strip()
    if len(passage) >= 2 and _QUOTE_PAIRS.get(passage[0]) == passage[-1]:
        passage = passage[1:-1].strip()
    return passage


class Narrator:
    def __init__(
        self,
        gateway: Gateway,
        ontology: Ontology,
        templates: TemplateSet,
        *,
        few_shot: Optional[FewShotBank] = None,
        report: Optional[RunReport] = None,
    ) -> None:
        self.gateway = gateway
        self.ontology = ontology
        self.templates = templates
        self.few_shot = few_shot
        self.report = report if report is not None else RunReport()

    def _request(self, index: int, spec: LabelSpec) -> LlmRequest:
        system, user = render_narrator_prompt(spec, self.ontology, self.few_shot, self.templates)
        return self.gateway.request(system, user, f"narrator:{index}")

    def narrate(self, specs: Sequence[LabelSpec]) -> List[DraftInstance]:
        """One generation per spec; failed or empty generations are dropped."""
        requests = [self._request(index, spec) for index, spec in enumerate(specs)]
        drafts = []
        for index, (spec, result) in enumerate(zip(specs, self.gateway.complete_batch(requests))):
            draft_id = f"narr-{index:05d}"
            if not isinstance(result, LlmExchange):
                self.report.incr("generation_failures")
                logger.warning("%s: generation failed: %s", draft_id, result)
                continue
            passage = clean_passage(result.response_text)
            if not passage:
                self.report.incr("empty_passages")
                logger.warning("%s: empty passage dropped", draft_id)
                continue
            drafts.append(DraftInstance(draft_id, passage, spec, result.prompt_digest))
        self.report.incr("specs", len(specs))
        self.report.incr("drafts", len(drafts))
        return drafts


def write_drafts(drafts: Sequence[DraftInstance], path: Union[str, Path]) -> int:
    return write_jsonl(
        path,
        (
            {
                "id": draft.id,
                "passage": draft.passage,
                "targets": [{"type": t.event_type, "trigger": t.trigger} for t in draft.spec.targets],
                "sample_seed": draft.spec.sample_seed,
                "exchange_ref": draft.exchange_ref,
            }
            for draft in drafts
        ),
    )


def read_drafts(path: Union[str, Path]) -> List[DraftInstance]:
    drafts = []
    seen: Dict[str, int] = {}
    for line, row in iter_jsonl(path):
        try:
            targets = tuple(Target(str(t["type"]), str(t["trigger"])) for t in row["targets"])
            draft = DraftInstance(
                id=str(row["id"]),
                passage=str(row["passage"]),
                spec=LabelSpec(targets, int(row["sample_seed"])),
                exchange_ref=str(row.get("exchange_ref", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed draft ({exc})", path, line) from exc
        if draft.id in seen:
            raise ParseError(f"duplicate draft id {draft.id!r}", path, line)
        seen[draft.id] = line
        drafts.append(draft)
    return drafts
