"""k-shot gold examples used in prompts and appended to the synthetic data."""

import logging
from dataclasses import dataclass
from dataclasses import field
from typing import Dict
from typing import Iterable
from typing import List
from typing import Mapping
from typing import Optional
from typing import Tuple

import numpy as np

from ._dataset import Dataset
from ._dataset import SyntheticInstance
from ._ontology import Ontology


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FewShotBank:
    k: int
    per_event: Mapping[str, Tuple[SyntheticInstance, ...]] = field(default_factory=dict)
    shortfall: Mapping[str, int] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return any(self.per_event.values())

    def instances(self) -> List[SyntheticInstance]:
        """Distinct instances across events, first appearance wins."""
        seen: Dict[str, SyntheticInstance] = {}
        for examples in self.per_event.values():
            for instance in examples:
                seen.setdefault(instance.id, instance)
        return list(seen.values())


def sample_few_shot(
    gold: Dataset, k: int, seed: int, ontology: Optional[Ontology] = None
) -> FewShotBank:
    """Draw up to ``k`` gold instances per event type without replacement.

    An instance can serve several events. Events with fewer than ``k`` gold
    instances keep what exists and record the shortfall.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if k == 0:
        return FewShotBank(k=0)
    by_event: Dict[str, List[SyntheticInstance]] = {}
    for instance in gold.instances:
        for event_type in instance.event_types:
            by_event.setdefault(event_type, []).append(instance)
    events = ontology.names if ontology is not None else sorted(by_event)
    per_event = {}
    shortfall = {}
    for offset, event in enumerate(events):
        pool = by_event.get(event, [])
        size = min(k, len(pool))
        rng = np.random.default_rng([seed & 0xFFFFFFFF, offset])
        picked = sorted(rng.choice(len(pool), size=size, replace=False)) if size else []
        per_event[event] = tuple(pool[i] for i in picked)
        if size < k:
            shortfall[event] = k - size
    if shortfall:
        logger.warning("few-shot shortfall: %s", shortfall)
    return FewShotBank(k=k, per_event=per_event, shortfall=shortfall)


def _render_instance(instance: SyntheticInstance) -> str:
    lines = [f"Sentence: {instance.passage}", "Events:"]
    lines.extend(f"{m.trigger} → {m.event_type}" for m in instance.mentions)
    return "\n".join(lines)


def render_examples(bank: FewShotBank, events: Iterable[str]) -> str:
    """Serialize the examples of the requested events, grouped in bank order."""
    wanted = set(events)
    blocks = []
    for event, examples in bank.per_event.items():
        if event not in wanted or not examples:
            continue
        body = "\n\n".join(_render_instance(instance) for instance in examples)
        blocks.append(f"Examples for {event}:\n{body}")
    return "\n\n".join(blocks)
