"""Event ontology: the closed set of event types every prompt is built from."""

import hashlib
import logging
import string
from pathlib import Path
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import pydantic
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import PrivateAttr
from pydantic import field_validator
from pydantic import model_validator

from ._errors import ValidationError
from ._io import read_json


logger = logging.getLogger(__name__)

_ASCII_FOLD = str.maketrans(string.ascii_uppercase, string.ascii_lowercase)
_TRIM_CHARS = string.whitespace + string.punctuation + "“”‘’«»…"


def fold_name(name: str) -> str:
    """ASCII-only case fold used for every type-name comparison."""
    return name.translate(_ASCII_FOLD)


class EventType(BaseModel):
    """A single event type with its natural-language definition."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., description="Identifier, unique within the ontology.")
    definition: str = Field(..., description="Definition shown to the LLM.")
    aliases: Tuple[str, ...] = Field(
        default=(), description="Alternate surface names accepted from LLM output."
    )

    @field_validator("name")
    @classmethod
    def _check_name(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("name must be nonempty")
        if "\n" in value or "\r" in value:
            raise ValueError("name must not contain newline characters")
        return value

    @field_validator("definition")
    @classmethod
    def _check_definition(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("definition must be nonempty")
        return value

    @field_validator("aliases")
    @classmethod
    def _check_aliases(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        for alias in value:
            if not alias.strip() or "\n" in alias:
                raise ValueError(f"invalid alias {alias!r}")
        return value


class Ontology(BaseModel):
    """Ordered, immutable collection of event types."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    events: Tuple[EventType, ...] = Field(..., min_length=1)
    domain_label: str = Field(default="", alias="domain")
    language: str = "en"

    _index: Dict[str, EventType] = PrivateAttr(default_factory=dict)
    _order: Dict[str, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_unique(self) -> "Ontology":
        index: Dict[str, EventType] = {}
        order: Dict[str, int] = {}
        for position, event in enumerate(self.events):
            key = fold_name(event.name)
            if key in index:
                raise ValueError(f"duplicate event name {event.name!r}")
            index[key] = event
            order[event.name] = position
        for event in self.events:
            for alias in event.aliases:
                key = fold_name(alias)
                owner = index.get(key)
                if owner is not None and owner is not event:
                    raise ValueError(
                        f"alias {alias!r} of {event.name!r} clashes with {owner.name!r}"
                    )
                index[key] = event
        self._index = index
        self._order = order
        return self

    def __len__(self) -> int:
        return len(self.events)

    @property
    def names(self) -> List[str]:
        return [event.name for event in self.events]

    def get(self, name: str) -> EventType:
        event = self._index.get(fold_name(name))
        if event is None:
            raise KeyError(name)
        return event

    def position(self, name: str) -> int:
        """Ontology order of an event type; used for every deterministic tie-break."""
        return self._order[self.get(name).name]

    def resolve(self, raw: str) -> Optional[EventType]:
        return resolve_type(self, raw)

    def digest(self) -> str:
        payload = self.model_dump_json(by_alias=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def resolve_type(ontology: Ontology, raw: str) -> Optional[EventType]:
    """Find the event type a raw LLM answer refers to.

    Matching is ASCII case-insensitive on names and aliases after trimming
    whitespace and surrounding punctuation. Returns ``None`` when nothing matches.
    """
    key = fold_name(raw.strip(_TRIM_CHARS))
    if not key:
        return None
    return ontology._index.get(key)


def _describe(error: pydantic.ValidationError) -> str:
    parts = []
    for item in error.errors():
        field = ".".join(str(loc) for loc in item["loc"]) or "<root>"
        parts.append(f"{field}: {item['msg']}")
    return "; ".join(parts)


def load_ontology(path: Union[str, Path]) -> Ontology:
    """Load and validate an ontology JSON file.

    Raises:
        ParseError: The file is not valid JSON.
        ValidationError: The document violates the ontology schema or invariants.
    """
    document = read_json(path)
    if not isinstance(document, dict):
        raise ValidationError(f"{path}: ontology must be a JSON object")
    try:
        ontology = Ontology.model_validate(document)
    except pydantic.ValidationError as exc:
        raise ValidationError(f"{path}: {_describe(exc)}") from exc
    logger.info("loaded ontology with %d event types from %s", len(ontology), path)
    return ontology
