"""Exception hierarchy shared by every stage."""

from pathlib import Path
from typing import Iterable
from typing import Optional
from typing import Union


class EdsynthError(Exception):
    """Base class for all errors raised by edsynth."""


class ParseError(EdsynthError, ValueError):
    """A file could not be parsed.

    Args:
        message: What went wrong.
        path: The offending file, when known.
        line: 1-based line number, when known.
    """

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ) -> None:
        self.path = None if path is None else Path(path)
        self.line = line
        location = ""
        if self.path is not None:
            location = str(self.path)
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class ValidationError(EdsynthError, ValueError):
    """A value violates an invariant of the data model."""


class DuplicateIdError(ValidationError):
    """Two records share an identifier."""

    def __init__(self, duplicate_id: str, where: str = "") -> None:
        self.duplicate_id = duplicate_id
        suffix = f" in {where}" if where else ""
        super().__init__(f"duplicate id {duplicate_id!r}{suffix}")


class EmptyCorpusError(EdsynthError, ValueError):
    """An operation needs at least one sentence."""


class ConfigError(EdsynthError):
    """The run configuration is invalid or incomplete."""


class TemplateError(EdsynthError):
    """A prompt template is missing a placeholder or a placeholder value."""


class BackendUnavailable(EdsynthError):
    """The generation backend failed after all retries."""


class ReplayMiss(EdsynthError):
    """A replay log has no response for the requested prompt."""

    def __init__(self, tag: str, digest: str) -> None:
        self.tag = tag
        self.digest = digest
        super().__init__(f"no replayed response for tag={tag!r} digest={digest}")


class InvalidStrategyParam(EdsynthError, ValueError):
    """A trigger-selection strategy got an unusable parameter."""


class EmptyLexiconError(EdsynthError):
    """Some ontology events have no trigger in the lexicon."""

    def __init__(self, events: Iterable[str]) -> None:
        self.events = list(events)
        super().__init__(
            "lexicon has no triggers for event(s): " + ", ".join(self.events)
        )


class AlignmentError(EdsynthError, ValueError):
    """Predicted and gold datasets do not share instance ids."""
