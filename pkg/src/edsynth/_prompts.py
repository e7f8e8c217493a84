"""Prompt templates with ``{{placeholder}}`` substitution.

Every stage ships a ``<name>.system.txt`` and ``<name>.user.txt`` pair under
``edsynth/templates``. Operators can override any file by putting a file
with the same name in their own templates directory.
"""

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict
from typing import FrozenSet
from typing import Mapping
from typing import Optional
from typing import Tuple
from typing import Union

from ._errors import TemplateError


_PLACEHOLDER = re.compile(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}")

REQUIRED_PLACEHOLDERS: Dict[str, FrozenSet[str]] = {
    "scout_stage1": frozenset({"event_list", "sentence"}),
    "scout_stage2": frozenset({"event_name", "event_definition", "sentence"}),
    "scout_internal": frozenset({"event_name", "event_definition", "t"}),
    "narrator": frozenset({"event_blocks", "few_shot", "instructions"}),
    "refiner": frozenset({"event_list", "passage"}),
}


class PromptTemplate:
    """A template string with ``{{name}}`` placeholders."""

    def __init__(self, template: str, name: str = "<inline>") -> None:
        self.template = template
        self.name = name

    @property
    def fields(self) -> FrozenSet[str]:
        return frozenset(_PLACEHOLDER.findall(self.template))

    def render(self, **values: object) -> str:
        missing = self.fields - values.keys()
        if missing:
            raise TemplateError(
                f"template {self.name!r} has no value for: {', '.join(sorted(missing))}"
            )
        return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]), self.template)


@dataclass(frozen=True)
class StagePrompt:
    system: PromptTemplate
    user: PromptTemplate

    def render(self, **values: object) -> Tuple[str, str]:
        known = self.system.fields | self.user.fields
        subset = {k: v for k, v in values.items() if k in known}
        return self.system.render(**subset).strip(), self.user.render(**subset).strip()


def _read_template(name: str, directory: Optional[Path]) -> str:
    if directory is not None:
        candidate = directory / name
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    resource = resources.files("edsynth").joinpath("templates", name)
    if not resource.is_file():
        raise TemplateError(f"template file {name!r} not found")
    return resource.read_text(encoding="utf-8")


class TemplateSet:
    """All stage prompts of a run, validated once at load time."""

    def __init__(self, stages: Mapping[str, StagePrompt]) -> None:
        self._stages = dict(stages)

    def __getitem__(self, stage: str) -> StagePrompt:
        return self._stages[stage]

    @classmethod
    def load(cls, directory: Optional[Union[str, Path]] = None) -> "TemplateSet":
        """Load the shipped templates, overridden by files found in ``directory``.

        Raises:
            TemplateError: A template is missing or lacks a required placeholder.
        """
        base = None if directory is None else Path(directory)
        stages = {}
        for stage, required in REQUIRED_PLACEHOLDERS.items():
            system = PromptTemplate(_read_template(f"{stage}.system.txt", base), f"{stage}.system")
            user = PromptTemplate(_read_template(f"{stage}.user.txt", base), f"{stage}.user")
            missing = required - (system.fields | user.fields)
            if missing:
                raise TemplateError(
                    f"template {stage!r} lacks placeholder(s): {', '.join(sorted(missing))}"
                )
            stages[stage] = StagePrompt(system=system, user=user)
        return cls(stages)


def format_event_list(definitions: Mapping[str, str]) -> str:
    return "\n".join(f"- {name}: {definition}" for name, definition in definitions.items())
