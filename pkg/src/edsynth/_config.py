"""Run configuration: a JSON file mirroring :class:`RunConfig`, overridden by flags."""

import logging
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Literal
from typing import Mapping
from typing import Optional
from typing import Union

import pydantic
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import model_validator

from ._errors import ConfigError
from ._errors import EdsynthError
from ._gateway import GenerationConfig
from ._io import read_json
from ._scout import Strategy


logger = logging.getLogger(__name__)

PATH_FIELDS = ("ontology", "corpus", "templates_dir", "replay", "lexicon", "drafts", "gold")


class RunConfig(BaseModel):
    """Every knob of a run. Paths are checked per command with :meth:`require`."""

    model_config = ConfigDict(frozen=True, extra="forbid", protected_namespaces=())

    ontology: Optional[Path] = None
    corpus: Optional[Path] = None
    corpus_format: Optional[Literal["jsonl", "plain"]] = None
    corpus_fraction: float = Field(default=1.0, gt=0, le=1)
    dedupe: bool = False
    templates_dir: Optional[Path] = None
    out_dir: Path = Path("out")
    replay: Optional[Path] = None
    record: bool = True
    lexicon: Optional[Path] = None
    drafts: Optional[Path] = None
    gold: Optional[Path] = None
    generation: GenerationConfig = GenerationConfig()
    t: int = Field(default=10, ge=1)
    n: int = Field(default=50, ge=1)
    k: int = Field(default=0, ge=0)
    strategy: Strategy = Strategy.FREQUENCY_RANKING
    min_count: Optional[int] = Field(default=None, ge=1)
    pair_probability: float = Field(default=0.5, ge=0, le=1)
    oversample_factor: float = Field(default=1.5, ge=1)
    trigger_weighting: Literal["uniform", "count"] = "uniform"
    trigger_source: Literal["corpus", "llm-internal"] = "corpus"
    refine: bool = True
    resume: bool = False
    seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _seed_generation(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        generation = data.get("generation") or {}
        if isinstance(generation, GenerationConfig):
            return data
        if "seed" not in generation:
            data = {**data, "generation": {**generation, "seed": data.get("seed", 0)}}
        return data

    @model_validator(mode="after")
    def _check_strategy(self) -> "RunConfig":
        if self.strategy == Strategy.MIN_COUNT and self.min_count is None:
            raise ValueError("strategy min_count needs min_count")
        return self

    def require(self, *names: str) -> None:
        """Fail unless every named path field is set and exists.

        Raises:
            ConfigError: A field is unset or points to a missing path.
        """
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{name} is required for this command")
            if not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")


def _merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _merge(dict(merged[key]), value)
        elif isinstance(value, Mapping):
            merged[key] = _merge({}, value)
        else:
            merged[key] = value
    return merged


def _describe(error: pydantic.ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(loc) for loc in item['loc']) or '<root>'}: {item['msg']}"
        for item in error.errors()
    )


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Build a run configuration from a JSON file and flag overrides.

    Relative paths inside the file are resolved against the file's directory.
    ``None`` overrides are ignored, so unset flags keep the file's values.

    Raises:
        ConfigError: The file is unreadable or a value is out of range.
    """
    document: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = read_json(path)
        except EdsynthError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        document = dict(loaded)
        for name in PATH_FIELDS + ("out_dir",):
            value = document.get(name)
            if isinstance(value, str) and not Path(value).is_absolute():
                document[name] = str(path.parent / value)
    try:
        config = RunConfig.model_validate(_merge(document, overrides or {}))
    except pydantic.ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc
    logger.debug("run config: %s", config.model_dump_json())
    return config
