"""Domain-aware synthetic data generation for event detection."""

from ._config import RunConfig
from ._config import load_run_config
from ._corpus import Corpus
from ._corpus import UnlabeledSentence
from ._corpus import load_corpus
from ._corpus import sample_corpus
from ._corpus import write_corpus
from ._dataset import Dataset
from ._dataset import EventMention
from ._dataset import Origin
from ._dataset import SyntheticInstance
from ._dataset import append_gold
from ._dataset import greedy_sample
from ._dataset import normalize_trigger
from ._dataset import read_dataset
from ._dataset import validate_instance
from ._dataset import write_dataset
from ._errors import AlignmentError
from ._errors import BackendUnavailable
from ._errors import ConfigError
from ._errors import DuplicateIdError
from ._errors import EdsynthError
from ._errors import EmptyCorpusError
from ._errors import EmptyLexiconError
from ._errors import InvalidStrategyParam
from ._errors import ParseError
from ._errors import ReplayMiss
from ._errors import TemplateError
from ._errors import ValidationError
from ._fewshot import FewShotBank
from ._fewshot import render_examples
from ._fewshot import sample_few_shot
from ._gateway import Gateway
from ._gateway import GenerationConfig
from ._gateway import LiveBackend
from ._gateway import LlmExchange
from ._gateway import LlmRequest
from ._gateway import ReplayBackend
from ._gateway import load_log
from ._gateway import record_log
from ._metrics import HitRateReport
from ._metrics import ScoreReport
from ._metrics import extract_gold_triggers
from ._metrics import hit_rate
from ._metrics import score
from ._narrator import DraftInstance
from ._narrator import LabelSpec
from ._narrator import Narrator
from ._narrator import Target
from ._narrator import read_drafts
from ._narrator import render_narrator_prompt
from ._narrator import sample_label_specs
from ._narrator import write_drafts
from ._ontology import EventType
from ._ontology import Ontology
from ._ontology import load_ontology
from ._ontology import resolve_type
from ._pipeline import PIPELINE_VERSION
from ._pipeline import Pipeline
from ._prompts import TemplateSet
from ._refiner import Refiner
from ._refiner import Rejected
from ._refiner import anchor_trigger
from ._refiner import verify_and_anchor
from ._report import RunReport
from ._scout import Scout
from ._scout import Strategy
from ._scout import TriggerLexicon
from ._scout import TriggerStat
from ._scout import aggregate
from ._scout import filter_top_t
from ._scout import read_lexicon
from ._scout import select_triggers
from ._scout import write_lexicon


__version__ = PIPELINE_VERSION

__all__ = [
    "AlignmentError",
    "BackendUnavailable",
    "ConfigError",
    "Corpus",
    "Dataset",
    "DraftInstance",
    "DuplicateIdError",
    "EdsynthError",
    "EmptyCorpusError",
    "EmptyLexiconError",
    "EventMention",
    "EventType",
    "FewShotBank",
    "Gateway",
    "GenerationConfig",
    "HitRateReport",
    "InvalidStrategyParam",
    "LabelSpec",
    "LiveBackend",
    "LlmExchange",
    "LlmRequest",
    "Narrator",
    "Ontology",
    "Origin",
    "ParseError",
    "Pipeline",
    "Refiner",
    "Rejected",
    "ReplayBackend",
    "ReplayMiss",
    "RunConfig",
    "RunReport",
    "ScoreReport",
    "Scout",
    "Strategy",
    "SyntheticInstance",
    "Target",
    "TemplateError",
    "TemplateSet",
    "TriggerLexicon",
    "TriggerStat",
    "UnlabeledSentence",
    "ValidationError",
    "aggregate",
    "anchor_trigger",
    "append_gold",
    "extract_gold_triggers",
    "filter_top_t",
    "greedy_sample",
    "hit_rate",
    "load_corpus",
    "load_log",
    "load_ontology",
    "load_run_config",
    "normalize_trigger",
    "read_dataset",
    "read_drafts",
    "read_lexicon",
    "record_log",
    "render_examples",
    "render_narrator_prompt",
    "resolve_type",
    "sample_corpus",
    "sample_few_shot",
    "sample_label_specs",
    "score",
    "select_triggers",
    "validate_instance",
    "verify_and_anchor",
    "write_corpus",
    "write_dataset",
    "write_drafts",
    "write_lexicon",
]
