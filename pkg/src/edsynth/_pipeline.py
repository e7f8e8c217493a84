"""Stage orchestration behind the command-line interface.

A :class:`Pipeline` owns one run: its configuration, its gateway, its run
report and the artifacts written to ``out_dir``. Stages can run on their own
(scout, narrate, refine, label) or end to end (generate).
"""

import logging
import time
from dataclasses import replace
from functools import cached_property
from pathlib import Path
from typing import Callable
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

from ._config import RunConfig
from ._corpus import Corpus
from ._corpus import load_corpus
from ._corpus import sample_corpus
from ._corpus import write_corpus
from ._dataset import Dataset
from ._dataset import SyntheticInstance
from ._dataset import append_gold
from ._dataset import greedy_sample
from ._dataset import read_dataset
from ._dataset import write_dataset
from ._fewshot import FewShotBank
from ._fewshot import sample_few_shot
from ._gateway import Backend
from ._gateway import Gateway
from ._gateway import LiveBackend
from ._gateway import load_log
from ._gateway import record_log
from ._metrics import HitRateReport
from ._metrics import ScoreReport
from ._metrics import extract_gold_triggers
from ._metrics import hit_rate
from ._metrics import score
from ._narrator import DraftInstance
from ._narrator import Narrator
from ._narrator import read_drafts
from ._narrator import sample_label_specs
from ._narrator import write_drafts
from ._ontology import Ontology
from ._ontology import load_ontology
from ._prompts import TemplateSet
from ._refiner import Refiner
from ._refiner import Rejected
from ._refiner import verify_and_anchor
from ._report import RunReport
from ._scout import Scout
from ._scout import TriggerLexicon
from ._scout import read_lexicon
from ._scout import write_lexicon


logger = logging.getLogger(__name__)

PIPELINE_VERSION = "0.1.0"

LEXICON_FILE = "lexicon.json"
DRAFTS_FILE = "drafts.jsonl"
DATASET_FILE = "dataset.jsonl"
CORPUS_FILE = "corpus.jsonl"
REPORT_FILE = "run_report.json"
LOG_FILE = "llm_log.jsonl"


def make_gateway(
    config: RunConfig,
    backend: Optional[Backend] = None,
    *,
    sleep: Callable[[float], None] = time.sleep,
) -> Gateway:
    """Replay log if configured, else the given backend, else the live endpoint.

    Raises:
        ConfigError: No replay log is configured and the live endpoint is unset.
    """
    if config.replay is not None:
        backend = load_log(config.replay)
    elif backend is None:
        backend = LiveBackend.from_env(timeout=config.generation.timeout)
    return Gateway(backend, config.generation, sleep=sleep)


class Pipeline:
    def __init__(
        self,
        config: RunConfig,
        command: str,
        *,
        backend: Optional[Backend] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config
        self.command = command
        self._backend = backend
        self._sleep = sleep
        self._gateway: Optional[Gateway] = None
        self.report = RunReport(
            command=command,
            seed=config.seed,
            model=config.generation.model,
            pipeline_version=PIPELINE_VERSION,
        )
        for name in ("templates_dir", "replay"):
            if getattr(config, name) is not None:
                config.require(name)

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            self._gateway = make_gateway(self.config, self._backend, sleep=self._sleep)
        return self._gateway

    def preflight(self, *paths: str) -> None:
        """Check input paths and the backend before any stage runs.

        Raises:
            ConfigError: A path is missing or no backend is configured.
        """
        self.config.require("ontology", *paths)
        if self.config.k > 0:
            self.config.require("gold")
        logger.debug("using %s", type(self.gateway.backend).__name__)

    @property
    def scout_inputs(self) -> Tuple[str, ...]:
        """Path fields the Scout stage reads."""
        return () if self.config.trigger_source == "llm-internal" else ("corpus",)

    @cached_property
    def ontology(self) -> Ontology:
        self.config.require("ontology")
        assert self.config.ontology is not None
        ontology = load_ontology(self.config.ontology)
        self.report.set("ontology_digest", ontology.digest())
        return ontology

    @cached_property
    def templates(self) -> TemplateSet:
        return TemplateSet.load(self.config.templates_dir)

    @cached_property
    def few_shot(self) -> Optional[FewShotBank]:
        if self.config.k == 0:
            return None
        self.config.require("gold")
        assert self.config.gold is not None
        gold = read_dataset(self.config.gold, self.ontology)
        bank = sample_few_shot(gold, self.config.k, self.config.seed, self.ontology)
        self.report.set("few_shot_shortfall", dict(bank.shortfall))
        return bank

    def out_path(self, name: str) -> Path:
        self.config.out_dir.mkdir(parents=True, exist_ok=True)
        return self.config.out_dir / name

    def _dataset_metadata(self, dataset: Dataset) -> Dataset:
        return replace(
            dataset,
            metadata={
                **dataset.metadata,
                "model": self.config.generation.model,
                "seed": self.config.seed,
                "pipeline_version": PIPELINE_VERSION,
            },
        )

    def load_corpus(self) -> Corpus:
        self.config.require("corpus")
        assert self.config.corpus is not None
        corpus = load_corpus(
            self.config.corpus,
            self.config.corpus_format,
            dedupe=self.config.dedupe,
            language=self.ontology.language,
        )
        if self.config.corpus_fraction < 1:
            corpus = sample_corpus(corpus, self.config.corpus_fraction, self.config.seed)
        self.report.set("corpus_sentences", len(corpus))
        return corpus

    def scout(self) -> TriggerLexicon:
        """Build the trigger lexicon and write it to ``lexicon.json``.

        With ``trigger_source = "llm-internal"`` the triggers come straight from
        the LLM and the corpus is not read.
        """
        scout = Scout(self.gateway, self.ontology, self.templates, report=self.report)
        if self.config.trigger_source == "llm-internal":
            lexicon = scout.generate_triggers_internal(self.config.t)
        else:
            lexicon = scout.build_lexicon(
                self.load_corpus(),
                self.config.t,
                self.config.strategy,
                self.config.seed,
                min_count=self.config.min_count,
            )
        self.report.set("trigger_source", self.config.trigger_source)
        write_lexicon(lexicon, self.out_path(LEXICON_FILE))
        return lexicon

    def narrate(self, lexicon: TriggerLexicon) -> List[DraftInstance]:
        """Sample label specs, generate drafts and write ``drafts.jsonl``."""
        specs = sample_label_specs(
            lexicon,
            self.ontology,
            self.config.n,
            self.config.pair_probability,
            self.config.seed,
            oversample_factor=self.config.oversample_factor,
            trigger_weighting=self.config.trigger_weighting,
        )
        narrator = Narrator(
            self.gateway,
            self.ontology,
            self.templates,
            few_shot=self.few_shot,
            report=self.report,
        )
        drafts = narrator.narrate(specs)
        write_drafts(drafts, self.out_path(DRAFTS_FILE))
        return drafts

    def refine(self, drafts: List[DraftInstance]) -> Dataset:
        """Anchor, refine and sample the drafts; write ``dataset.jsonl``."""
        pool: List[SyntheticInstance] = []
        for draft in drafts:
            result = verify_and_anchor(draft, self.ontology)
            if isinstance(result, Rejected):
                self.report.incr("rejected")
                logger.warning("%s rejected: %s", result.draft_id, result.reason)
                continue
            pool.append(result)
        if self.config.refine:
            refiner = Refiner(self.gateway, self.ontology, self.templates, report=self.report)
            pool = refiner.refine_batch(pool)
        self.report.incr("pool", len(pool))
        dataset = greedy_sample(pool, self.ontology, self.config.n)
        self.report.incr("sampled", len(dataset))
        self.report.incr("shortfalls", sum(s["shortfall"] for s in dataset.sample_stats.values()))
        self.report.set("sample_stats", {k: dict(v) for k, v in dataset.sample_stats.items()})
        if self.few_shot:
            dataset = append_gold(dataset, self.few_shot.instances(), self.ontology)
            self.report.incr("gold_appended", len(self.few_shot.instances()))
        return self._write(dataset)

    def generate(self) -> Dataset:
        """Scout, Narrator and Refiner end to end.

        With ``resume``, an existing lexicon (and drafts file) from an earlier
        run is reused instead of rerunning the stages that produced it.
        """
        lexicon_path = self.config.lexicon or self.config.out_dir / LEXICON_FILE
        resuming = self.config.resume and lexicon_path.is_file()
        self.preflight(*(() if resuming else self.scout_inputs))
        if resuming:
            logger.info("resuming from lexicon %s", lexicon_path)
            lexicon = read_lexicon(lexicon_path)
            if lexicon_path != self.config.out_dir / LEXICON_FILE:
                write_lexicon(lexicon, self.out_path(LEXICON_FILE))
        else:
            lexicon = self.scout()
        drafts_path = self.config.drafts or self.config.out_dir / DRAFTS_FILE
        if resuming and drafts_path.is_file():
            logger.info("resuming from drafts %s", drafts_path)
            drafts = read_drafts(drafts_path)
        else:
            drafts = self.narrate(lexicon)
        return self.refine(drafts)

    def label(self, refine: bool = False) -> Dataset:
        """Weak supervision: label the corpus sentences directly."""
        corpus = self.load_corpus()
        scout = Scout(self.gateway, self.ontology, self.templates, report=self.report)
        dataset = scout.label_sentences(corpus)
        if refine:
            refiner = Refiner(self.gateway, self.ontology, self.templates, report=self.report)
            dataset = replace(dataset, instances=tuple(refiner.refine_batch(list(dataset.instances))))
        return self._write(dataset)

    def _write(self, dataset: Dataset) -> Dataset:
        dataset = self._dataset_metadata(dataset)
        write_dataset(dataset, self.out_path(DATASET_FILE))
        self.report.set("dataset_stats", dataset.stats)
        return dataset

    def finish(self) -> None:
        """Write the run report and, for non-replayed runs, the replay log."""
        if self._gateway is not None and self.config.replay is None and self.config.record:
            count = record_log(self._gateway.history, self.out_path(LOG_FILE))
            logger.info("recorded %d exchanges to %s", count, self.out_path(LOG_FILE))
        self.report.write(self.out_path(REPORT_FILE))


def run_score(
    pred: Union[str, Path],
    gold: Union[str, Path],
    *,
    ontology: Optional[Ontology] = None,
    string_match: bool = False,
) -> ScoreReport:
    return score(
        read_dataset(pred, ontology), read_dataset(gold, ontology), string_match=string_match
    )


def run_hitrate(
    synthetic: Union[str, Path],
    gold: Union[str, Path],
    *,
    ontology: Optional[Ontology] = None,
    weighted: bool = False,
) -> HitRateReport:
    gold_triggers = extract_gold_triggers(read_dataset(gold, ontology))
    return hit_rate(read_dataset(synthetic, ontology), gold_triggers, weighted=weighted)


def run_sample(config: RunConfig, fraction: float) -> Corpus:
    """Persist a seeded fraction of the configured corpus as ``corpus.jsonl``."""
    config.require("corpus")
    assert config.corpus is not None
    corpus = load_corpus(config.corpus, config.corpus_format, dedupe=config.dedupe)
    sampled = sample_corpus(corpus, fraction, config.seed)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    write_corpus(sampled, config.out_dir / CORPUS_FILE)
    logger.info("kept %d of %d sentences", len(sampled), len(corpus))
    return sampled
