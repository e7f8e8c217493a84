"""Command-line interface."""

import json
import logging
from pathlib import Path
from typing import Any
from typing import Callable
from typing import Dict
from typing import Optional

import click

from ._config import RunConfig
from ._config import load_run_config
from ._errors import ConfigError
from ._errors import EdsynthError
from ._io import write_json
from ._narrator import read_drafts
from ._ontology import Ontology
from ._ontology import load_ontology
from ._pipeline import CORPUS_FILE
from ._pipeline import DATASET_FILE
from ._pipeline import DRAFTS_FILE
from ._pipeline import LEXICON_FILE
from ._pipeline import PIPELINE_VERSION
from ._pipeline import Pipeline
from ._pipeline import run_hitrate
from ._pipeline import run_sample
from ._pipeline import run_score
from ._scout import Strategy
from ._scout import read_lexicon


logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _ClickHandler(logging.Handler):
    def emit(self, record: logging.LogRecord) -> None:
        click.echo(self.format(record), err=True)


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    package = logging.getLogger("edsynth")
    package.setLevel(level)
    if not any(isinstance(h, _ClickHandler) for h in package.handlers):
        handler = _ClickHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        package.addHandler(handler)


class _Cli(click.Group):
    """Usage errors exit with the configuration-error status."""

    def make_context(self, *args: Any, **kwargs: Any) -> click.Context:
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as exc:
            exc.exit_code = EXIT_CONFIG
            raise

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = EXIT_CONFIG
            raise


def _fail(command: str, exc: Exception, code: int) -> None:
    click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
    click.echo(f"edsynth {command} failed: {exc}", err=True)
    raise click.exceptions.Exit(code)


def _execute(command: str, action: Callable[[], Any]) -> Any:
    try:
        return action()
    except ConfigError as exc:
        _fail(command, exc, EXIT_CONFIG)
    except (EdsynthError, OSError) as exc:
        _fail(command, exc, EXIT_RUNTIME)


_STAGE_OPTIONS = [
    click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False, path_type=Path),
        help="JSON run configuration.",
    ),
    click.option("--ontology", type=click.Path(path_type=Path), help="Ontology JSON."),
    click.option("--corpus", type=click.Path(path_type=Path), help="Unlabeled corpus."),
    click.option("--corpus-format", type=click.Choice(["jsonl", "plain"])),
    click.option(
        "--fraction",
        "corpus_fraction",
        type=float,
        help="Use a seeded fraction of the corpus.",
    ),
    click.option(
        "--templates",
        "templates_dir",
        type=click.Path(path_type=Path),
        help="Directory of template overrides.",
    ),
    click.option(
        "--out",
        "out_dir",
        type=click.Path(file_okay=False, path_type=Path),
        help="Output directory.",
    ),
    click.option("--seed", type=int, help="Root seed."),
    click.option(
        "--replay",
        type=click.Path(path_type=Path),
        help="Replay log to use instead of the live backend.",
    ),
    click.option("--record/--no-record", default=None, help="Record the LLM log."),
    click.option("--lexicon", type=click.Path(path_type=Path), help="Trigger lexicon."),
    click.option("--drafts", type=click.Path(path_type=Path), help="Drafts file."),
    click.option("--gold", type=click.Path(path_type=Path), help="Gold dataset."),
    click.option("--t", type=int, help="Triggers kept per event type."),
    click.option("--n", type=int, help="Instances sampled per event type."),
    click.option("--k", type=int, help="Gold examples per event type."),
    click.option("--strategy", type=click.Choice([s.value for s in Strategy])),
    click.option("--min-count", type=int, help="Threshold of the min_count strategy."),
    click.option(
        "--pair-prob",
        "pair_probability",
        type=float,
        help="Probability of a second event per label spec.",
    ),
    click.option("--trigger-weighting", type=click.Choice(["uniform", "count"])),
    click.option(
        "--trigger-source",
        type=click.Choice(["corpus", "llm-internal"]),
        help="Mine triggers from the corpus or ask the LLM directly.",
    ),
    click.option("--parallelism", type=int, help="Concurrent LLM requests."),
    click.option("--refine/--no-refine", default=None, help="Run the Refiner."),
    click.option(
        "--resume",
        is_flag=True,
        default=None,
        help="Reuse the lexicon and drafts of an earlier run.",
    ),
]


def stage_options(f: Callable[..., Any]) -> Callable[..., Any]:
    for option in reversed(_STAGE_OPTIONS):
        f = option(f)
    return f


def _load_config(options: Dict[str, Any]) -> RunConfig:
    options = dict(options)
    config_path = options.pop("config_path", None)
    parallelism = options.pop("parallelism", None)
    if parallelism is not None:
        options["generation"] = {"parallelism": parallelism}
    return load_run_config(config_path, options)


def _run_stage(
    ctx: click.Context,
    command: str,
    options: Dict[str, Any],
    action: Callable[[Pipeline], Path],
) -> None:
    obj = ctx.find_root().obj or {}

    def _go() -> Path:
        pipeline = Pipeline(
            _load_config(options),
            command,
            backend=obj.get("backend"),
            **({"sleep": obj["sleep"]} if "sleep" in obj else {}),
        )
        artifact = action(pipeline)
        pipeline.finish()
        return artifact

    artifact = _execute(command, _go)
    click.echo(str(artifact))


@click.group(cls=_Cli)
@click.version_option(PIPELINE_VERSION, prog_name="edsynth")
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug.")
def main(verbose: int) -> None:
    """Domain-aware synthetic data generation for event detection."""
    _configure_logging(verbose)


@main.command()
@stage_options
@click.pass_context
def scout(ctx: click.Context, **options: Any) -> None:
    """Mine a trigger lexicon from the corpus, or ask the LLM for one."""

    def action(pipeline: Pipeline) -> Path:
        pipeline.preflight(*pipeline.scout_inputs)
        pipeline.scout()
        return pipeline.out_path(LEXICON_FILE)

    _run_stage(ctx, "scout", options, action)


@main.command()
@stage_options
@click.pass_context
def narrate(ctx: click.Context, **options: Any) -> None:
    """Generate draft passages from a lexicon."""

    def action(pipeline: Pipeline) -> Path:
        pipeline.preflight("lexicon")
        assert pipeline.config.lexicon is not None
        pipeline.narrate(read_lexicon(pipeline.config.lexicon))
        return pipeline.out_path(DRAFTS_FILE)

    _run_stage(ctx, "narrate", options, action)


@main.command()
@stage_options
@click.pass_context
def refine(ctx: click.Context, **options: Any) -> None:
    """Anchor and refine drafts, then sample the dataset."""

    def action(pipeline: Pipeline) -> Path:
        pipeline.preflight("drafts")
        assert pipeline.config.drafts is not None
        pipeline.refine(read_drafts(pipeline.config.drafts))
        return pipeline.out_path(DATASET_FILE)

    _run_stage(ctx, "refine", options, action)


@main.command()
@stage_options
@click.pass_context
def generate(ctx: click.Context, **options: Any) -> None:
    """Run Scout, Narrator and Refiner end to end."""

    def action(pipeline: Pipeline) -> Path:
        pipeline.generate()
        return pipeline.out_path(DATASET_FILE)

    _run_stage(ctx, "generate", options, action)


@main.command()
@stage_options
@click.pass_context
def label(ctx: click.Context, **options: Any) -> None:
    """Weakly label corpus sentences with the Scout.

    The Refiner only runs with an explicit --refine.
    """
    use_refiner = options.get("refine") is True

    def action(pipeline: Pipeline) -> Path:
        pipeline.preflight("corpus")
        pipeline.label(refine=use_refiner)
        return pipeline.out_path(DATASET_FILE)

    _run_stage(ctx, "label", options, action)


_EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)


def _emit_report(payload: Dict[str, Any], out: Optional[Path]) -> None:
    if out is not None:
        write_json(out, payload)
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _maybe_ontology(path: Optional[Path]) -> Optional[Ontology]:
    return load_ontology(path) if path is not None else None


@main.command()
@click.argument("pred", type=_EXISTING_FILE)
@click.argument("gold", type=_EXISTING_FILE)
@click.option("--ontology", type=_EXISTING_FILE, help="Canonicalize type names.")
@click.option(
    "--string-match",
    is_flag=True,
    help="Match Tri-C units by normalized trigger string instead of span.",
)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path))
def score(
    pred: Path,
    gold: Path,
    ontology: Optional[Path],
    string_match: bool,
    out: Optional[Path],
) -> None:
    """Score a predicted dataset against gold (Eve-I and Tri-C)."""

    def action() -> Dict[str, Any]:
        report = run_score(
            pred, gold, ontology=_maybe_ontology(ontology), string_match=string_match
        )
        return report.to_dict()

    _emit_report(_execute("score", action), out)


@main.command()
@click.argument("synthetic", type=_EXISTING_FILE)
@click.argument("gold", type=_EXISTING_FILE)
@click.option("--ontology", type=_EXISTING_FILE, help="Canonicalize type names.")
@click.option(
    "--weighted",
    is_flag=True,
    help="Count every mention instead of distinct triggers.",
)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path))
def hitrate(
    synthetic: Path,
    gold: Path,
    ontology: Optional[Path],
    weighted: bool,
    out: Optional[Path],
) -> None:
    """Share of synthetic triggers found among the gold triggers."""

    def action() -> Dict[str, Any]:
        report = run_hitrate(
            synthetic, gold, ontology=_maybe_ontology(ontology), weighted=weighted
        )
        return report.to_dict()

    _emit_report(_execute("hitrate", action), out)


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, path_type=Path),
    help="JSON run configuration.",
)
@click.option("--corpus", type=click.Path(path_type=Path), help="Unlabeled corpus.")
@click.option("--corpus-format", type=click.Choice(["jsonl", "plain"]))
@click.option("--fraction", type=float, required=True, help="Share kept, in (0, 1].")
@click.option("--seed", type=int, help="Root seed.")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Output directory.",
)
def sample(fraction: float, **options: Any) -> None:
    """Write a seeded subset of the corpus."""

    def action() -> Path:
        config = _load_config(options)
        if not 0 < fraction <= 1:
            raise ConfigError(f"--fraction must be in (0, 1], got {fraction}")
        run_sample(config, fraction)
        return config.out_dir / CORPUS_FILE

    click.echo(str(_execute("sample", action)))


if __name__ == "__main__":
    main(prog_name="edsynth")  # pragma: no cover
