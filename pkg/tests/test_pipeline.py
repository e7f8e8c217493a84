import json

import pytest

import edsynth as eds
from edsynth._gateway import prompt_digest
from edsynth._pipeline import run_hitrate
from edsynth._pipeline import run_sample
from edsynth._pipeline import run_score
from ._utils import ScriptedBackend
from ._utils import no_sleep

ARTIFACTS = ("lexicon.json", "drafts.jsonl", "dataset.jsonl", "run_report.json", "llm_log.jsonl")


def _run(config, command="generate", backend=None):
    pipeline = eds.Pipeline(config, command, backend=backend or ScriptedBackend(), sleep=no_sleep)
    dataset = pipeline.label() if command == "label" else pipeline.generate()
    pipeline.finish()
    return pipeline, dataset


def _report(config):
    return json.loads((config.out_dir / "run_report.json").read_text(encoding="utf-8"))


def test_generate_end_to_end(run_config, ontology):
    config = run_config()
    pipeline, dataset = _run(config)
    for name in ARTIFACTS:
        assert (config.out_dir / name).is_file()
    assert all(s["shortfall"] == 0 for s in dataset.sample_stats.values())
    for instance in dataset:
        eds.validate_instance(instance, ontology)
        assert instance.id.startswith("narr-")

    report = _report(config)
    filler_event = {1: "Arrest-Jail", 2: "Infect"}
    expected_refined = sum(
        1
        for draft in eds.read_drafts(config.out_dir / "drafts.jsonl")
        if filler_event.get(draft.spec.sample_seed % 3) not in (None, *draft.spec.event_types)
    )
    assert report["counts"].get("refined_mentions", 0) == expected_refined
    assert report["command"] == "generate"
    assert report["seed"] == 7
    assert report["ontology_digest"] == ontology.digest()
    assert report["counts"]["specs"] == report["counts"]["drafts"] == 15
    assert report["counts"].get("rejected", 0) == 0
    assert report["counts"]["sampled"] == len(dataset)

    written = eds.read_dataset(config.out_dir / "dataset.jsonl", ontology)
    assert written == eds.Dataset(
        instances=dataset.instances,
        ontology_digest=ontology.digest(),
        metadata={"model": config.generation.model, "seed": 7, "pipeline_version": "0.1.0"},
    )
    assert [i.metadata for i in written] == [dict(i.metadata) for i in dataset]
    assert all(len(i.metadata["prompt_digests"]) == 2 for i in written)
    lexicon = eds.read_lexicon(config.out_dir / "lexicon.json")
    assert lexicon.triggers("Infect") == ["infected", "positive", "contracted"]


def test_replay_is_byte_identical(run_config, tmp_path):
    recorded = run_config(out_dir=tmp_path / "recorded")
    _run(recorded)
    log = recorded.out_dir / "llm_log.jsonl"
    replays = [run_config(out_dir=tmp_path / f"replay{i}", replay=log) for i in range(3)]
    for config in replays:
        pipeline, _ = _run(config, backend=ScriptedBackend(fail=lambda r: True))
        assert isinstance(pipeline.gateway.backend, eds.ReplayBackend)
        assert not (config.out_dir / "llm_log.jsonl").exists()

    def read(config, name):
        return (config.out_dir / name).read_bytes()

    for name in ("dataset.jsonl", "drafts.jsonl"):
        assert all(read(config, name) == read(recorded, name) for config in replays)
    reports = {read(config, "run_report.json") for config in replays}
    assert len(reports) == 1


def test_replay_misses_leave_an_empty_lexicon(run_config, tmp_path):
    empty_log = tmp_path / "empty.jsonl"
    empty_log.write_text("", encoding="utf-8")
    pipeline = eds.Pipeline(run_config(replay=empty_log), "generate", sleep=no_sleep)
    with pytest.raises(eds.EmptyLexiconError) as info:
        pipeline.generate()
    assert info.value.events == ["Attack", "Arrest-Jail", "Infect"]
    assert pipeline.report["stage1_errors"] == 40


def test_resume_reuses_lexicon_and_drafts(run_config):
    first = run_config()
    _, dataset = _run(first)
    backend = ScriptedBackend()
    _, resumed = _run(run_config(resume=True), backend=backend)
    assert resumed == dataset
    assert backend.tags
    assert all(tag.startswith("refiner:") for tag in backend.tags)


def test_resume_from_another_lexicon(run_config, tmp_path):
    first = run_config(out_dir=tmp_path / "first")
    _run(first)
    backend = ScriptedBackend()
    second = run_config(
        out_dir=tmp_path / "second", lexicon=first.out_dir / "lexicon.json", resume=True
    )
    _run(second, backend=backend)
    assert not any(tag.startswith("scout.") for tag in backend.tags)
    assert any(tag.startswith("narrator:") for tag in backend.tags)
    assert (second.out_dir / "lexicon.json").read_bytes() == (
        first.out_dir / "lexicon.json"
    ).read_bytes()


def test_without_refiner(run_config):
    backend = ScriptedBackend()
    _, dataset = _run(run_config(refine=False), backend=backend)
    assert not any(tag.startswith("refiner:") for tag in backend.tags)
    assert all(m.origin == eds.Origin.SAMPLED for i in dataset for m in i.mentions)


def test_empty_generations_are_dropped(run_config):
    backend = ScriptedBackend(empty=lambda r: r.tag == "narrator:0")
    pipeline, _ = _run(run_config(), backend=backend)
    assert pipeline.report["empty_passages"] == 1
    assert pipeline.report["drafts"] == 14


def test_few_shot_gold_is_appended(run_config, gold_path, gold, ontology):
    config = run_config(k=1, gold=gold_path)
    pipeline, dataset = _run(config)
    bank = eds.sample_few_shot(gold, 1, 7, ontology)
    appended = [i.id for i in dataset if i.id.startswith("gold-")]
    assert appended == ["gold-" + i.id for i in bank.instances()]
    assert [i.id for i in dataset][-len(appended):] == appended
    assert pipeline.report["gold_appended"] == len(appended)


def test_few_shot_needs_gold(run_config):
    with pytest.raises(eds.ConfigError, match="gold"):
        _run(run_config(k=2))


def test_missing_backend(run_config, monkeypatch):
    monkeypatch.delenv("SNARE_API_BASE", raising=False)
    pipeline = eds.Pipeline(run_config(), "generate")
    with pytest.raises(eds.ConfigError, match="SNARE_API_BASE"):
        pipeline.generate()


def test_missing_replay_log(run_config, tmp_path):
    with pytest.raises(eds.ConfigError, match="replay"):
        eds.Pipeline(run_config(replay=tmp_path / "nope.jsonl"), "generate")


def test_scout_stage_on_a_corpus_fraction(run_config):
    config = run_config(corpus_fraction=0.5)
    pipeline = eds.Pipeline(config, "scout", backend=ScriptedBackend(), sleep=no_sleep)
    pipeline.preflight("corpus")
    lexicon = pipeline.scout()
    pipeline.finish()
    report = _report(config)
    assert report["corpus_sentences"] == 20
    assert report["counts"]["sentences"] == 20
    assert eds.read_lexicon(config.out_dir / "lexicon.json") == lexicon
    assert not (config.out_dir / "dataset.jsonl").exists()


def test_label(run_config):
    backend = ScriptedBackend()
    pipeline, dataset = _run(run_config(), "label", backend)
    assert len(dataset) == 40
    assert dataset.metadata["seed"] == 7
    assert not any(tag.startswith("refiner:") for tag in backend.tags)
    assert pipeline.report["negative_instances"] == 5

    refined = eds.Pipeline(run_config(), "label", backend=ScriptedBackend(), sleep=no_sleep)
    refined.label(refine=True)
    assert refined.report["refine_errors"] == 0
    assert refined.gateway.backend.tags[-1].startswith("refiner:")


def test_run_sample(run_config):
    config = run_config()
    sampled = run_sample(config, 0.25)
    assert len(sampled) == 10
    assert eds.load_corpus(config.out_dir / "corpus.jsonl") == sampled


def test_run_score_and_hitrate(run_config, gold_path, ontology):
    _, dataset = _run(run_config())
    assert run_score(gold_path, gold_path, ontology=ontology).tri_c.f1 == 1.0
    report = run_hitrate(run_config().out_dir / "dataset.jsonl", gold_path, ontology=ontology)
    assert report.per_event["Attack"].synthetic_trigger_count >= 1
    assert 0.0 <= report.macro_average <= 1.0


def test_drafts_with_unknown_types_are_rejected(run_config):
    def draft(draft_id, passage, *targets):
        spec = eds.LabelSpec(tuple(eds.Target(e, w) for e, w in targets), len(draft_id))
        return eds.DraftInstance(draft_id, passage, spec, "d" * 64)

    config = run_config(refine=False)
    pipeline = eds.Pipeline(config, "refine", backend=ScriptedBackend(), sleep=no_sleep)
    dataset = pipeline.refine(
        [
            draft("narr-00000", "The raid and the parade.", ("Attack", "raid"), ("Parade", "parade")),
            draft("narr-00001", "The raid ended.", ("Attack", "raid")),
        ]
    )
    assert [i.id for i in dataset] == ["narr-00001"]
    assert pipeline.report["rejected"] == 1
    assert eds.read_dataset(config.out_dir / "dataset.jsonl", pipeline.ontology) == dataset


def test_llm_internal_trigger_source(run_config, tmp_path):
    config = run_config(trigger_source="llm-internal", corpus=tmp_path / "absent.jsonl")
    backend = ScriptedBackend()
    pipeline, dataset = _run(config, backend=backend)
    lexicon = eds.read_lexicon(config.out_dir / "lexicon.json")
    assert lexicon.provenance["source"] == "llm-internal"
    assert lexicon.triggers("Attack") == ["bombing", "raid", "shooting"]
    assert not any(tag.startswith("scout.stage") for tag in backend.tags)
    assert sum(tag.startswith("scout.internal:") for tag in backend.tags) == 3
    assert _report(config)["trigger_source"] == "llm-internal"
    assert "corpus_sentences" not in _report(config)
    assert len(dataset) > 0


def test_few_shot_bank_leaves_the_lexicon_alone(run_config, gold_path, tmp_path):
    plain = run_config(out_dir=tmp_path / "plain")
    shots = run_config(k=1, gold=gold_path, out_dir=tmp_path / "shots")
    _run(plain)
    _run(shots)
    lexicons = [eds.read_lexicon(c.out_dir / "lexicon.json") for c in (plain, shots)]
    assert lexicons[0].per_event == lexicons[1].per_event
    assert _report(shots)["few_shot_shortfall"] is not None
    assert "few_shot_shortfall" not in _report(plain)


@pytest.fixture
def replay_dir(shared_datadir):
    return shared_datadir / "replay"


def test_bundled_log_is_consistent(replay_dir):
    lines = (replay_dir / "llm_log.jsonl").read_text(encoding="utf-8").splitlines()
    rows = [json.loads(line) for line in lines]
    assert len(rows) == 12
    for row in rows:
        assert row["digest"] == prompt_digest(row["request"]["system"], row["request"]["user"])
    assert len(eds.load_log(replay_dir / "llm_log.jsonl")) == 12


def test_bundled_log_replays_label_runs(run_config, replay_dir, tmp_path):
    configs = [
        run_config(
            ontology=replay_dir / "ontology.json",
            corpus=replay_dir / "corpus.jsonl",
            replay=replay_dir / "llm_log.jsonl",
            out_dir=tmp_path / f"label{i}",
        )
        for i in range(3)
    ]
    outputs = []
    for config in configs:
        backend = ScriptedBackend()
        pipeline, dataset = _run(config, "label", backend)
        assert backend.tags == []
        assert pipeline.report["stage1_errors"] == pipeline.report["stage2_errors"] == 0
        outputs.append((config.out_dir / "dataset.jsonl").read_bytes())
    assert len(set(outputs)) == 1

    by_id = dataset.by_id()
    assert {(m.event_type, m.trigger) for m in by_id["r2"].mentions} == {
        ("Arrest-Jail", "arrested"),
        ("Attack", "raid"),
    }
    assert [(m.trigger, m.start) for m in by_id["r5"].mentions] == [("strike", 4)]
    assert by_id["r3"].mentions == by_id["r6"].mentions == ()
    assert pipeline.report["negative_instances"] == 2


def test_bundled_log_replays_the_scout(run_config, replay_dir):
    config = run_config(
        ontology=replay_dir / "ontology.json",
        corpus=replay_dir / "corpus.jsonl",
        replay=replay_dir / "llm_log.jsonl",
    )
    pipeline = eds.Pipeline(config, "scout", backend=ScriptedBackend(), sleep=no_sleep)
    pipeline.preflight(*pipeline.scout_inputs)
    lexicon = pipeline.scout()
    assert lexicon.triggers("Attack") == ["bombing", "raid", "shooting"]
    assert lexicon.triggers("Arrest-Jail") == ["arrested", "detained"]
    assert lexicon.per_event["Attack"][0].count == 1
