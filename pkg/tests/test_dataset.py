import json
from dataclasses import replace

import numpy as np
import pytest

import edsynth as eds
from ._utils import make_instance
from ._utils import random_dataset


def test_normalize_trigger():
    assert eds.normalize_trigger("  Tested \t Positive ") == "tested positive"


def _mention(event, text, trigger, origin=eds.Origin.SAMPLED):
    start = text.index(trigger)
    return eds.EventMention(event, trigger, start, start + len(trigger), origin)


def test_instances_sort_their_mentions():
    text = "Police arrested the suspect after the shooting."
    instance = eds.SyntheticInstance.build(
        "x", text, [_mention("Attack", text, "shooting"), _mention("Arrest-Jail", text, "arrested")]
    )
    assert instance.event_types == ["Arrest-Jail", "Attack"]
    eds.validate_instance(instance)


@pytest.mark.parametrize(
    "mention, fragment",
    [
        (eds.EventMention("Attack", "raid", 4, 40), "out of range"),
        (eds.EventMention("Attack", "raid", 3, 3), "out of range"),
        (eds.EventMention("Attack", "raid", 0, 4), "not the trigger"),
        (eds.EventMention("Parade", "raid", 4, 8), "unknown event type"),
    ],
)
def test_validate_instance_errors(ontology, mention, fragment):
    instance = eds.SyntheticInstance.build("bad", "The raid ended.", [mention])
    with pytest.raises(eds.ValidationError, match=fragment):
        eds.validate_instance(instance, ontology)


def test_duplicate_and_unsorted_mentions():
    raid = eds.EventMention("Attack", "raid", 4, 8)
    ended = eds.EventMention("Attack", "ended", 9, 14)
    with pytest.raises(eds.ValidationError, match="duplicate mention"):
        eds.validate_instance(eds.SyntheticInstance("x", "The raid ended.", (raid, raid)))
    with pytest.raises(eds.ValidationError, match="not sorted"):
        eds.validate_instance(eds.SyntheticInstance("x", "The raid ended.", (ended, raid)))
    same_span = eds.SyntheticInstance.build(
        "x", "The raid ended.", [raid, eds.EventMention("Arrest-Jail", "raid", 4, 8)]
    )
    eds.validate_instance(same_span)


def test_dataset_rejects_duplicate_ids(gold):
    with pytest.raises(eds.DuplicateIdError):
        eds.Dataset(instances=gold.instances + gold.instances[:1])


def test_stats_and_frame(gold):
    assert gold.stats == {"Arrest-Jail": 2, "Attack": 3, "Infect": 2}
    frame = gold.mention_frame()
    assert list(frame.columns) == ["instance_id", "event_type", "trigger", "start", "end", "origin"]
    assert len(frame) == 7
    assert set(frame["origin"]) == {"gold"}


def _pool(ontology, *event_sets):
    text = "The raid and the arrest and the infection."
    words = {"Attack": "raid", "Arrest-Jail": "arrest", "Infect": "infection"}
    return [
        eds.SyntheticInstance.build(
            f"p{index}", text, [_mention(event, text, words[event]) for event in events]
        )
        for index, events in enumerate(event_sets)
    ]


def test_greedy_prefers_instances_covering_more_events(ontology):
    pool = _pool(ontology, ["Attack"], ["Arrest-Jail"], ["Attack", "Arrest-Jail"])
    one = eds.greedy_sample(pool, ontology, 1)
    assert [i.id for i in one] == ["p2"]
    two = eds.greedy_sample(pool, ontology, 2)
    assert [i.id for i in two] == ["p2", "p0", "p1"]
    assert two.sample_stats == {
        "Attack": {"selected": 2, "target": 2, "shortfall": 0},
        "Arrest-Jail": {"selected": 2, "target": 2, "shortfall": 0},
        "Infect": {"selected": 0, "target": 2, "shortfall": 2},
    }
    assert two.ontology_digest == ontology.digest()


def test_greedy_ties_go_to_the_earliest_instance(ontology):
    pool = _pool(ontology, ["Infect"], ["Attack"], ["Attack"], ["Arrest-Jail"])
    assert [i.id for i in eds.greedy_sample(pool, ontology, 1)] == ["p1", "p3", "p0"]


def test_greedy_empty_pool_and_bad_n(ontology):
    empty = eds.greedy_sample([], ontology, 3)
    assert len(empty) == 0
    assert all(s["shortfall"] == 3 for s in empty.sample_stats.values())
    with pytest.raises(ValueError):
        eds.greedy_sample([], ontology, 0)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("n", [1, 2, 5])
def test_greedy_fills_every_reachable_quota(ontology, seed, n):
    rng = np.random.default_rng(seed)
    pool = list(random_dataset(rng, [f"r{i}" for i in range(12)]).instances)
    sampled = eds.greedy_sample(pool, ontology, n)
    ids = [i.id for i in sampled]
    assert len(ids) == len(set(ids))
    for event in ontology.names:
        available = sum(1 for i in pool if event in i.event_types)
        selected = sum(1 for i in sampled if event in i.event_types)
        assert selected == sampled.sample_stats[event]["selected"]
        assert min(selected, n) == min(available, n)


def test_greedy_pool_order_matters_only_for_ties(ontology):
    pool = _pool(ontology, ["Attack", "Infect"], ["Attack"], ["Attack", "Infect", "Arrest-Jail"])
    assert [i.id for i in eds.greedy_sample(pool, ontology, 1)] == ["p2"]
    assert [i.id for i in eds.greedy_sample(pool[::-1], ontology, 1)] == ["p2"]


def test_append_gold(ontology, gold):
    pool = _pool(ontology, ["Attack"])
    dataset = eds.append_gold(eds.Dataset(instances=tuple(pool)), gold, ontology)
    assert [i.id for i in dataset][:2] == ["p0", "gold-g1"]
    assert len(dataset) == 7
    assert all(
        m.origin == eds.Origin.GOLD for i in dataset.instances[1:] for m in i.mentions
    )


def test_append_gold_rejects_unknown_types(ontology):
    stray = make_instance("g9", "The parade went on.", [("Parade", "parade")])
    with pytest.raises(eds.ValidationError, match="Parade"):
        eds.append_gold(eds.Dataset(), [stray], ontology)


def test_append_gold_canonicalises_aliases(ontology):
    aliased = make_instance("g9", "The raid ended.", [("Conflict:Attack", "raid")])
    dataset = eds.append_gold(eds.Dataset(), [aliased], ontology)
    assert dataset.instances[0].mentions[0].event_type == "Attack"


def test_dataset_file_round_trip(gold, ontology, tmp_path):
    path = tmp_path / "dataset.jsonl"
    dataset = eds.Dataset(
        instances=gold.instances,
        ontology_digest=ontology.digest(),
        metadata={"model": "m", "seed": 7, "pipeline_version": "0.1.0", "ignored": True},
    )
    assert eds.write_dataset(dataset, path) == 6
    lines = path.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == {
        "_meta": {
            "ontology_digest": ontology.digest(),
            "model": "m",
            "seed": 7,
            "pipeline_version": "0.1.0",
        }
    }
    assert json.loads(lines[2]) == {
        "id": "g2",
        "text": "Some 3,000 people have been arrested in the campaigns.",
        "mentions": [
            {"type": "Arrest-Jail", "trigger": "arrested", "start": 28, "end": 36, "origin": "gold"}
        ],
    }
    loaded = eds.read_dataset(path, ontology)
    assert loaded.instances == gold.instances
    assert loaded.ontology_digest == ontology.digest()
    assert loaded.metadata == {"model": "m", "seed": 7, "pipeline_version": "0.1.0"}


def test_read_dataset_without_meta_row(tmp_path, ontology):
    path = tmp_path / "d.jsonl"
    path.write_text(
        '{"id": "a", "text": "The raid ended.", '
        '"mentions": [{"type": "conflict:attack", "trigger": "raid", "start": 4, "end": 8}]}\n',
        encoding="utf-8",
    )
    dataset = eds.read_dataset(path, ontology)
    assert dataset.ontology_digest == ""
    mention = dataset.instances[0].mentions[0]
    assert (mention.event_type, mention.origin) == ("Attack", eds.Origin.GOLD)


@pytest.mark.parametrize(
    "row, error",
    [
        ({"id": "a"}, eds.ParseError),
        ({"id": "a", "text": "x", "mentions": {}}, eds.ParseError),
        ({"id": "a", "text": "The raid.", "mentions": [{"type": "Attack", "start": 4, "end": 8}]}, eds.ParseError),
        ({"id": "a", "text": "The raid.", "mentions": [{"type": "Attack", "trigger": "raid", "start": "4", "end": 8}]}, eds.ParseError),
        ({"id": "a", "text": "The raid.", "mentions": [{"type": "Attack", "trigger": "raid", "start": 4, "end": 8, "origin": "dreamt"}]}, eds.ParseError),
        ({"id": "a", "text": "The raid.", "mentions": [{"type": "Attack", "trigger": "raid", "start": 3, "end": 7}]}, eds.ValidationError),
    ],
)
def test_read_dataset_errors(tmp_path, row, error):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps(row) + "\n", encoding="utf-8")
    with pytest.raises(error):
        eds.read_dataset(path)


def test_read_dataset_duplicate_ids(tmp_path):
    path = tmp_path / "d.jsonl"
    row = json.dumps({"id": "a", "text": "x", "mentions": []})
    path.write_text(f"{row}\n{row}\n", encoding="utf-8")
    with pytest.raises(eds.ValidationError, match="duplicate"):
        eds.read_dataset(path)


def test_prompt_digests_survive_the_file(gold, tmp_path):
    first, *rest = gold.instances
    tagged = replace(first, metadata={"prompt_digests": ["a" * 64, "b" * 64]})
    path = tmp_path / "dataset.jsonl"
    eds.write_dataset(eds.Dataset(instances=(tagged, *rest)), path)
    meta = json.loads(path.read_text(encoding="utf-8").splitlines()[0])["_meta"]
    assert meta["prompt_digests"] == {"g1": ["a" * 64, "b" * 64]}
    loaded = eds.read_dataset(path)
    assert loaded.instances[0].metadata == {"prompt_digests": ["a" * 64, "b" * 64]}
    assert all(i.metadata == {} for i in loaded.instances[1:])
    assert loaded.metadata == {}


@pytest.mark.parametrize(
    "digests",
    [["a" * 64], {"g1": "a" * 64}, {"g1": [1]}, {"nope": ["a" * 64]}],
)
def test_malformed_prompt_digests(gold, tmp_path, digests):
    path = tmp_path / "dataset.jsonl"
    eds.write_dataset(gold, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[0] = json.dumps({"_meta": {"ontology_digest": "", "prompt_digests": digests}})
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(eds.ParseError, match="prompt_digests"):
        eds.read_dataset(path)


WORDS = ("raid", "café", "東京で", "Straße", "naïve", "🎉", "shooting", "ĳssel", "x", "Ωmega")


def _random_instance(rng, index):
    words = [WORDS[int(k)] for k in rng.integers(len(WORDS), size=int(rng.integers(1, 9)))]
    passage = " ".join(words)
    offsets, start = [], 0
    for word in words:
        offsets.append((start, start + len(word)))
        start += len(word) + 1
    mentions = {}
    for _ in range(int(rng.integers(0, 4))):
        s, e = offsets[int(rng.integers(len(offsets)))]
        event = ("Attack", "Arrest-Jail", "Infect")[int(rng.integers(3))]
        origin = list(eds.Origin)[int(rng.integers(len(eds.Origin)))]
        mentions[(s, e, event)] = eds.EventMention(event, passage[s:e], s, e, origin)
    metadata = {}
    if rng.random() < 0.5:
        metadata["prompt_digests"] = [f"{int(d):064x}" for d in rng.integers(2**62, size=2)]
    return eds.SyntheticInstance.build(f"u{index}", passage, mentions.values(), metadata)


def test_random_unicode_round_trip(ontology, tmp_path):
    rng = np.random.default_rng(2024)
    instances = tuple(_random_instance(rng, i) for i in range(500))
    dataset = eds.Dataset(
        instances=instances,
        ontology_digest=ontology.digest(),
        metadata={"model": "m", "seed": 1, "pipeline_version": "0.1.0"},
    )
    path = tmp_path / "dataset.jsonl"
    assert eds.write_dataset(dataset, path) == 500
    loaded = eds.read_dataset(path, ontology)
    assert loaded == dataset
    assert [i.metadata for i in loaded] == [dict(i.metadata) for i in instances]
    for instance in loaded:
        for mention in instance.mentions:
            assert instance.passage[mention.start : mention.end] == mention.trigger
    eds.write_dataset(loaded, tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()
