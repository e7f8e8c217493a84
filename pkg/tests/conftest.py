from pathlib import Path

import pytest

import edsynth as eds
from ._utils import ScriptedBackend
from ._utils import gold_dataset
from ._utils import no_sleep


@pytest.fixture
def ontology_path(shared_datadir):
    return Path(shared_datadir) / "ontology.json"


@pytest.fixture
def corpus_path(shared_datadir):
    return Path(shared_datadir) / "corpus.jsonl"


@pytest.fixture
def ontology(ontology_path):
    return eds.load_ontology(ontology_path)


@pytest.fixture
def corpus(corpus_path):
    return eds.load_corpus(corpus_path)


@pytest.fixture
def templates():
    return eds.TemplateSet.load()


@pytest.fixture
def backend():
    return ScriptedBackend()


@pytest.fixture
def gateway(backend):
    return eds.Gateway(backend, eds.GenerationConfig(parallelism=4), sleep=no_sleep)


@pytest.fixture
def report():
    return eds.RunReport()


@pytest.fixture
def gold(ontology):
    return gold_dataset(ontology.digest())


@pytest.fixture
def gold_path(tmp_path, gold):
    path = tmp_path / "gold.jsonl"
    eds.write_dataset(gold, path)
    return path


@pytest.fixture
def run_config(tmp_path, ontology_path, corpus_path):
    def _run_config(**overrides):
        values = {
            "ontology": ontology_path,
            "corpus": corpus_path,
            "out_dir": tmp_path / "out",
            "t": 3,
            "n": 3,
            "seed": 7,
        }
        values.update(overrides)
        return eds.load_run_config(None, values)

    return _run_config
