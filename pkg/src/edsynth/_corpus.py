"""Unlabeled target-domain text."""

import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
import pandas as pd
import pandera as pa

from ._errors import DuplicateIdError
from ._errors import EmptyCorpusError
from ._errors import ParseError
from ._io import TextFileType
from ._io import iter_jsonl
from ._io import iter_lines
from ._io import write_jsonl


logger = logging.getLogger(__name__)

CORPUS_SCHEMA = pa.DataFrameSchema(
    {
        "id": pa.Column(str, unique=True),
        "text": pa.Column(str, pa.Check(lambda s: s.str.strip().str.len() > 0)),
        "source": pa.Column(str),
    },
    strict=True,
    ordered=True,
)


@dataclass(frozen=True)
class UnlabeledSentence:
    id: str
    text: str
    source: str = ""


@dataclass(frozen=True)
class Corpus:
    sentences: Tuple[UnlabeledSentence, ...]
    language: str = "en"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[UnlabeledSentence]:
        return iter(self.sentences)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "id": [s.id for s in self.sentences],
                "text": [s.text for s in self.sentences],
                "source": [s.source for s in self.sentences],
            },
            columns=["id", "text", "source"],
        ).astype(str)
        return CORPUS_SCHEMA.validate(frame)

    def digest(self) -> str:
        hasher = hashlib.sha256()
        for sentence in self.sentences:
            hasher.update(sentence.id.encode("utf-8") + b"\x00")
            hasher.update(sentence.text.encode("utf-8") + b"\x00")
        return hasher.hexdigest()


def _check_unique(sentences: List[UnlabeledSentence], path: Path) -> None:
    seen = set()
    for sentence in sentences:
        if sentence.id in seen:
            raise DuplicateIdError(sentence.id, str(path))
        seen.add(sentence.id)


def _dedupe(sentences: List[UnlabeledSentence]) -> List[UnlabeledSentence]:
    seen = set()
    kept = []
    for sentence in sentences:
        if sentence.text in seen:
            continue
        seen.add(sentence.text)
        kept.append(sentence)
    if len(kept) < len(sentences):
        logger.info("dropped %d exact-duplicate sentences", len(sentences) - len(kept))
    return kept


def load_corpus(
    path: Union[str, Path],
    format: Optional[Union[str, TextFileType]] = None,
    *,
    dedupe: bool = False,
    language: str = "en",
) -> Corpus:
    """Read a jsonl or plain-text corpus, keeping file order.

    Plain files hold one sentence per line. Rows without an explicit id get
    ``<filename>#<line-number>``. Blank lines are skipped.

    Raises:
        ParseError: A jsonl row is malformed or lacks ``text``.
        DuplicateIdError: Two rows share an id.
    """
    path = Path(path)
    filetype = TextFileType.from_path(path) if format is None else TextFileType(format)
    sentences: List[UnlabeledSentence] = []
    if filetype == TextFileType.PLAIN:
        for line_number, text in iter_lines(path):
            sentences.append(
                UnlabeledSentence(id=f"{path.name}#{line_number}", text=text, source="")
            )
    else:
        for line_number, row in iter_jsonl(path):
            text = row.get("text")
            if not isinstance(text, str):
                raise ParseError("row has no string field 'text'", path, line_number)
            if not text.strip():
                continue
            sentence_id = row.get("id")
            if sentence_id is None:
                sentence_id = f"{path.name}#{line_number}"
            sentences.append(
                UnlabeledSentence(
                    id=str(sentence_id), text=text, source=str(row.get("source") or "")
                )
            )
    _check_unique(sentences, path)
    if dedupe:
        sentences = _dedupe(sentences)
    corpus = Corpus(tuple(sentences), language=language)
    corpus.to_frame()
    logger.info("loaded %d sentences from %s", len(corpus), path)
    return corpus


def write_corpus(corpus: Corpus, path: Union[str, Path]) -> int:
    return write_jsonl(
        path,
        ({"id": s.id, "text": s.text, "source": s.source} for s in corpus.sentences),
    )


def sample_corpus(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Seeded subset of ``ceil(fraction * len(corpus))`` sentences in original order."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot sample from an empty corpus")
    size = math.ceil(round(fraction * len(corpus), 9))
    if size >= len(corpus):
        return corpus
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(corpus), size=size, replace=False))
    return Corpus(
        tuple(corpus.sentences[i] for i in picked), language=corpus.language
    )
