import json
from enum import Enum
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Iterable
from typing import Iterator
from typing import Tuple
from typing import Union

from ._errors import ParseError


PathLike = Union[str, Path]


class TextFileType(Enum):
    JSONL = "jsonl"
    PLAIN = "plain"

    @classmethod
    def from_path(cls, path: PathLike) -> "TextFileType":
        suffix = Path(path).suffix.lower()
        for filetype, extensions in EXTENSION_MAP.items():
            if suffix in extensions:
                return filetype
        return cls.PLAIN


EXTENSION_MAP = {
    TextFileType.JSONL: (".jsonl", ".ndjson"),
    TextFileType.PLAIN: (".txt", ""),
}


def dumps_row(row: Dict[str, Any]) -> str:
    """Serialize one row the same way every time: UTF-8, compact, insertion-ordered keys."""
    return json.dumps(row, ensure_ascii=False, separators=(",", ":"))


def _decoded_lines(path: Path) -> Iterator[Tuple[int, str]]:
    """Yield ``(line_number, line)``, decoding UTF-8 one line at a time."""
    with open(path, "rb") as file:
        for line_number, raw in enumerate(file, start=1):
            try:
                yield line_number, raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8 ({exc.reason})", path, line_number) from exc


def iter_jsonl(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """Yield ``(line_number, row)`` for every nonblank line of a jsonl file."""
    path = Path(path)
    for line_number, line in _decoded_lines(path):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", path, line_number) from exc
        if not isinstance(row, dict):
            raise ParseError("expected a JSON object", path, line_number)
        yield line_number, row


def iter_lines(path: PathLike) -> Iterator[Tuple[int, str]]:
    """Yield ``(line_number, stripped_line)`` for every nonblank line of a text file."""
    for line_number, line in _decoded_lines(Path(path)):
        text = line.strip()
        if text:
            yield line_number, text


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        for row in rows:
            file.write(dumps_row(row) + "\n")
            count += 1
    return count


def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as file:
            return json.load(file)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", path, exc.lineno) from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"invalid UTF-8 ({exc.reason})", path) from exc


def write_json(path: PathLike, payload: Any) -> None:
    """Pretty JSON with sorted keys, used for reports and lexicons."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        json.dump(payload, file, ensure_ascii=False, indent=2, sort_keys=True)
        file.write("\n")
