"""Counters collected while a run executes, written out as the run report."""

from collections import Counter
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Union

from ._io import write_json


class RunReport:
    def __init__(self, **fields: Any) -> None:
        self.counters: Counter[str] = Counter()
        self.fields: Dict[str, Any] = dict(fields)

    def incr(self, key: str, amount: int = 1) -> None:
        self.counters[key] += amount

    def set(self, key: str, value: Any) -> None:
        self.fields[key] = value

    def __getitem__(self, key: str) -> int:
        return self.counters[key]

    def to_dict(self) -> Dict[str, Any]:
        payload = dict(self.fields)
        payload["counts"] = dict(sorted(self.counters.items()))
        return payload

    def write(self, path: Union[str, Path]) -> None:
        write_json(path, self.to_dict())
