"""Product-description corpus: JSON Lines ingestion and seeded per-category sampling."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

REQUIRED_FIELDS = ("id", "category", "description")
SAMPLING_STRATEGIES = ("uniform",)


class IngestError(ValueError):
    def __init__(self, line: int, reason: str, detail: str = ""):
        message = f"line {line}: {reason}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.line = line
        self.reason = reason


class UnknownCategory(KeyError):
    def __str__(self) -> str:
        return f"unknown category: {self.args[0]!r}"


@dataclass(frozen=True)
class ProductRecord:
    id: str
    category: str
    description: str
    source: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"id": self.id, "category": self.category, "description": self.description}
        if self.source is not None:
            out["source"] = self.source
        return out


@dataclass(frozen=True)
class Corpus:
    records: tuple[ProductRecord, ...] = ()
    categories: dict[str, tuple[int, ...]] = field(default_factory=dict, compare=False)

    @classmethod
    def from_records(cls, records) -> "Corpus":
        records = tuple(records)
        seen: set[str] = set()
        index: dict[str, list[int]] = {}
        for i, rec in enumerate(records):
            if rec.id in seen:
                raise ValueError(f"duplicate product id {rec.id!r}")
            seen.add(rec.id)
            index.setdefault(rec.category, []).append(i)
        return cls(records, {k: tuple(v) for k, v in index.items()})

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def category_names(self) -> list[str]:
        return sorted(self.categories)

    def in_category(self, category: str) -> list[ProductRecord]:
        return [self.records[i] for i in self.categories.get(category, ())]


def parse_corpus(text: str) -> Corpus:
    records = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(lineno, "malformed-json", exc.msg) from None
        if not isinstance(obj, dict):
            raise IngestError(lineno, "malformed-json", "expected a JSON object")
        for key in REQUIRED_FIELDS:
            if not isinstance(obj.get(key), str):
                raise IngestError(lineno, "missing-field", key)
        if not obj["id"].strip():
            raise IngestError(lineno, "empty-id")
        if not obj["description"].strip():
            raise IngestError(lineno, "empty-description")
        if obj["id"] in seen:
            raise IngestError(lineno, "duplicate-id", f"{obj['id']!r} first seen on line {seen[obj['id']]}")
        seen[obj["id"]] = lineno
        source = obj.get("source")
        records.append(ProductRecord(obj["id"], obj["category"], obj["description"], None if source is None else str(source)))
    return Corpus.from_records(records)


def load_corpus(path: Union[str, Path]) -> Corpus:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


def sample_products(c: Corpus, category: str, n: int, seed: int, strategy: str = "uniform") -> list[ProductRecord]:
    """Up to ``n`` records of ``category`` drawn without replacement.

    The draw is a prefix of a seeded permutation, so growing ``n`` extends the
    previous sample rather than reshuffling it.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if strategy not in SAMPLING_STRATEGIES:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    if category not in c.categories:
        if len(c):
            raise UnknownCategory(category)
        return []
    indices = list(c.categories[category])
    random.Random(seed).shuffle(indices)
    return [c.records[i] for i in indices[:n]]
