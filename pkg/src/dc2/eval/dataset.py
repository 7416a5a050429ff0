from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from ..geometry import Region

CATEGORIES = (
    "FSP:attribute",
    "FSP:ocr",
    "FSP:visual_prompting",
    "FCP:map",
    "FCP:chart",
    "FCP:spatial",
)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkSample:
    id: str
    image: Path
    question: str
    options: Tuple[str, ...]
    answer: str
    category: str
    target_objects: Optional[Tuple[str, ...]] = None
    target_bbox: Optional[Region] = None

    def __post_init__(self) -> None:
        n = len(self.options)
        if n < 2:
            raise DatasetError(f"{self.id}: need at least two options")
        if len(set(self.options)) != n:
            raise DatasetError(f"{self.id}: options are not distinct")
        if len(self.answer) != 1 or not 0 <= ord(self.answer) - ord("A") < n:
            raise DatasetError(f"{self.id}: answer {self.answer!r} is not one of the {n} option letters")
        if self.category not in CATEGORIES:
            raise DatasetError(f"{self.id}: unknown category {self.category!r}")

    @property
    def gold_index(self) -> int:
        return ord(self.answer) - ord("A")

    @property
    def split(self) -> str:
        return self.category.split(":", 1)[0]

    @property
    def image_id(self) -> str:
        return self.image.stem

    @classmethod
    def from_json(cls, row: dict, base: Path = Path(".")) -> "BenchmarkSample":
        try:
            bbox = row.get("target_bbox")
            targets = row.get("target_objects")
            image = Path(row["image"])
            return cls(
                id=str(row["id"]),
                image=image if image.is_absolute() else base / image,
                question=row["question"],
                options=tuple(row["options"]),
                answer=row["answer"],
                category=row["category"],
                target_objects=tuple(targets) if targets is not None else None,
                target_bbox=Region(*bbox) if bbox is not None else None,
            )
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"malformed sample {row.get('id', '?')}: {exc}") from None


def load_dataset(path: Path | str) -> List[BenchmarkSample]:
    """Read JSON Lines; image paths are relative to the dataset file."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from None
    samples = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        samples.append(BenchmarkSample.from_json(row, path.parent))
    ids = [s.id for s in samples]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"{path}: duplicate sample ids")
    return samples
