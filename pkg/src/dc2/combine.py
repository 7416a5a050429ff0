"""Hallucination filter and the per-image visual memory."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, AbstractSet, Dict, Iterable, List, Optional, Set, Tuple

from .geometry import Region, ScoredRegion, nms

if TYPE_CHECKING:
    from .divide import PatchNode

DEFAULT_NMS_THRESHOLD = 0.5


class EmptyNameError(ValueError):
    pass


def normalize_name(raw: str) -> str:
    name = " ".join(raw.lower().split())
    if not name:
        raise EmptyNameError("empty name")
    return name


def filter_objects(parent_objects: AbstractSet[str], child_objects: AbstractSet[str]) -> Set[str]:
    """Keep only objects seen both in a patch and in at least one of its children."""
    return set(parent_objects) & set(child_objects)


@dataclass(frozen=True)
class ObjectRecord:
    name: str
    region: Region
    layer: int

    def to_json(self) -> dict:
        x, y, w, h = self.region.as_tuple()
        return {"name": self.name, "x": x, "y": y, "w": w, "h": h, "layer": self.layer}


@dataclass
class VisualMemory:
    """Object name to the patch regions it was observed in.

    Regions for one name are kept mutually non-overlapping (IoU below
    ``nms_threshold``) by re-running NMS on every insert.
    """

    nms_threshold: float = DEFAULT_NMS_THRESHOLD
    image_id: Optional[str] = None
    root_size: Optional[Tuple[int, int]] = None
    _entries: Dict[str, List[ScoredRegion]] = field(default_factory=dict)
    _counter: int = 0

    def add(self, name: str, region: Region, layer: int) -> None:
        self.add_many(name, [(region, layer)])

    def add_many(self, name: str, placements: Iterable[Tuple[Region, int]]) -> None:
        cands = list(self._entries.get(name, []))
        for region, layer in placements:
            if self.root_size is not None:
                w, h = self.root_size
                if not Region(0, 0, w, h).contains(region):
                    raise ValueError(f"region {region.as_tuple()} outside the {w}x{h} root image")
            cands.append(ScoredRegion(region, layer, self._counter))
            self._counter += 1
        self._entries[name] = nms(cands, self.nms_threshold)

    def names(self) -> List[str]:
        return sorted(self._entries)

    def records(self, name: Optional[str] = None) -> List[ObjectRecord]:
        names = [name] if name is not None else self.names()
        return [
            ObjectRecord(n, s.region, s.layer)
            for n in names
            for s in self._entries.get(n, [])
        ]

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def to_json(self) -> dict:
        return {
            "image_id": self.image_id,
            "root_size": list(self.root_size) if self.root_size else None,
            "nms_threshold": self.nms_threshold,
            "records": [r.to_json() for r in self.records()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def save(self, path: os.PathLike | str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_json(cls, data: dict) -> "VisualMemory":
        size = data.get("root_size")
        mem = cls(
            nms_threshold=data.get("nms_threshold", DEFAULT_NMS_THRESHOLD),
            image_id=data.get("image_id"),
            root_size=tuple(size) if size else None,
        )
        for rec in data["records"]:
            mem.add(normalize_name(rec["name"]), Region(rec["x"], rec["y"], rec["w"], rec["h"]), int(rec["layer"]))
        return mem

    @classmethod
    def load(cls, path: os.PathLike | str) -> "VisualMemory":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def store_objects(memory: VisualMemory, objects: Iterable[str], node: "PatchNode") -> VisualMemory:
    """Record each object at every pre-merge region of ``node``."""
    placements = [(r, node.layer) for r in node.patch.source_regions]
    for name in sorted(objects):
        memory.add_many(name, placements)
    return memory


def combine_tree(memory: VisualMemory, root: "PatchNode") -> VisualMemory:
    """Filter and store every node of a conquered tree, children first.

    Leaves store their raw objects; inner nodes keep only what one of their
    children also reported.
    """
    for node in root.post_order():
        objects = node.objects or set()
        if not node.is_leaf:
            seen_below: Set[str] = set()
            for child in node.children:
                seen_below |= child.objects or set()
            objects = filter_objects(objects, seen_below)
        store_objects(memory, objects, node)
    return memory
