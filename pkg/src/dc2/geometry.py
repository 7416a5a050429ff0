"""Rectangle arithmetic shared by the whole pipeline.

Regions are ``(x, y, w, h)`` in root-image pixel coordinates with the origin
at the top-left corner.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple


@dataclass(frozen=True, order=True)
class Region:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"region must have positive size, got {self.w}x{self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)

    def contains(self, other: "Region") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def intersection(self, other: "Region") -> Optional["Region"]:
        x0, y0 = max(self.x, other.x), max(self.y, other.y)
        x1, y1 = min(self.right, other.right), min(self.bottom, other.bottom)
        if x1 <= x0 or y1 <= y0:
            return None
        return Region(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class ScoredRegion:
    """A region tagged with the recursion layer it came from.

    ``tiebreak`` is an insertion index; NMS uses it to order regions that sit
    on the same layer.
    """

    region: Region
    layer: int
    tiebreak: int = 0

    def priority(self) -> Tuple[int, int]:
        return (-self.layer, self.tiebreak)


def split_region(parent: Region) -> List[Region]:
    """Split into top-left, top-right, bottom-left, bottom-right quadrants.

    Odd sizes are cut at the floor midpoint, so the right and bottom
    quadrants take the extra pixel.
    """
    if parent.w < 2 or parent.h < 2:
        raise ValueError(f"unsplittable region: {parent.as_tuple()}")
    left_w = parent.w // 2
    top_h = parent.h // 2
    right_w = parent.w - left_w
    bottom_h = parent.h - top_h
    mx = parent.x + left_w
    my = parent.y + top_h
    return [
        Region(parent.x, parent.y, left_w, top_h),
        Region(mx, parent.y, right_w, top_h),
        Region(parent.x, my, left_w, bottom_h),
        Region(mx, my, right_w, bottom_h),
    ]


def intersection_area(a: Region, b: Region) -> int:
    iw = min(a.right, b.right) - max(a.x, b.x)
    ih = min(a.bottom, b.bottom) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0
    return iw * ih


def iou(a: Region, b: Region) -> float:
    inter = intersection_area(a, b)
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def nms(candidates: Iterable[ScoredRegion], iou_threshold: float = 0.5) -> List[ScoredRegion]:
    """Greedy non-maximum suppression, deepest layer first.

    A candidate is dropped when its IoU with an already kept region reaches
    ``iou_threshold``.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    ordered = sorted(candidates, key=ScoredRegion.priority)
    kept: List[ScoredRegion] = []
    for cand in ordered:
        if all(iou(cand.region, k.region) < iou_threshold for k in kept):
            kept.append(cand)
    return kept

