"""Recursive quadtree division with similarity-based merging of siblings."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Set, Tuple

import numpy as np
from PIL import Image

from .geometry import Region, split_region
from .raster import resize

log = logging.getLogger(__name__)

FEATURE_SIDE = 32
# cosine distances at or below this count as zero (identical directions)
_ZERO_DIST = 1e-12


@dataclass(frozen=True, eq=False)
class PatchImage:
    pixels: np.ndarray  # (h, w, 3) uint8
    source_regions: Tuple[Region, ...]

    def __post_init__(self) -> None:
        if not self.source_regions:
            raise ValueError("source_regions must not be empty")
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"expected an (h, w, 3) raster, got shape {self.pixels.shape}")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def merged(self) -> bool:
        return len(self.source_regions) > 1

    @classmethod
    def from_array(cls, pixels: np.ndarray, origin: Tuple[int, int] = (0, 0)) -> "PatchImage":
        pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
        if pixels.ndim == 2:
            pixels = np.repeat(pixels[:, :, None], 3, axis=2)
        if pixels.size == 0:
            raise ValueError("empty image")
        h, w = pixels.shape[:2]
        return cls(pixels, (Region(origin[0], origin[1], w, h),))

    @classmethod
    def open(cls, path) -> "PatchImage":
        with Image.open(path) as im:
            return cls.from_array(np.asarray(im.convert("RGB")))


@dataclass(eq=False)
class PatchNode:
    patch: PatchImage
    layer: int
    children: List["PatchNode"] = field(default_factory=list)
    caption: Optional[str] = None
    objects: Optional[Set[str]] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self):
        """Pre-order traversal."""
        yield self
        for child in self.children:
            yield from child.walk()

    def post_order(self):
        for child in self.children:
            yield from child.post_order()
        yield self

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)


@dataclass(frozen=True)
class ClusterAssignment:
    clusters: Tuple[Tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.clusters)


def patch_feature(patch: PatchImage) -> np.ndarray:
    thumb = resize(patch.pixels, FEATURE_SIDE, FEATURE_SIDE)
    return thumb.astype(np.float64).reshape(-1) / 255.0


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0 if nu == nv else 1.0
    d = 1.0 - float(np.dot(u, v)) / (nu * nv)
    return 0.0 if d <= _ZERO_DIST else d


def distance_matrix(features: Sequence[np.ndarray]) -> np.ndarray:
    n = len(features)
    lengths = {len(f) for f in features}
    if len(lengths) > 1:
        raise ValueError(f"feature vectors differ in length: {sorted(lengths)}")
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = cosine_distance(features[i], features[j])
    return dist


def cluster_patches(features: Sequence[np.ndarray], theta: float) -> ClusterAssignment:
    """Average-linkage agglomerative clustering cut at distance ``theta``.

    Clusters keep merging while the closest pair is at most ``theta`` apart.
    Ties go to the pair whose smallest member indices come first.
    """
    if len(features) != 4:
        raise ValueError(f"expected four feature vectors, got {len(features)}")
    if theta < 0:
        raise ValueError("theta must be non-negative")
    dist = distance_matrix([np.asarray(f, dtype=np.float64) for f in features])

    clusters: List[List[int]] = [[i] for i in range(len(features))]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                ca, cb = clusters[a], clusters[b]
                d = sum(dist[i, j] for i in ca for j in cb) / (len(ca) * len(cb))
                if best is None or d < best[0]:
                    best = (d, a, b)
        d, a, b = best
        if d > theta:
            break
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    clusters.sort(key=lambda c: c[0])
    return ClusterAssignment(tuple(tuple(c) for c in clusters))


def merge_cluster(members: Sequence[PatchImage]) -> PatchImage:
    if not members:
        raise ValueError("cannot merge an empty cluster")
    if len(members) == 1:
        return members[0]
    first = members[0]
    acc = np.zeros(first.pixels.shape, dtype=np.float64)
    for m in members:
        acc += resize(m.pixels, first.width, first.height)
    mean = np.floor(acc / len(members) + 0.5)
    regions = tuple(r for m in members for r in m.source_regions)
    return PatchImage(mean.astype(np.uint8), regions)


def crop_patch(patch: PatchImage) -> List[PatchImage]:
    """Cut a patch into its four quadrants.

    Each quadrant's source regions are the same quadrant of every region the
    parent was merged from.
    """
    raster = Region(0, 0, patch.width, patch.height)
    quads = split_region(raster)
    per_source = [split_region(r) for r in patch.source_regions]
    out = []
    for qi, q in enumerate(quads):
        pixels = patch.pixels[q.y:q.bottom, q.x:q.right]
        out.append(PatchImage(pixels, tuple(s[qi] for s in per_source)))
    return out


FeatureFn = Callable[[PatchImage], np.ndarray]


def build_patch_tree(
    image: PatchImage,
    patch_size: int = 336,
    theta: float = 0.1,
    max_depth: int = 4,
    feature_fn: FeatureFn = patch_feature,
) -> PatchNode:
    if patch_size < 1:
        raise ValueError("patch_size must be >= 1")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if image.pixels.size == 0:
        raise ValueError("empty image")

    def grow(patch: PatchImage, layer: int) -> PatchNode:
        node = PatchNode(patch, layer)
        if patch.width <= patch_size or patch.height <= patch_size or layer >= max_depth:
            return node
        quads = crop_patch(patch)
        assignment = cluster_patches([feature_fn(q) for q in quads], theta)
        for group in assignment.clusters:
            merged = merge_cluster([quads[i] for i in group])
            node.children.append(grow(merged, layer + 1))
        return node

    root = grow(image, 0)
    log.debug("patch tree: %d nodes", sum(1 for _ in root.walk()))
    return root


def count_nodes(root: PatchNode) -> int:
    return sum(1 for _ in root.walk())
