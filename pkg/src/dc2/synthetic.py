"""Synthetic high-resolution fixtures for the mock backend.

Each canvas is a grid of saturated background cells. A few objects sit
inside single cells, drawn as fine checkerboards whose colour only survives
at native resolution (see :mod:`dc2.backend.mock`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from PIL import Image

from .backend.mock import PALETTE, MockObject, MockScene
from .geometry import Region

BACKGROUND_COLORS: Tuple[Tuple[int, int, int], ...] = (
    (200, 20, 60),
    (20, 160, 160),
    (120, 40, 200),
    (150, 220, 20),
    (230, 190, 20),
    (20, 40, 140),
    (210, 30, 190),
    (20, 120, 40),
)

OBJECT_NAMES = (
    "hydrant", "bench", "kite", "umbrella", "mailbox",
    "bicycle", "suitcase", "balloon", "lamp", "sign",
)

QUESTION = "What is the color of the {name}?"


def cell_background(rng: np.random.Generator, size: int, cell: int) -> np.ndarray:
    n = -(-size // cell)
    picks = rng.integers(0, len(BACKGROUND_COLORS), size=(n, n))
    colors = np.array(BACKGROUND_COLORS, dtype=np.uint8)[picks]
    big = np.repeat(np.repeat(colors, cell, axis=0), cell, axis=1)
    return np.ascontiguousarray(big[:size, :size])


def random_blocky_image(rng: np.random.Generator, size: int = 1344, grid: int = 8) -> np.ndarray:
    """Random mosaic for clustering property checks.

    Cells repeat a small colour set so sibling quadrants are sometimes
    identical, sometimes close and sometimes far apart.
    """
    base = rng.integers(0, 256, size=(6, 3))
    picks = rng.integers(0, len(base), size=(grid, grid))
    jitter = rng.integers(-12, 13, size=(grid, grid, 3)) * (rng.random((grid, grid, 1)) < 0.3)
    cells = np.clip(base[picks] + jitter, 0, 255).astype(np.uint8)
    step = -(-size // grid)
    big = np.repeat(np.repeat(cells, step, axis=0), step, axis=1)
    return np.ascontiguousarray(big[:size, :size])


@dataclass
class SceneSample:
    scene: MockScene
    pixels: np.ndarray
    target: MockObject
    options: List[str]
    answer: str


def make_scene(
    rng: np.random.Generator,
    size: int = 2688,
    cell: int = 336,
    n_objects: int = 3,
    min_side: int = 256,
    max_side: int = 300,
) -> SceneSample:
    """One canvas with ``n_objects`` objects, each in a different quadrant.

    Objects fill most of one ``cell`` so the leaf patch covering an object
    overlaps it with IoU above one half.
    """
    if n_objects > 4:
        raise ValueError("at most one object per quadrant")
    background = cell_background(rng, size, cell)
    cells_per_side = size // cell
    half = cells_per_side // 2
    quadrants = rng.permutation(4)[:n_objects]
    names = rng.choice(OBJECT_NAMES, size=n_objects, replace=False)
    colors = list(PALETTE)
    objects = []
    for q, name in zip(quadrants, names):
        cx = rng.integers(0, half) + (q % 2) * half
        cy = rng.integers(0, half) + (q // 2) * half
        side = int(rng.integers(min_side, max_side + 1))
        ox = int(cx * cell + rng.integers(0, cell - side + 1))
        oy = int(cy * cell + rng.integers(0, cell - side + 1))
        color = colors[int(rng.integers(0, len(colors)))]
        objects.append(MockObject(str(name), Region(ox, oy, side, side), color))
    scene = MockScene(tuple(objects), size, size)
    target = objects[0]
    options = list(colors)
    rng.shuffle(options)
    return SceneSample(scene, scene.render(background), target, options, target.attribute)


def write_suite(
    out_dir: Path | str,
    n: int = 30,
    size: int = 2688,
    seed: int = 0,
    category: str = "FSP:attribute",
) -> Path:
    """Write PNG canvases, ``dataset.jsonl`` and ``scenes.json``; return the dataset path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    scenes: Dict[str, dict] = {}
    rows = []
    for i in range(n):
        sample = make_scene(rng, size=size)
        stem = f"synth_{i:03d}"
        Image.fromarray(sample.pixels).save(out / "images" / f"{stem}.png", compress_level=1)
        scenes[stem] = sample.scene.to_json()
        t = sample.target
        rows.append({
            "id": stem,
            "image": f"images/{stem}.png",
            "question": QUESTION.format(name=t.name),
            "options": sample.options,
            "answer": "ABCD"[sample.options.index(sample.answer)],
            "category": category,
            "target_objects": [t.name],
            "target_bbox": list(t.region.as_tuple()),
        })
    dataset = out / "dataset.jsonl"
    with open(dataset, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    with open(out / "scenes.json", "w", encoding="utf-8") as fh:
        json.dump(scenes, fh)
    return dataset


def load_scenes(path: Path | str) -> MockScene | Dict[str, MockScene]:
    """Read a single scene or an ``image_id -> scene`` mapping."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "objects" in data:
        return MockScene.from_json(data)
    return {k: MockScene.from_json(v) for k, v in data.items()}
