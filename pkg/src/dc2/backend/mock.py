"""Deterministic stand-in for a vision-language model.

The mock knows a ground-truth scene per image. Object *names* come from
geometry: an object is mentioned when it overlaps the region the request's
image depicts. Object *colours* come from the pixels actually received, so
a cue destroyed by downsampling or patch averaging is really lost.

Objects are drawn as a one-pixel checkerboard of a palette colour and its
complement; any antialiased downscale turns them grey.
"""
from __future__ import annotations

import json
import math
import re
import threading
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .. import prompts
from ..geometry import Region
from ..raster import decode_png
from .base import ChatRequest, ChatResponse

EMPTY_CAPTION = "An empty region."

PALETTE: Dict[str, Tuple[int, int, int]] = {
    "red": (230, 30, 30),
    "green": (30, 200, 30),
    "blue": (30, 60, 230),
    "orange": (240, 120, 0),
}
COLOR_TOLERANCE = 48
# share of footprint pixels that must match one palette colour
MIN_COLOR_SHARE = 0.25


@dataclass(frozen=True)
class MockObject:
    name: str
    region: Region
    attribute: str

    def to_json(self) -> dict:
        return {"name": self.name, "region": list(self.region.as_tuple()), "attribute": self.attribute}

    @classmethod
    def from_json(cls, data: dict) -> "MockObject":
        return cls(data["name"], Region(*data["region"]), data["attribute"])


@dataclass(frozen=True)
class MockScene:
    objects: Tuple[MockObject, ...]
    width: int
    height: int

    def __post_init__(self) -> None:
        canvas = Region(0, 0, self.width, self.height)
        for obj in self.objects:
            if not canvas.contains(obj.region):
                raise ValueError(f"object {obj.name!r} at {obj.region.as_tuple()} lies outside the canvas")

    def render(self, background: Optional[np.ndarray] = None) -> np.ndarray:
        if background is None:
            canvas = np.full((self.height, self.width, 3), 200, dtype=np.uint8)
        else:
            canvas = np.array(background, dtype=np.uint8, copy=True)
        for obj in self.objects:
            draw_object(canvas, obj)
        return canvas

    def to_json(self) -> dict:
        return {"width": self.width, "height": self.height, "objects": [o.to_json() for o in self.objects]}

    @classmethod
    def from_json(cls, data: dict) -> "MockScene":
        return cls(tuple(MockObject.from_json(o) for o in data["objects"]), data["width"], data["height"])


def draw_object(canvas: np.ndarray, obj: MockObject) -> None:
    color = np.array(PALETTE.get(obj.attribute, (128, 128, 128)), dtype=np.uint8)
    r = obj.region
    yy, xx = np.mgrid[r.y:r.bottom, r.x:r.right]
    even = ((xx + yy) % 2 == 0)[..., None]
    canvas[r.y:r.bottom, r.x:r.right] = np.where(even, color, 255 - color)


def perceive_color(pixels: np.ndarray) -> Optional[str]:
    if pixels.size == 0:
        return None
    flat = pixels.reshape(-1, 3).astype(np.int16)
    best, best_count = None, 0
    for name, rgb in PALETTE.items():
        near = np.abs(flat - np.array(rgb, dtype=np.int16)).max(axis=1) <= COLOR_TOLERANCE
        count = int(near.sum())
        if count > best_count:
            best, best_count = name, count
    if best_count < MIN_COLOR_SHARE * len(flat):
        return None
    return best


class SystemClock:
    def now(self) -> float:
        return time.perf_counter()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class SimulatedClock:
    """Clock that only moves when something sleeps on it."""

    def __init__(self) -> None:
        self._t = 0.0
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._t

    def sleep(self, seconds: float) -> None:
        with self._lock:
            self._t += seconds


Mention = Tuple[Optional[str], str]  # (colour or None, name)

_OPTION_LINE = re.compile(r"^([A-Z])\.\s+(.*\S)\s*$", re.MULTILINE)


class MockBackend:
    def __init__(
        self,
        scenes: Union[MockScene, Mapping[str, MockScene], None] = None,
        min_overlap: float = 0.0,
        perceive_pixels: bool = True,
        latency: float = 0.0,
        clock=None,
        vocabulary: Iterable[str] = (),
    ) -> None:
        if isinstance(scenes, MockScene):
            self._default: Optional[MockScene] = scenes
            self._scenes: Dict[str, MockScene] = {}
        else:
            self._default = None
            self._scenes = dict(scenes or {})
        self.min_overlap = min_overlap
        self.perceive_pixels = perceive_pixels
        self.latency = latency
        self.clock = clock or SystemClock()
        names = {o.name for s in self._all_scenes() for o in s.objects} | set(vocabulary)
        # longest first so "fire hydrant" wins over "hydrant"
        self.vocabulary = sorted(names, key=lambda n: (-len(n), n))
        self._leaf_prompts = {prompts.leaf_prompt(p) for p in prompts.LEAF_PRESETS}
        self._non_leaf_head = prompts.load("non_leaf").split("{captions}")[0]
        self._inference_head, self._inference_tail = prompts.load("inference").split("{question}")
        self._lock = threading.Lock()
        self.calls = 0

    def _all_scenes(self) -> List[MockScene]:
        scenes = list(self._scenes.values())
        if self._default is not None:
            scenes.append(self._default)
        return scenes

    def scene_for(self, request: ChatRequest) -> Optional[MockScene]:
        if request.image_id is not None and request.image_id in self._scenes:
            return self._scenes[request.image_id]
        return self._default

    # -- dispatch -----------------------------------------------------------

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
        if self.latency:
            self.clock.sleep(self.latency)
        text = self._reply(request)
        logprobs = [0.0] * max(1, len(text.split())) if request.want_logprobs else None
        return ChatResponse(text, logprobs)

    def _reply(self, request: ChatRequest) -> str:
        if request.system == prompts.extraction_system():
            return self._extract(request.user_text)
        if request.user_text in self._leaf_prompts:
            return caption_from_mentions(self.visible(request))
        if request.user_text.startswith(self._non_leaf_head):
            return caption_from_mentions(self.mentions_in(request.user_text[len(self._non_leaf_head):]))
        if request.user_text.startswith(self._inference_head) and request.user_text.endswith(self._inference_tail):
            question = request.user_text[len(self._inference_head):-len(self._inference_tail)]
            return self._describe(request, question)
        return self._answer(request)

    # -- perception ---------------------------------------------------------

    def visible(self, request: ChatRequest) -> List[Mention]:
        scene = self.scene_for(request)
        if scene is None or request.image is None:
            return []
        pixels = decode_png(request.image)
        views = request.regions or (Region(0, 0, scene.width, scene.height),)
        out: List[Mention] = []
        seen = set()
        for obj in scene.objects:
            color = None
            present = False
            for view in views:
                ov = obj.region.intersection(view)
                if ov is None or ov.area / obj.region.area <= self.min_overlap:
                    continue
                present = True
                if color is None:
                    color = self._attribute(obj, ov, view, pixels)
            if present and (color, obj.name) not in seen:
                seen.add((color, obj.name))
                out.append((color, obj.name))
        return out

    def _attribute(self, obj: MockObject, ov: Region, view: Region, pixels: np.ndarray) -> Optional[str]:
        if obj.attribute not in PALETTE or not self.perceive_pixels:
            return obj.attribute
        h, w = pixels.shape[:2]
        sx, sy = w / view.w, h / view.h
        x0 = max(0, math.floor((ov.x - view.x) * sx))
        x1 = min(w, math.ceil((ov.right - view.x) * sx))
        y0 = max(0, math.floor((ov.y - view.y) * sy))
        y1 = min(h, math.ceil((ov.bottom - view.y) * sy))
        return perceive_color(pixels[y0:y1, x0:x1])

    def mentions_in(self, text: str) -> List[Mention]:
        if not self.vocabulary:
            return []
        colors = "|".join(map(re.escape, PALETTE))
        attrs = {o.attribute for s in self._all_scenes() for o in s.objects} - set(PALETTE)
        if attrs:
            colors += "|" + "|".join(map(re.escape, sorted(attrs, key=len, reverse=True)))
        names = "|".join(map(re.escape, self.vocabulary))
        pattern = re.compile(rf"\b(?:({colors})\s+)?({names})\b", re.IGNORECASE)
        out: List[Mention] = []
        for m in pattern.finditer(text):
            mention = (m.group(1).lower() if m.group(1) else None, m.group(2).lower())
            if mention not in out:
                out.append(mention)
        return out

    def names_in(self, text: str) -> List[str]:
        found = []
        lowered = text.lower()
        for name in self.vocabulary:
            m = re.search(rf"\b{re.escape(name)}s?\b", lowered)
            if m and not any(name in f and name != f for f, _ in found):
                found.append((name, m.start()))
        return [n for n, _ in sorted(found, key=lambda t: t[1])]

    # -- replies ------------------------------------------------------------

    def _extract(self, user_text: str) -> str:
        marker = 'Sentence: "'
        start = user_text.rfind(marker)
        sentence = user_text[start + len(marker):] if start >= 0 else user_text
        end = sentence.rfind('"')
        if end >= 0:
            sentence = sentence[:end]
        return json.dumps({"object_list": self.names_in(sentence)})

    def _describe(self, request: ChatRequest, question: str) -> str:
        targets = set(self.names_in(question))
        found = [(c, n) for c, n in self.visible(request) if n in targets and c is not None]
        if not found:
            return "NONE"
        return " ".join(f"The {n} in this patch is {c}: a {c} {n}." for c, n in found)

    def _answer(self, request: ChatRequest) -> str:
        text = request.user_text
        options = _OPTION_LINE.findall(text)
        question = text[: _OPTION_LINE.search(text).start()] if options else text
        targets = self.names_in(question)
        color = None
        for c, n in self.mentions_in(text):
            if n in targets and c is not None:
                color = c
                break
        if color is None:
            for c, n in self.visible(request):
                if n in targets and c is not None:
                    color = c
                    break
        if not options:
            if color is None or not targets:
                return "I cannot tell."
            return f"The {targets[0]} is {color}."
        for letter, option in options:
            if color is not None and option.strip().lower() == color:
                return f"The answer is ({letter})."
        return f"The answer is ({options[0][0]})."


def caption_from_mentions(mentions: Sequence[Mention]) -> str:
    if not mentions:
        return EMPTY_CAPTION
    return " ".join(f"A {c} {n}." if c else f"A {n}." for c, n in mentions)
