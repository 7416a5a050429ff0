"""Per-patch captioning and object extraction."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Set

import numpy as np

from . import prompts
from .backend import ChatClient, ChatRequest, DEFAULT_TEMPERATURE
from .combine import EmptyNameError, normalize_name
from .divide import PatchImage, PatchNode
from .geometry import Region
from .raster import encode_png, fit_within

log = logging.getLogger(__name__)


class ObjectListError(ValueError):
    """Model reply could not be read as ``{"object_list": [...]}``."""


@dataclass
class ModelSession:
    """Everything needed to turn pipeline steps into chat requests."""

    client: ChatClient
    model: str = "default"
    patch_size: int = 336
    temperature: float = DEFAULT_TEMPERATURE
    image_id: Optional[str] = None
    prompt_set: prompts.PromptSet = field(default_factory=prompts.PromptSet)
    # (pixels, png) of the last encode; the same full image is sent once per
    # option rotation
    _last_image: Optional[tuple] = field(default=None, repr=False, compare=False)

    def request(
        self,
        user_text: str,
        pixels: Optional[np.ndarray] = None,
        regions: Sequence[Region] = (),
        system: Optional[str] = None,
        want_logprobs: bool = False,
    ) -> ChatRequest:
        image = None
        if pixels is not None:
            last = self._last_image
            if last is not None and last[0] is pixels:
                image = last[1]
            else:
                image = encode_png(fit_within(pixels, self.patch_size))
                self._last_image = (pixels, image)
        return ChatRequest(
            model=self.model,
            user_text=user_text,
            system=system,
            image=image,
            temperature=self.temperature,
            want_logprobs=want_logprobs,
            image_id=self.image_id,
            regions=tuple(regions) if pixels is not None else (),
        )

    def ask(self, user_text: str, patch: Optional[PatchImage] = None, system: Optional[str] = None) -> str:
        if patch is None:
            req = self.request(user_text, system=system)
        else:
            req = self.request(user_text, patch.pixels, patch.source_regions, system=system)
        return self.client.chat(req).text


def caption_leaf(session: ModelSession, patch: PatchImage) -> str:
    return session.ask(session.prompt_set.leaf_text(), patch)


def caption_non_leaf(session: ModelSession, patch: PatchImage, child_captions: Sequence[str]) -> str:
    return session.ask(prompts.non_leaf_prompt(child_captions), patch)


def parse_object_list(reply: str) -> List[str]:
    """Read ``{"object_list": [...]}`` from a model reply.

    Tolerates chatter around the outermost braces and a bare ``[]``.
    """
    text = reply.strip()
    if text == "[]":
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if start < 0 or end <= start:
            raise ObjectListError(f"no JSON object in reply: {reply[:200]!r}") from None
        try:
            data = json.loads(text[start:end + 1])
        except json.JSONDecodeError as exc:
            raise ObjectListError(f"unparseable object list: {exc}") from None
    if data == []:
        return []
    if not isinstance(data, dict) or not isinstance(data.get("object_list"), list):
        raise ObjectListError(f"reply lacks an object_list array: {reply[:200]!r}")
    items = data["object_list"]
    if not all(isinstance(i, str) for i in items):
        raise ObjectListError("object_list holds non-string entries")
    return items


def extract_objects(session: ModelSession, caption: str) -> Set[str]:
    if not caption.strip():
        return set()
    reply = session.ask(prompts.extraction_prompt(caption), system=prompts.extraction_system())
    try:
        raw = parse_object_list(reply)
    except ObjectListError as exc:
        log.warning("object extraction failed, using empty set: %s", exc)
        return set()
    names = set()
    for item in raw:
        try:
            names.add(normalize_name(item))
        except EmptyNameError:
            continue
    return names


def conquer_node(session: ModelSession, node: PatchNode) -> None:
    if node.is_leaf:
        node.caption = caption_leaf(session, node.patch)
    else:
        node.caption = caption_non_leaf(session, node.patch, [c.caption for c in node.children])
    node.objects = extract_objects(session, node.caption)


def conquer_tree(session: ModelSession, root: PatchNode, workers: int = 1) -> None:
    """Caption and extract objects for every node, deepest layer first.

    Nodes on one layer are independent, so a layer can be fanned out over
    ``workers`` threads; children always finish before their parent.
    """
    by_layer = {}
    for node in root.walk():
        by_layer.setdefault(node.layer, []).append(node)
    for layer in sorted(by_layer, reverse=True):
        nodes = by_layer[layer]
        if workers > 1 and len(nodes) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(lambda n: conquer_node(session, n), nodes))
        else:
            for node in nodes:
                conquer_node(session, node)
