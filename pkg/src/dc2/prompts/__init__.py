"""Prompt templates for the conquer and inference stages.

Templates are plain text files next to this module. Slots are literal
``{name}`` tokens filled by string replacement, so JSON braces elsewhere in
a template are left alone.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

TEMPLATE_VERSION = "1"
LEAF_PRESETS = (1, 2, 3, 4, 5)


@lru_cache(maxsize=None)
def load(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def leaf_prompt(preset: int = 1) -> str:
    if preset not in LEAF_PRESETS:
        raise ValueError(f"unknown leaf prompt preset {preset}; choose from {LEAF_PRESETS}")
    return load(f"leaf_{preset}")


def format_patch_captions(captions: Sequence[str]) -> str:
    return "\n".join(f"{i}. {c}" for i, c in enumerate(captions, start=1))


def non_leaf_prompt(child_captions: Sequence[str]) -> str:
    if not child_captions:
        raise ValueError("non-leaf prompt needs at least one child caption")
    return load("non_leaf").replace("{captions}", format_patch_captions(child_captions))


def extraction_system() -> str:
    return load("extraction_system")


def extraction_prompt(caption: str) -> str:
    return load("extraction_user").replace("{caption}", caption)


def inference_prompt(question: str) -> str:
    return load("inference").replace("{question}", question)


@dataclass(frozen=True)
class PromptSet:
    """Overridable template bundle; ``None`` fields fall back to the assets."""

    leaf: Optional[str] = None
    leaf_preset: int = 1

    def leaf_text(self) -> str:
        return self.leaf if self.leaf is not None else leaf_prompt(self.leaf_preset)

