"""Scoring primitives: cyclic option rotation, answer parsing and metrics."""
from __future__ import annotations

import math
import re
from typing import Iterable, List, Optional, Sequence, TypeVar

from ..combine import EmptyNameError, normalize_name
from ..geometry import Region, iou

T = TypeVar("T")


def letter(index: int) -> str:
    return chr(ord("A") + index)


def cyclic_permutations(options: Sequence[T]) -> List[List[T]]:
    """All ``N`` rotations; rotation ``r`` moves option ``i`` to slot ``(i + r) % N``."""
    n = len(options)
    if n < 2:
        raise ValueError("cyclic permutation needs at least two options")
    out = []
    for r in range(n):
        rotated = [None] * n
        for i, opt in enumerate(options):
            rotated[(i + r) % n] = opt
        out.append(rotated)
    return out


def rotated_gold(gold_index: int, rotation: int, n: int) -> str:
    return letter((gold_index + rotation) % n)


def parse_choice(output: str, options: Sequence[str]) -> Optional[str]:
    """Pull an option letter out of free-form model output, or ``None``.

    1. the first standalone letter in range: any uppercase token, or a
       lowercase one written as ``(b)`` / ``b)`` (a bare lowercase ``a`` is
       far more often the article);
    2. otherwise the single option whose text occurs in the output;
    3. otherwise abstain.
    """
    n = len(options)
    if n == 0:
        return None
    last = letter(n - 1)
    upper = rf"(?<![A-Za-z0-9])([A-{last}])(?![A-Za-z0-9])"
    lower = rf"\(([a-{last.lower()}])\)|(?<![A-Za-z0-9(])([a-{last.lower()}])\)"
    m = re.search(rf"{upper}|{lower}", output)
    if m:
        return next(g for g in m.groups() if g).upper()

    text = output.lower()
    matches = [i for i, opt in enumerate(options) if opt.strip() and opt.strip().lower() in text]
    if len(matches) == 1:
        return letter(matches[0])
    return None


def recall_at_k(hit_names: Sequence[str], targets: Iterable[str], k: int = 2) -> int:
    if k < 1:
        raise ValueError("k must be >= 1")
    wanted = set()
    for t in targets:
        try:
            wanted.add(normalize_name(t))
        except EmptyNameError:
            continue
    return int(any(name in wanted for name in hit_names[:k]))


def miou(pred: Sequence[Region], gt: Region) -> float:
    """IoU between ``gt`` and the best-matching prediction (0 if none)."""
    return max((iou(p, gt) for p in pred), default=0.0)


def uncertainty(token_logprobs: Sequence[float]) -> Optional[float]:
    """``1 - exp(mean log-probability)``; ``None`` for an empty sequence."""
    if not token_logprobs:
        return None
    mean = sum(token_logprobs) / len(token_logprobs)
    return 1.0 - math.exp(mean)


def mg(s_v: float, s_wv: float) -> float:
    """Multi-modal gain: accuracy with images minus accuracy without."""
    return s_v - s_wv


def ml(s_wv: float, s_t: float) -> float:
    """Multi-modal leakage: how far no-image accuracy beats the text-only base."""
    return max(0.0, s_wv - s_t)
