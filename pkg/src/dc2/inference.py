"""Memory-grounded question answering over a divided, conquered image."""
from __future__ import annotations

import logging
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from . import prompts
from .backend import BackendError, ChatClient, ChatResponse
from .combine import VisualMemory, combine_tree
from .config import PipelineConfig
from .conquer import ModelSession, conquer_tree
from .divide import PatchImage, PatchNode, build_patch_tree
from .geometry import Region
from .raster import crop

log = logging.getLogger(__name__)

Scorer = Callable[[str, str], float]

_WORD = re.compile(r"[a-z0-9]+")


def trigrams(text: str) -> Counter:
    """Character trigrams of each word, padded with two leading blanks and one trailing."""
    grams: Counter = Counter()
    for word in _WORD.findall(text.lower()):
        padded = f"  {word} "
        grams.update(padded[i:i + 3] for i in range(len(padded) - 2))
    return grams


def score_query_object(query: str, name: str) -> float:
    q, n = trigrams(query), trigrams(name)
    if not q or not n:
        return 0.0
    dot = sum(c * n[g] for g, c in q.items() if g in n)
    norm = math.sqrt(sum(c * c for c in q.values())) * math.sqrt(sum(c * c for c in n.values()))
    return min(1.0, dot / norm)


@dataclass(frozen=True)
class RetrievalHit:
    name: str
    region: Region
    layer: int
    score: float


def retrieve(
    memory: VisualMemory,
    query: str,
    alpha: float,
    scorer: Scorer = score_query_object,
) -> List[RetrievalHit]:
    hits = []
    for name in memory.names():
        score = scorer(query, name)
        if score < alpha:
            continue
        hits.extend(RetrievalHit(name, rec.region, rec.layer, score) for rec in memory.records(name))
    hits.sort(key=lambda h: (-h.score, h.name, -h.layer, h.region.as_tuple()))
    return hits


def _is_none(reply: str) -> bool:
    return reply.strip().rstrip(".").strip().upper() == "NONE"


def describe_hits(
    session: ModelSession,
    image: PatchImage,
    question: str,
    hits: Sequence[RetrievalHit],
    top_k: int = 3,
    workers: int = 1,
) -> str:
    """Ask about each of the best ``top_k`` hit crops; join the useful replies."""
    chosen = list(hits[:top_k])
    if not chosen:
        return ""
    origin = image.source_regions[0]
    text = prompts.inference_prompt(question)

    def one(hit: RetrievalHit) -> str:
        r = hit.region
        pixels = crop(image.pixels, r.x - origin.x, r.y - origin.y, r.w, r.h)
        return session.client.chat(session.request(text, pixels, (r,))).text

    if workers > 1 and len(chosen) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            replies = list(pool.map(one, chosen))
    else:
        replies = [one(h) for h in chosen]
    return "\n".join(r.strip() for r in replies if not _is_none(r))


AUX_SEPARATOR = "\n"


def compose_prompt(question: str, aux_text: str) -> str:
    return question + AUX_SEPARATOR + aux_text if aux_text else question


def answer(
    session: ModelSession,
    image: Optional[PatchImage],
    question: str,
    aux_text: str = "",
    want_logprobs: bool = False,
) -> ChatResponse:
    user_text = compose_prompt(question, aux_text)
    if image is None:
        req = session.request(user_text, want_logprobs=want_logprobs)
    else:
        req = session.request(user_text, image.pixels, image.source_regions, want_logprobs=want_logprobs)
    return session.client.chat(req)


def format_choices(question: str, options: Sequence[str]) -> str:
    letters = [chr(ord("A") + i) for i in range(len(options))]
    lines = [question] + [f"{l}. {o}" for l, o in zip(letters, options)]
    lines.append("Answer with the option's letter from the given choices directly.")
    return "\n".join(lines)


class PipelineError(Exception):
    def __init__(self, stage: str, cause: BaseException, node: Optional[str] = None) -> None:
        where = f" at node {node}" if node else ""
        super().__init__(f"{stage} stage failed{where}: {cause}")
        self.stage = stage
        self.node = node
        self.cause = cause


def _node_label(node: PatchNode) -> str:
    return f"layer {node.layer} " + ",".join(str(r.as_tuple()) for r in node.patch.source_regions)


def session_for(client: ChatClient, config: PipelineConfig, image_id: Optional[str] = None) -> ModelSession:
    return ModelSession(
        client=client,
        model=config.model,
        patch_size=config.patch_size,
        temperature=config.temperature,
        image_id=image_id,
        prompt_set=prompts.PromptSet(leaf_preset=config.leaf_prompt),
    )


def build_memory(
    session: ModelSession,
    image: PatchImage,
    config: PipelineConfig,
) -> tuple[PatchNode, VisualMemory]:
    """Divide, conquer and combine one image into a visual memory."""
    try:
        root = build_patch_tree(image, config.patch_size, config.theta, config.max_depth)
    except Exception as exc:
        raise PipelineError("divide", exc) from exc

    try:
        conquer_tree(session, root, workers=config.workers)
    except BackendError as exc:
        pending = next((n for n in root.post_order() if n.caption is None or n.objects is None), None)
        raise PipelineError("conquer", exc, _node_label(pending) if pending else None) from exc

    region = image.source_regions[0]
    memory = VisualMemory(
        nms_threshold=config.nms_threshold,
        image_id=session.image_id,
        root_size=(region.w, region.h),
    )
    try:
        combine_tree(memory, root)
    except Exception as exc:
        raise PipelineError("combine", exc) from exc
    return root, memory


@dataclass
class PipelineResult:
    response: ChatResponse
    memory: VisualMemory
    hits: List[RetrievalHit]
    aux_text: str
    tree: Optional[PatchNode] = None
    extra: dict = field(default_factory=dict)

    @property
    def text(self) -> str:
        return self.response.text


def run_pipeline(
    client: ChatClient,
    image: PatchImage,
    question: str,
    config: PipelineConfig = PipelineConfig(),
    options: Optional[Sequence[str]] = None,
    memory: Optional[VisualMemory] = None,
    image_id: Optional[str] = None,
    scorer: Scorer = score_query_object,
    want_logprobs: bool = False,
) -> PipelineResult:
    """Full pipeline: build (or reuse) the memory, retrieve, describe, answer.

    ``question`` goes to retrieval and hit descriptions without the options;
    the final call sees the options when given.
    """
    session = session_for(client, config, image_id)
    tree = None
    if memory is None:
        tree, memory = build_memory(session, image, config)

    hits = retrieve(memory, question, config.alpha, scorer)
    try:
        aux = describe_hits(session, image, question, hits, config.top_k, config.workers)
    except BackendError as exc:
        raise PipelineError("describe", exc) from exc

    final_question = format_choices(question, options) if options else question
    try:
        response = answer(session, image, final_question, aux, want_logprobs)
    except BackendError as exc:
        raise PipelineError("answer", exc) from exc
    return PipelineResult(response, memory, hits, aux, tree)
