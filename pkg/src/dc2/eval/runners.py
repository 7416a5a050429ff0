"""Things that answer one multiple-choice prompt for a benchmark sample."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..backend import ChatClient
from ..combine import VisualMemory
from ..config import PipelineConfig
from ..conquer import ModelSession
from ..divide import PatchImage
from ..inference import (
    RetrievalHit,
    answer,
    build_memory,
    describe_hits,
    format_choices,
    retrieve,
    session_for,
)
from .dataset import BenchmarkSample


@dataclass
class RunnerOutput:
    text: str
    token_logprobs: Optional[List[float]] = None
    hits: List[RetrievalHit] = field(default_factory=list)


class _ImageCache:
    """Decoded images and model sessions for the samples in flight."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._images: Dict[str, PatchImage] = {}
        self._sessions: Dict[str, ModelSession] = {}

    def session(self, client: ChatClient, config: PipelineConfig, sample: BenchmarkSample) -> ModelSession:
        key = str(sample.image)
        with self._lock:
            if key not in self._sessions:
                self._sessions[key] = session_for(client, config, sample.image_id)
            return self._sessions[key]

    def get(self, sample: BenchmarkSample) -> PatchImage:
        key = str(sample.image)
        with self._lock:
            img = self._images.get(key)
        if img is None:
            img = PatchImage.open(sample.image)
            with self._lock:
                self._images[key] = img
        return img

    def drop(self, sample: BenchmarkSample) -> None:
        with self._lock:
            self._images.pop(str(sample.image), None)
            self._sessions.pop(str(sample.image), None)


class BaselineRunner:
    """One call per prompt with the whole image downsampled to the encoder size.

    ``with_image=False`` sends the same prompt with no image, which is the
    no-vision run behind the multi-modal gain.
    """

    name = "baseline"

    def __init__(self, client: ChatClient, config: PipelineConfig = PipelineConfig(), with_image: bool = True) -> None:
        self.client = client
        self.config = config
        self.with_image = with_image
        self._images = _ImageCache()
        if not with_image:
            self.name = "no-image"

    def prepare(self, sample: BenchmarkSample) -> None:
        if self.with_image:
            self._images.get(sample)

    def finish(self, sample: BenchmarkSample) -> None:
        self._images.drop(sample)

    def __call__(self, sample: BenchmarkSample, options: Sequence[str]) -> RunnerOutput:
        session = self._images.session(self.client, self.config, sample)
        image = self._images.get(sample) if self.with_image else None
        resp = answer(session, image, format_choices(sample.question, options), want_logprobs=True)
        return RunnerOutput(resp.text, resp.token_logprobs)


class TextOnlyRunner(BaselineRunner):
    """The language-model base behind a multimodal model, asked without images."""

    name = "text-only"

    def __init__(self, client: ChatClient, config: PipelineConfig = PipelineConfig()) -> None:
        text_config = config.replace(model=config.text_model or config.model)
        super().__init__(client, text_config, with_image=False)
        self.name = "text-only"


class DC2Runner:
    """Full pipeline. Memory and hit descriptions are built once per sample
    and reused across option rotations."""

    name = "dc2"

    def __init__(self, client: ChatClient, config: PipelineConfig = PipelineConfig()) -> None:
        self.client = client
        self.config = config
        self._images = _ImageCache()
        self._lock = threading.Lock()
        self._memories: Dict[str, VisualMemory] = {}
        self._aux: Dict[Tuple[str, str], Tuple[List[RetrievalHit], str]] = {}

    def memory(self, sample: BenchmarkSample) -> VisualMemory:
        key = str(sample.image)
        with self._lock:
            mem = self._memories.get(key)
            if mem is None:
                session = self._images.session(self.client, self.config, sample)
                _, mem = build_memory(session, self._images.get(sample), self.config)
                self._memories[key] = mem
        return mem

    def prepare(self, sample: BenchmarkSample) -> None:
        self._grounding(sample)

    def finish(self, sample: BenchmarkSample) -> None:
        self._images.drop(sample)

    def _grounding(self, sample: BenchmarkSample) -> Tuple[List[RetrievalHit], str]:
        key = (str(sample.image), sample.question)
        with self._lock:
            cached = self._aux.get(key)
        if cached is not None:
            return cached
        memory = self.memory(sample)
        session = self._images.session(self.client, self.config, sample)
        hits = retrieve(memory, sample.question, self.config.alpha)
        aux = describe_hits(session, self._images.get(sample), sample.question, hits,
                            self.config.top_k, self.config.workers)
        with self._lock:
            self._aux[key] = (hits, aux)
        return hits, aux

    def __call__(self, sample: BenchmarkSample, options: Sequence[str]) -> RunnerOutput:
        hits, aux = self._grounding(sample)
        session = self._images.session(self.client, self.config, sample)
        resp = answer(session, self._images.get(sample), format_choices(sample.question, options),
                      aux, want_logprobs=True)
        return RunnerOutput(resp.text, resp.token_logprobs, hits)
