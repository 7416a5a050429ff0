from __future__ import annotations

import logging
import threading
from typing import List, Optional

from .base import Backend, ChatRequest, ChatResponse
from .cache import ResponseCache, cache_key

log = logging.getLogger(__name__)


class ChatClient:
    """Front door for every model call in the pipeline.

    Serves repeats from ``cache``, caps in-flight backend calls at
    ``concurrency`` and counts what actually reached the backend.
    Optionally records every request for inspection.
    """

    def __init__(
        self,
        backend: Backend,
        cache: Optional[ResponseCache] = None,
        concurrency: int = 4,
        record: bool = False,
    ) -> None:
        if concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        self.backend = backend
        self.cache = cache
        self.concurrency = concurrency
        self._slots = threading.BoundedSemaphore(concurrency)
        self._lock = threading.Lock()
        self.backend_calls = 0
        self.cache_hits = 0
        self.requests: Optional[List[ChatRequest]] = [] if record else None

    def chat(self, request: ChatRequest) -> ChatResponse:
        if self.requests is not None:
            with self._lock:
                self.requests.append(request)
        key = None
        if self.cache is not None:
            key = cache_key(request)
            hit = self.cache.get(key)
            if hit is not None:
                with self._lock:
                    self.cache_hits += 1
                return hit
        with self._slots:
            with self._lock:
                self.backend_calls += 1
            response = self.backend.send(request)
        if key is not None:
            self.cache.put(key, response)
        return response
