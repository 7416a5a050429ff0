from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Optional

from .base import ChatRequest, ChatResponse


def cache_key(request: ChatRequest) -> str:
    """SHA-256 over everything that can change a model reply."""
    image_digest = hashlib.sha256(request.image).hexdigest() if request.image is not None else None
    payload = {
        "model": request.model,
        "system": request.system,
        "user_text": request.user_text,
        "image": image_digest,
        "temperature": repr(float(request.temperature)),
        "logprobs": request.want_logprobs,
    }
    # view hints only matter to simulated backends; keep keys for real
    # requests unchanged when they are absent
    if request.image_id is not None or request.regions:
        payload["view"] = [request.image_id, [r.as_tuple() for r in request.regions]]
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Directory of ``<key>.json`` files.

    Reads are lock-free; writes go through a temp file and an atomic rename
    under a process-wide lock.
    """

    def __init__(self, directory: os.PathLike | str) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> Optional[ChatResponse]:
        try:
            with open(self._path(key), "r", encoding="utf-8") as fh:
                return ChatResponse.from_json(json.load(fh))
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, KeyError):
            return None

    def put(self, key: str, response: ChatResponse) -> None:
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(response.to_json(), fh)
            os.replace(tmp, self._path(key))

    def __len__(self) -> int:
        return sum(1 for _ in self.directory.glob("*.json"))
