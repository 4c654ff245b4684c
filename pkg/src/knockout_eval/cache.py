"""On-disk cache of raw judge responses, keyed by model identity and prompt bytes.

Layout: one file per key (``<sha256 hex>.txt``, body = raw text) plus
``index.jsonl`` with one ``{"key", "model_id", "created_at"}`` line per write.
A fully warm cache replays a run without contacting the backend.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path

from .errors import CacheIoError
from .judges import JudgeBackend, MatchContext

logger = logging.getLogger(__name__)

INDEX_NAME = "index.jsonl"


def cache_key(model_id: str, prompt: str, attempt: int = 0) -> str:
    h = hashlib.sha256()
    h.update(model_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(prompt.encode("utf-8"))
    if attempt:
        # parse retries must not replay the response that failed to parse
        h.update(f"\x00retry={attempt}".encode())
    return h.hexdigest()


class ResponseCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.txt"

    def get(self, key: str) -> str | None:
        try:
            return self._path(key).read_bytes().decode("utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise CacheIoError(f"cannot read cache entry {key}: {exc}") from exc

    def put(self, key: str, text: str, model_id: str) -> None:
        try:
            fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-")
            with os.fdopen(fd, "wb") as fh:
                fh.write(text.encode("utf-8"))
            os.replace(tmp, self._path(key))
            line = json.dumps({
                "key": key,
                "model_id": model_id,
                "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            })
            with self._lock, open(self.directory / INDEX_NAME, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        except OSError as exc:
            raise CacheIoError(f"cannot write cache entry {key}: {exc}") from exc

    def index(self) -> list[dict]:
        path = self.directory / INDEX_NAME
        if not path.exists():
            return []
        seen: dict[str, dict] = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                rec = json.loads(line)
                seen[rec["key"]] = rec
        return list(seen.values())

    def __len__(self) -> int:
        return sum(1 for _ in self.directory.glob("*.txt"))

    def clear(self) -> int:
        n = len(self)
        shutil.rmtree(self.directory, ignore_errors=True)
        self.directory.mkdir(parents=True, exist_ok=True)
        return n


def cache_get_or_complete(
    cache: ResponseCache,
    backend: JudgeBackend,
    model_id: str,
    rendered_prompt: str,
    context: MatchContext | None = None,
    attempt: int = 0,
) -> tuple[str, bool]:
    """Return ``(raw_text, hit)``; cache failures degrade to a live call."""
    key = cache_key(model_id, rendered_prompt, attempt)
    try:
        hit = cache.get(key)
    except CacheIoError as exc:
        logger.warning("%s; calling the judge directly", exc)
        hit = None
    if hit is not None:
        return hit, True
    text = backend.complete(rendered_prompt, context, attempt)
    try:
        cache.put(key, text, model_id)
    except CacheIoError as exc:
        logger.warning("%s; continuing without caching", exc)
    return text, False


class CachedBackend:
    """Backend wrapper that consults a :class:`ResponseCache` first."""

    def __init__(self, backend: JudgeBackend, cache: ResponseCache):
        self.backend = backend
        self.cache = cache
        self.model_id = backend.model_id
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    @property
    def cache_identity(self) -> str:
        return self.backend.cache_identity

    def complete(self, prompt: str, context: MatchContext | None = None, attempt: int = 0) -> str:
        text, hit = cache_get_or_complete(self.cache, self.backend, self.cache_identity, prompt, context, attempt)
        with self._lock:
            if hit:
                self.hits += 1
            else:
                self.misses += 1
        return text

    @property
    def hit_rate(self) -> float | None:
        total = self.hits + self.misses
        return self.hits / total if total else None
