"""Record/replay cache for remote-model interactions.

The cache file is JSONL: one ``{"key", "request", "response"}`` object per
line, keyed by a SHA-256 of the canonical request JSON. Replaying a recorded
request sequence is indistinguishable from live responses; a miss raises
instead of silently going to the network.
"""

import hashlib
import json
from pathlib import Path

from .errors import ReplayMissError


def canonical_request(request: dict) -> str:
    return json.dumps(request, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_key(request: dict) -> str:
    return hashlib.sha256(canonical_request(request).encode("utf-8")).hexdigest()


class ReplayCache:
    """Read side: load once, look up by request hash."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    self._entries[entry["key"]] = entry["response"]

    def __len__(self) -> int:
        return len(self._entries)

    def lookup(self, request: dict) -> dict:
        key = request_key(request)
        if key not in self._entries:
            raise ReplayMissError(
                f"no recorded response for request {canonical_request(request)} "
                f"(key {key[:12]}…) in {self.path}")
        return self._entries[key]


class ReplayRecorder:
    """Write side: append request/response pairs; one writer at a time."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seen: set[str] = set()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        self._seen.add(json.loads(line)["key"])

    def record(self, request: dict, response: dict):
        key = request_key(request)
        if key in self._seen:
            return
        self._seen.add(key)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps({"key": key, "request": request, "response": response},
                               sort_keys=True, ensure_ascii=False) + "\n")
