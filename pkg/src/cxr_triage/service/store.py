"""Durable state: content-addressed blobs plus an append-only event log.

The event log is the source of truth. Appends are fsynced before the
caller acknowledges anything to a client, and replay tolerates a torn
trailing line (the one write that can be cut short by a crash). Events
carry client-supplied event_ids; replay deduplicates on them, so a retry
that raced a crash lands exactly once. Snapshot compaction folds the log
into a JSON snapshot and truncates it.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path


class CorruptLog(RuntimeError):
    """A non-trailing log line failed to parse: real corruption, not a crash."""


class BlobStore:
    """Content-addressed bytes on disk, sharded by digest prefix."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "tmp").mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / digest[2:]

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self._path(digest)
        if path.exists():
            return digest
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.root / "tmp" / f"{digest}.{os.getpid()}.{threading.get_ident()}"
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        return digest

    def get(self, digest: str) -> bytes:
        return self._path(digest).read_bytes()

    def exists(self, digest: str) -> bool:
        return self._path(digest).exists()


class EventLog:
    """Single-writer append-only NDJSON log with fsync-before-ack."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, event: dict) -> None:
        """Durably append one event. Returns only after the bytes are synced."""
        if "event_id" not in event:
            raise ValueError("event needs an event_id")
        line = json.dumps(event, sort_keys=True)
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def replay(self) -> list[dict]:
        """Events in append order, deduped by event_id, torn tail skipped.

        Only the bytes after the final newline can be a torn write (the log
        has a single fsyncing writer); a parse failure on any complete line
        is real corruption and raises.
        """
        events: list[dict] = []
        seen: set[str] = set()
        if not self.path.exists():
            return events
        raw = self.path.read_bytes().decode("utf-8", errors="replace")
        complete, _, _tail = raw.rpartition("\n")
        for i, line in enumerate(complete.split("\n")):
            if not line:
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                raise CorruptLog(f"{self.path}:{i + 1}: unparseable event") from None
            eid = event.get("event_id")
            if eid in seen:
                continue
            if eid is not None:
                seen.add(eid)
            events.append(event)
        return events

    def repair(self) -> int:
        """Trim a torn trailing write so new appends start on a clean line.

        Returns the number of bytes dropped. Must run before the first
        append after a restart.
        """
        with self._lock:
            if not self.path.exists():
                return 0
            raw = self.path.read_bytes()
            cut = raw.rfind(b"\n") + 1  # 0 when there is no newline at all
            torn = len(raw) - cut
            if torn:
                self._fh.close()
                with open(self.path, "rb+") as fh:
                    fh.truncate(cut)
                    fh.flush()
                    os.fsync(fh.fileno())
                self._fh = open(self.path, "a", encoding="utf-8")
            return torn

    def truncate(self) -> None:
        """Drop all entries (used after their effects are folded into a snapshot)."""
        with self._lock:
            self._fh.close()
            self._fh = open(self.path, "w", encoding="utf-8")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            self._fh.close()


class SnapshotStore:
    """Atomic JSON snapshot beside the log."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def save(self, state: dict) -> None:
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self.path)

    def load(self) -> dict | None:
        if not self.path.exists():
            return None
        with open(self.path, "r", encoding="utf-8") as fh:
            return json.load(fh)
