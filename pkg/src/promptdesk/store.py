"""Durable append-only log with an in-memory index.

One `.pdlog` file per deployment: a 5-byte header (magic + format version)
followed by length-prefixed JSON records (4-byte big-endian length, then
UTF-8 bytes). Mutable kinds resolve by last write; versions and corrections
are immutable and may never be rewritten. A corrupt suffix is quarantined
to a sidecar on open and the store comes up read-degraded until compacted.
"""

from __future__ import annotations

import json
import os
import threading
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, TypeVar

from .errors import AppendOnlyViolationError, StoreDegradedError
from .runtime import utc_now_rfc3339

MAGIC = b"PDLG"
FORMAT_VERSION = 1
HEADER = MAGIC + bytes([FORMAT_VERSION])
LENGTH_BYTES = 4

T = TypeVar("T")


class RecordKind(str, Enum):
    BOT = "bot"
    VERSION = "version"
    TEST_CASE = "test_case"
    CORRECTION = "correction"
    RUN = "run"
    PROFILE = "profile"


IMMUTABLE_KINDS = frozenset({RecordKind.VERSION, RecordKind.CORRECTION})


def _encode_record(envelope: dict[str, Any]) -> bytes:
    body = json.dumps(
        envelope, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    return len(body).to_bytes(LENGTH_BYTES, "big") + body


class Store:
    """Single-file store; many readers, one global appender, and a writer
    lock per bot for multi-record mutations."""

    def __init__(self, path: str | Path, clock: Callable[[], str] = utc_now_rfc3339):
        self.path = Path(path)
        self._clock = clock
        self._append_lock = threading.RLock()
        self._bot_locks: dict[str, threading.RLock] = {}
        self._bot_locks_guard = threading.Lock()

        self._latest: dict[tuple[RecordKind, str], dict[str, Any]] = {}
        self._first_seq: dict[tuple[RecordKind, str], int] = {}
        self._bot_of: dict[tuple[RecordKind, str], Optional[str]] = {}
        self._written_at: dict[tuple[RecordKind, str], str] = {}
        self._next_seq = 1

        self.degraded = False
        self.quarantined_bytes = 0
        self.integrity_violations: list[str] = []

        self._open()

    # -- lifecycle -----------------------------------------------------------

    def _open(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "wb") as fh:
                fh.write(HEADER)
                fh.flush()
                os.fsync(fh.fileno())
            self._fh = open(self.path, "ab")
            return

        raw = self.path.read_bytes()
        good_end = len(HEADER)
        if raw[: len(HEADER)] != HEADER:
            self._quarantine(raw, 0)
            with open(self.path, "wb") as fh:
                fh.write(HEADER)
            self._fh = open(self.path, "ab")
            return

        offset = len(HEADER)
        while offset < len(raw):
            if offset + LENGTH_BYTES > len(raw):
                break
            length = int.from_bytes(raw[offset : offset + LENGTH_BYTES], "big")
            end = offset + LENGTH_BYTES + length
            if end > len(raw):
                break
            try:
                envelope = json.loads(raw[offset + LENGTH_BYTES : end].decode("utf-8"))
                kind = RecordKind(envelope["kind"])
                record_id = envelope["id"]
                seq = envelope["seq"]
                payload = envelope["payload"]
            except (ValueError, KeyError, UnicodeDecodeError):
                break
            self._index(
                kind, record_id, envelope.get("bot_id"), seq, payload,
                envelope.get("written_at", ""),
            )
            self._next_seq = max(self._next_seq, seq + 1)
            good_end = end
            offset = end

        if good_end < len(raw):
            self._quarantine(raw, good_end)
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        self._fh = open(self.path, "ab")
        self._check_integrity()

    def _quarantine(self, raw: bytes, good_end: int) -> None:
        sidecar = self.path.with_suffix(self.path.suffix + ".quarantine")
        with open(sidecar, "wb") as fh:
            fh.write(raw[good_end:])
        self.quarantined_bytes = len(raw) - good_end
        self.degraded = True

    def _check_integrity(self) -> None:
        """Report (never drop) records whose references do not resolve."""
        for (kind, record_id), payload in self._latest.items():
            if kind == RecordKind.CORRECTION:
                case_id = payload.get("test_case_id")
                if (RecordKind.TEST_CASE, case_id) not in self._latest:
                    self.integrity_violations.append(
                        f"correction {record_id} references missing test case {case_id}"
                    )
            elif kind == RecordKind.RUN:
                corr_id = payload.get("correction_id")
                if (RecordKind.CORRECTION, corr_id) not in self._latest:
                    self.integrity_violations.append(
                        f"run {record_id} references missing correction {corr_id}"
                    )

    def close(self) -> None:
        with self._append_lock:
            self._fh.close()

    # -- indexing ------------------------------------------------------------

    def _index(
        self,
        kind: RecordKind,
        record_id: str,
        bot_id: Optional[str],
        seq: int,
        payload: dict[str, Any],
        written_at: str,
    ) -> None:
        key = (kind, record_id)
        if key not in self._first_seq:
            self._first_seq[key] = seq
            self._bot_of[key] = bot_id
        self._latest[key] = payload
        self._written_at[key] = written_at

    # -- operations ----------------------------------------------------------

    def put(
        self,
        kind: RecordKind | str,
        record_id: str,
        payload: dict[str, Any],
        bot_id: Optional[str] = None,
    ) -> int:
        """Append one record; returns its sequence number."""
        kind = RecordKind(kind)
        with self._append_lock:
            if self.degraded:
                raise StoreDegradedError(
                    f"store is read-degraded ({self.quarantined_bytes} bytes "
                    "quarantined); compact to resume writes"
                )
            if kind in IMMUTABLE_KINDS and (kind, record_id) in self._latest:
                raise AppendOnlyViolationError(
                    f"{kind.value} {record_id} already exists and is append-only"
                )
            seq = self._next_seq
            self._next_seq += 1
            envelope = {
                "kind": kind.value,
                "id": record_id,
                "bot_id": bot_id,
                "seq": seq,
                "written_at": self._clock(),
                "payload": payload,
            }
            self._fh.write(_encode_record(envelope))
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._index(kind, record_id, bot_id, seq, payload, envelope["written_at"])
            return seq

    def get(self, kind: RecordKind | str, record_id: str) -> Optional[dict[str, Any]]:
        """Latest payload for (kind, id), or None."""
        return self._latest.get((RecordKind(kind), record_id))

    def list(
        self, kind: RecordKind | str, bot_id: Optional[str] = None
    ) -> list[dict[str, Any]]:
        """Latest payloads of one kind, ordered by first-write sequence;
        bot_id=None returns records of every bot (and global records)."""
        kind = RecordKind(kind)
        rows = [
            (self._first_seq[key], payload)
            for key, payload in self._latest.items()
            if key[0] == kind and (bot_id is None or self._bot_of[key] == bot_id)
        ]
        rows.sort(key=lambda r: r[0])
        return [payload for _, payload in rows]

    def with_bot_lock(self, bot_id: str, mutation: Callable[[], T]) -> T:
        """Run mutation() holding this bot's writer lock (re-entrant)."""
        with self.bot_lock(bot_id):
            return mutation()

    @contextmanager
    def bot_lock(self, bot_id: str) -> Iterator[None]:
        with self._bot_locks_guard:
            lock = self._bot_locks.setdefault(bot_id, threading.RLock())
        with lock:
            yield

    def compact(self) -> int:
        """Rewrite the log keeping all immutable records plus the latest
        record of each mutable id; clears the degraded flag. Returns the
        number of records written."""
        with self._append_lock:
            rows = sorted(
                (
                    (self._first_seq[key], key, payload)
                    for key, payload in self._latest.items()
                ),
                key=lambda r: r[0],
            )
            tmp = self.path.with_suffix(self.path.suffix + ".compact")
            count = 0
            with open(tmp, "wb") as fh:
                fh.write(HEADER)
                for seq, (kind, record_id), payload in rows:
                    envelope = {
                        "kind": kind.value,
                        "id": record_id,
                        "bot_id": self._bot_of[(kind, record_id)],
                        "seq": seq,
                        "written_at": self._written_at[(kind, record_id)],
                        "payload": payload,
                    }
                    fh.write(_encode_record(envelope))
                    count += 1
                fh.flush()
                os.fsync(fh.fileno())
            self._fh.close()
            os.replace(tmp, self.path)
            self._fh = open(self.path, "ab")
            self.degraded = False
            self.quarantined_bytes = 0
            return count


def open_store(path: str | Path, clock: Callable[[], str] = utc_now_rfc3339) -> Store:
    """Open (or create) the store at path."""
    return Store(path, clock=clock)


def default_store_path(data_dir: str | Path) -> Path:
    return Path(data_dir) / "promptdesk.pdlog"
