"""Injectable sources of time, identifiers, and share tokens.

Production uses the wall clock and urandom; tests inject deterministic
substitutes so two identical workflows write byte-identical store files.
"""

from __future__ import annotations

import secrets
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Callable


def utc_now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def random_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


def mint_share_token() -> str:
    """URL-safe capability token carrying 128 bits of entropy (22+ chars)."""
    return secrets.token_urlsafe(16)


@dataclass
class Runtime:
    """Bundle of the three nondeterminism sources the service consumes."""

    clock: Callable[[], str] = utc_now_rfc3339
    new_id: Callable[[str], str] = random_id
    new_token: Callable[[], str] = mint_share_token


@dataclass
class DeterministicRuntime:
    """Fixed-start stepping clock plus per-prefix counters; for tests and
    reproducibility checks. Each clock() call advances by one second."""

    start: datetime = field(
        default_factory=lambda: datetime(2026, 1, 1, tzinfo=timezone.utc)
    )
    token: str = "TESTTOKEN_TESTTOKEN_22"

    def __post_init__(self) -> None:
        self._tick = 0
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()

    def clock(self) -> str:
        with self._lock:
            t = self.start + timedelta(seconds=self._tick)
            self._tick += 1
        return t.isoformat().replace("+00:00", "Z")

    def new_id(self, prefix: str) -> str:
        with self._lock:
            n = self._counters.get(prefix, 0) + 1
            self._counters[prefix] = n
        return f"{prefix}-{n:04d}"

    def new_token(self) -> str:
        return self.token

    def as_runtime(self) -> Runtime:
        return Runtime(clock=self.clock, new_id=self.new_id, new_token=self.new_token)
