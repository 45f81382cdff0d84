"""Append-only log store: durability, crash consistency, append-only
enforcement, locking, and compaction."""

import threading
import time

import pytest

from promptdesk.errors import AppendOnlyViolationError, StoreDegradedError
from promptdesk.store import HEADER, LENGTH_BYTES, RecordKind, Store


@pytest.fixture
def path(tmp_path):
    return tmp_path / "test.pdlog"


def record_boundaries(raw: bytes) -> list[int]:
    """Byte offsets of every record boundary, header included."""
    offsets = [len(HEADER)]
    cursor = len(HEADER)
    while cursor < len(raw):
        length = int.from_bytes(raw[cursor : cursor + LENGTH_BYTES], "big")
        cursor += LENGTH_BYTES + length
        offsets.append(cursor)
    return offsets


class TestBasics:
    def test_get_returns_latest_payload_for_mutable_kinds(self, path):
        store = Store(path)
        store.put(RecordKind.BOT, "bot-1", {"status": "draft"}, bot_id="bot-1")
        store.put(RecordKind.BOT, "bot-1", {"status": "published"}, bot_id="bot-1")
        assert store.get(RecordKind.BOT, "bot-1") == {"status": "published"}

    def test_missing_record_is_none(self, path):
        assert Store(path).get(RecordKind.BOT, "nope") is None

    def test_version_overwrite_is_append_only_violation(self, path):
        store = Store(path)
        store.put(RecordKind.VERSION, "ver-1", {"full_text": "a"}, bot_id="bot-1")
        with pytest.raises(AppendOnlyViolationError):
            store.put(RecordKind.VERSION, "ver-1", {"full_text": "b"}, bot_id="bot-1")

    def test_corrections_are_append_only_too(self, path):
        store = Store(path)
        store.put(RecordKind.CORRECTION, "corr-1", {"x": 1}, bot_id="bot-1")
        with pytest.raises(AppendOnlyViolationError):
            store.put(RecordKind.CORRECTION, "corr-1", {"x": 2}, bot_id="bot-1")

    def test_sequence_numbers_strictly_increase(self, path):
        store = Store(path)
        seqs = [
            store.put(RecordKind.BOT, f"bot-{i}", {"i": i}, bot_id=f"bot-{i}")
            for i in range(10)
        ]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)

    def test_list_filters_by_bot_and_orders_by_first_write(self, path):
        store = Store(path)
        store.put(RecordKind.TEST_CASE, "case-b", {"n": "b"}, bot_id="bot-1")
        store.put(RecordKind.TEST_CASE, "case-a", {"n": "a"}, bot_id="bot-1")
        store.put(RecordKind.TEST_CASE, "case-c", {"n": "c"}, bot_id="bot-2")
        store.put(RecordKind.TEST_CASE, "case-b", {"n": "b2"}, bot_id="bot-1")
        assert [p["n"] for p in store.list(RecordKind.TEST_CASE, "bot-1")] == ["b2", "a"]
        assert [p["n"] for p in store.list(RecordKind.TEST_CASE)] == ["b2", "a", "c"]


class TestDurability:
    def test_reopen_reproduces_identical_state(self, path):
        store = Store(path)
        for i in range(100):
            store.put(RecordKind.BOT, f"bot-{i % 10}", {"i": i}, bot_id=f"bot-{i % 10}")
        expected = {f"bot-{k}": store.get(RecordKind.BOT, f"bot-{k}") for k in range(10)}
        listing = store.list(RecordKind.BOT)
        store.close()

        reopened = Store(path)
        assert not reopened.degraded
        for key, payload in expected.items():
            assert reopened.get(RecordKind.BOT, key) == payload
        assert reopened.list(RecordKind.BOT) == listing

    def test_truncation_at_every_record_boundary_opens_cleanly(self, path, tmp_path):
        store = Store(path)
        for i in range(20):
            store.put(RecordKind.BOT, f"bot-{i}", {"i": i}, bot_id=f"bot-{i}")
        store.close()
        raw = path.read_bytes()
        boundaries = record_boundaries(raw)
        assert len(boundaries) == 21

        for surviving, offset in enumerate(boundaries):
            candidate = tmp_path / f"t{surviving}.pdlog"
            candidate.write_bytes(raw[:offset])
            reopened = Store(candidate)
            assert not reopened.degraded
            assert len(reopened.list(RecordKind.BOT)) == surviving
            reopened.close()

    def test_mid_record_corruption_quarantines_suffix(self, path):
        store = Store(path)
        for i in range(5):
            store.put(RecordKind.BOT, f"bot-{i}", {"i": i}, bot_id=f"bot-{i}")
        store.close()
        raw = path.read_bytes()
        boundary = record_boundaries(raw)[3]
        path.write_bytes(raw[: boundary + 2])  # half a length prefix

        reopened = Store(path)
        assert reopened.degraded
        assert reopened.quarantined_bytes == 2
        assert len(reopened.list(RecordKind.BOT)) == 3
        sidecar = path.with_suffix(path.suffix + ".quarantine")
        assert sidecar.exists() and len(sidecar.read_bytes()) == 2

        with pytest.raises(StoreDegradedError):
            reopened.put(RecordKind.BOT, "bot-x", {}, bot_id="bot-x")
        reopened.compact()
        assert not reopened.degraded
        reopened.put(RecordKind.BOT, "bot-x", {"ok": True}, bot_id="bot-x")

    def test_garbage_bytes_inside_a_record_quarantined(self, path):
        store = Store(path)
        store.put(RecordKind.BOT, "bot-1", {"i": 1}, bot_id="bot-1")
        store.close()
        with open(path, "ab") as fh:
            fh.write((12).to_bytes(4, "big") + b"not-json-at!")
        reopened = Store(path)
        assert reopened.degraded
        assert len(reopened.list(RecordKind.BOT)) == 1


class TestIntegrityReport:
    def test_dangling_references_reported_not_dropped(self, path):
        store = Store(path)
        store.put(RecordKind.CORRECTION, "corr-1", {"test_case_id": "case-gone"}, bot_id="b")
        store.put(RecordKind.RUN, "run-1", {"correction_id": "corr-gone"}, bot_id="b")
        store.close()
        reopened = Store(path)
        assert len(reopened.integrity_violations) == 2
        assert reopened.get(RecordKind.CORRECTION, "corr-1") is not None
        assert reopened.get(RecordKind.RUN, "run-1") is not None

    def test_resolved_references_report_nothing(self, path):
        store = Store(path)
        store.put(RecordKind.TEST_CASE, "case-1", {}, bot_id="b")
        store.put(RecordKind.CORRECTION, "corr-1", {"test_case_id": "case-1"}, bot_id="b")
        store.put(RecordKind.RUN, "run-1", {"correction_id": "corr-1"}, bot_id="b")
        store.close()
        assert Store(path).integrity_violations == []


class TestLocking:
    def test_same_bot_mutations_never_interleave(self, path):
        store = Store(path)
        counter = {"value": 0}

        def bump():
            def mutation():
                seen = counter["value"]
                time.sleep(0.0005)
                counter["value"] = seen + 1

            for _ in range(50):
                store.with_bot_lock("bot-1", mutation)

        threads = [threading.Thread(target=bump) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert counter["value"] == 200

    def test_distinct_bots_proceed_in_parallel(self, path):
        store = Store(path)
        intervals = {}
        barrier = threading.Barrier(2)

        def hold(bot_id):
            def mutation():
                start = time.monotonic()
                barrier.wait(timeout=5)
                time.sleep(0.05)
                intervals[bot_id] = (start, time.monotonic())

            store.with_bot_lock(bot_id, mutation)

        threads = [threading.Thread(target=hold, args=(b,)) for b in ("bot-1", "bot-2")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        (s1, e1), (s2, e2) = intervals["bot-1"], intervals["bot-2"]
        assert max(s1, s2) < min(e1, e2), "expected overlapping critical sections"

    def test_bot_lock_is_reentrant(self, path):
        store = Store(path)

        def outer():
            return store.with_bot_lock("bot-1", lambda: "inner")

        assert store.with_bot_lock("bot-1", outer) == "inner"


class TestCompaction:
    def test_keeps_latest_mutables_and_all_immutables(self, path):
        store = Store(path)
        store.put(RecordKind.VERSION, "ver-1", {"v": 1}, bot_id="b")
        store.put(RecordKind.VERSION, "ver-2", {"v": 2}, bot_id="b")
        for i in range(5):
            store.put(RecordKind.BOT, "bot-1", {"rev": i}, bot_id="bot-1")
        kept = store.compact()
        assert kept == 3  # two versions + one bot
        assert store.get(RecordKind.BOT, "bot-1") == {"rev": 4}
        store.close()

        reopened = Store(path)
        assert reopened.get(RecordKind.BOT, "bot-1") == {"rev": 4}
        assert reopened.get(RecordKind.VERSION, "ver-1") == {"v": 1}
        assert reopened.get(RecordKind.VERSION, "ver-2") == {"v": 2}

    def test_compaction_shrinks_the_file(self, path):
        store = Store(path)
        for i in range(200):
            store.put(RecordKind.BOT, "bot-1", {"rev": i}, bot_id="bot-1")
        before = path.stat().st_size
        store.compact()
        assert path.stat().st_size < before

    def test_writes_continue_after_compaction(self, path):
        store = Store(path)
        store.put(RecordKind.BOT, "bot-1", {"rev": 0}, bot_id="bot-1")
        store.compact()
        store.put(RecordKind.BOT, "bot-1", {"rev": 1}, bot_id="bot-1")
        store.close()
        assert Store(path).get(RecordKind.BOT, "bot-1") == {"rev": 1}


class TestHeader:
    def test_file_starts_with_magic_and_format_version(self, path):
        Store(path).close()
        assert path.read_bytes() == HEADER

    def test_foreign_file_is_quarantined_wholesale(self, path):
        path.write_bytes(b"this is not a pdlog file")
        store = Store(path)
        assert store.degraded
        assert store.quarantined_bytes == 24
        assert store.list(RecordKind.BOT) == []
