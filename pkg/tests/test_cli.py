"""Black-box CLI contract: exit codes, regress output format, seed
idempotence, and serve lifecycle. The CLI is invoked as a subprocess."""

import json
import os
import signal
import socket
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest

from promptdesk import seed as seedmod
from promptdesk.gateway import (
    PIPELINE_TEMPERATURE,
    Provider,
    fixture_key,
    write_fixture_file,
)
from promptdesk.scenarios import build_judge_request, builtin_profiles, chat_request_for_transcript

CLI = [sys.executable, "-m", "promptdesk.cli"]


def run_cli(args, data_dir, extra_env=None):
    env = {**os.environ, "PD_DATA_DIR": str(data_dir)}
    env.update(extra_env or {})
    return subprocess.run(CLI + args, capture_output=True, text=True, env=env, timeout=60)


@pytest.fixture
def data_dir(tmp_path):
    return tmp_path / "data"


def seed(data_dir):
    result = run_cli(["seed"], data_dir)
    assert result.returncode == 0, result.stderr
    return result


class TestSeed:
    def test_seed_creates_demo_and_reports(self, data_dir):
        result = seed(data_dir)
        assert seedmod.DEMO_BOT_ID in result.stdout
        assert (data_dir / "fixtures.jsonl").exists()
        assert (data_dir / "promptdesk.pdlog").exists()

    def test_seed_is_idempotent(self, data_dir):
        seed(data_dir)
        size_after_first = (data_dir / "promptdesk.pdlog").stat().st_size
        result = seed(data_dir)
        assert "already present" in result.stdout
        assert (data_dir / "promptdesk.pdlog").stat().st_size == size_after_first


class TestRegress:
    def test_all_pass_exits_zero_with_three_rows(self, data_dir):
        seed(data_dir)
        result = run_cli(["regress", seedmod.DEMO_BOT_ID], data_dir)
        assert result.returncode == 0, result.stderr
        rows = [line.split("\t") for line in result.stdout.strip().split("\n")]
        assert len(rows) == 3
        assert all(row[1] == "pass" for row in rows)
        assert sorted(row[0] for row in rows) == sorted(
            seedmod.demo_case_id(p.id) for p in builtin_profiles()
        )

    def test_degraded_replay_exits_one_with_regression_row(self, data_dir, tmp_path):
        seed(data_dir)
        profile = builtin_profiles()[0]
        degraded = "Just memorize: the median of any list is the middle number."
        replay_key = fixture_key(
            chat_request_for_transcript(
                seedmod.demo_root_prompt(),
                (),
                profile.opening_message,
                Provider.SCRIPTED,
                temperature=PIPELINE_TEMPERATURE,
            )
        )
        judge_key = fixture_key(
            build_judge_request(
                seedmod.REPLIES_ROOT[profile.id], degraded, (), Provider.SCRIPTED
            )
        )
        override = tmp_path / "override.jsonl"
        write_fixture_file(
            override,
            {replay_key: degraded, judge_key: "NO: lectures instead of guiding."},
        )
        result = run_cli(
            ["regress", seedmod.DEMO_BOT_ID,
             "--fixtures", str(data_dir / "fixtures.jsonl"),
             "--fixtures", str(override)],
            data_dir,
        )
        assert result.returncode == 1
        rows = [line.split("\t") for line in result.stdout.strip().split("\n")]
        verdicts = {row[0]: row[1] for row in rows}
        assert verdicts[seedmod.demo_case_id(profile.id)] == "regression"
        assert sum(1 for v in verdicts.values() if v == "regression") == 1

    def test_unknown_bot_exits_two(self, data_dir):
        seed(data_dir)
        result = run_cli(["regress", "bot-nope"], data_dir)
        assert result.returncode == 2
        assert "bot-nope" in result.stderr

    def test_missing_fixtures_yield_error_verdicts_and_exit_one(self, data_dir):
        seed(data_dir)
        empty = data_dir / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        result = run_cli(
            ["regress", seedmod.DEMO_BOT_ID, "--fixtures", str(empty)], data_dir
        )
        assert result.returncode == 1
        rows = [line.split("\t") for line in result.stdout.strip().split("\n")]
        assert all(row[1] == "error" for row in rows)

    def test_output_is_machine_parseable(self, data_dir):
        seed(data_dir)
        result = run_cli(["regress", seedmod.DEMO_BOT_ID], data_dir)
        for line in result.stdout.strip().split("\n"):
            parts = line.split("\t")
            assert len(parts) == 3
            assert "\n" not in parts[2]


class TestCompact:
    def test_compact_rewrites_the_log(self, data_dir):
        seed(data_dir)
        result = run_cli(["compact"], data_dir)
        assert result.returncode == 0
        assert "records kept" in result.stdout


class TestServe:
    def _free_port(self):
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            return s.getsockname()[1]

    def test_serve_answers_health_and_drains_on_sigterm(self, data_dir):
        seed(data_dir)
        port = self._free_port()
        env = {**os.environ, "PD_DATA_DIR": str(data_dir)}
        process = subprocess.Popen(
            CLI + ["serve", "--bind", f"127.0.0.1:{port}"],
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        try:
            deadline = time.monotonic() + 15
            body = None
            while time.monotonic() < deadline:
                try:
                    with urllib.request.urlopen(
                        f"http://127.0.0.1:{port}/healthz", timeout=1
                    ) as response:
                        body = json.load(response)
                    break
                except OSError:
                    time.sleep(0.1)
            assert body == {"status": "ok"}
            process.send_signal(signal.SIGTERM)
            # uvicorn drains in-flight requests, then re-raises the signal so
            # the exit status reflects the terminating signal.
            assert process.wait(timeout=15) in (0, -signal.SIGTERM)
        finally:
            if process.poll() is None:
                process.kill()

    def test_bind_conflict_is_a_startup_error(self, data_dir):
        seed(data_dir)
        port = self._free_port()
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", port))
        blocker.listen(1)
        try:
            result = run_cli(["serve", "--bind", f"127.0.0.1:{port}"], data_dir)
            assert result.returncode == 1
            assert "cannot bind" in result.stderr
        finally:
            blocker.close()


class TestFlagPrecedence:
    def test_flag_overrides_env_for_data_dir(self, tmp_path):
        env_dir = tmp_path / "env-data"
        flag_dir = tmp_path / "flag-data"
        result = subprocess.run(
            CLI + ["seed", "--data-dir", str(flag_dir)],
            capture_output=True,
            text=True,
            env={**os.environ, "PD_DATA_DIR": str(env_dir)},
            timeout=60,
        )
        assert result.returncode == 0
        assert flag_dir.exists()
        assert not env_dir.exists()
