"""Authoring workflow facade: every state transition the API or CLI can
trigger is a method here, executed under the store's per-bot writer lock.

The HTTP layer adds no rules of its own; it maps requests onto these
methods one-to-one.
"""

from __future__ import annotations

import os
import threading
import time
from typing import Callable, Optional, Sequence

from pydantic import BaseModel

from . import pipeline
from .assets import BOT_TEMPLATE_NAMES, builtin_profiles, load_bot_template, render
from .domain import (
    ApprovedSnapshot,
    Bot,
    BotStatus,
    CaseStatus,
    Correction,
    MaterialAttachment,
    MATERIALS_HEADING,
    PipelineRun,
    PromptVersion,
    Provenance,
    RegressionReport,
    Role,
    RunStatus,
    StudentProfile,
    TestCase,
    Turn,
    Verdict,
    check_case_transition,
    check_publication_gate,
    make_material,
    new_bot,
)
from .errors import (
    BusyError,
    GateBlockedError,
    GatewayError,
    InputRequiredError,
    NotFoundError,
    PipelineError,
    StateError,
    ValidationError,
)
from .gateway import INTERACTIVE_TEMPERATURE, Gateway, Provider
from .runtime import Runtime
from .scenarios import (
    JudgeMode,
    chat_request_for_transcript,
    next_followup_index,
    replay_student_turns,
)
from .store import RecordKind, Store
from .textdiff import compute_diff

SHARE_SESSION_TTL_SECS = 30 * 60


class ServiceConfig(BaseModel):
    provider: str = "scripted"  # scripted | auto | openai | anthropic | google
    judge_mode: JudgeMode = JudgeMode.LLM
    bind_addr: str = "127.0.0.1:8080"

    @classmethod
    def from_env(cls, env=None) -> "ServiceConfig":
        env = os.environ if env is None else env
        return cls(
            provider=env.get("PD_PROVIDER_DEFAULT", "scripted"),
            judge_mode=JudgeMode(env.get("PD_JUDGE_MODE", "llm")),
            bind_addr=env.get("PD_BIND_ADDR", "127.0.0.1:8080"),
        )


class _ShareSession:
    __slots__ = ("turns", "last_seen")

    def __init__(self, now: float):
        self.turns: list[Turn] = []
        self.last_seen = now


class AuthoringService:
    def __init__(
        self,
        store: Store,
        gateway: Gateway,
        config: ServiceConfig | None = None,
        runtime: Runtime | None = None,
        monotonic: Callable[[], float] = time.monotonic,
    ) -> None:
        self.store = store
        self.gateway = gateway
        self.config = config if config is not None else ServiceConfig()
        self.runtime = runtime if runtime is not None else Runtime()
        self._monotonic = monotonic
        self._sessions: dict[tuple[str, str], _ShareSession] = {}
        self._sessions_lock = threading.Lock()

    # -- load/save helpers ----------------------------------------------------

    def _load_bot(self, bot_id: str) -> Bot:
        payload = self.store.get(RecordKind.BOT, bot_id)
        if payload is None:
            raise NotFoundError(f"bot {bot_id} does not exist")
        return Bot.model_validate(payload)

    def _load_version(self, version_id: str) -> PromptVersion:
        payload = self.store.get(RecordKind.VERSION, version_id)
        if payload is None:
            raise NotFoundError(f"prompt version {version_id} does not exist")
        return PromptVersion.model_validate(payload)

    def _load_case(self, case_id: str) -> TestCase:
        payload = self.store.get(RecordKind.TEST_CASE, case_id)
        if payload is None:
            raise NotFoundError(f"test case {case_id} does not exist")
        return TestCase.model_validate(payload)

    def _load_run(self, run_id: str) -> PipelineRun:
        payload = self.store.get(RecordKind.RUN, run_id)
        if payload is None:
            raise NotFoundError(f"pipeline run {run_id} does not exist")
        return PipelineRun.model_validate(payload)

    def _load_correction(self, correction_id: str) -> Correction:
        payload = self.store.get(RecordKind.CORRECTION, correction_id)
        if payload is None:
            raise NotFoundError(f"correction {correction_id} does not exist")
        return Correction.model_validate(payload)

    def _save_bot(self, bot: Bot) -> None:
        self.store.put(RecordKind.BOT, bot.id, bot.model_dump(mode="json"), bot_id=bot.id)

    def _save_version(self, version: PromptVersion) -> None:
        self.store.put(
            RecordKind.VERSION,
            version.id,
            version.model_dump(mode="json"),
            bot_id=version.bot_id,
        )

    def _save_case(self, case: TestCase) -> None:
        self.store.put(
            RecordKind.TEST_CASE, case.id, case.model_dump(mode="json"), bot_id=case.bot_id
        )

    def _save_run(self, run: PipelineRun, bot_id: str) -> None:
        self.store.put(RecordKind.RUN, run.id, run.model_dump(mode="json"), bot_id=bot_id)

    def cases_for(self, bot_id: str) -> list[TestCase]:
        return [
            TestCase.model_validate(p)
            for p in self.store.list(RecordKind.TEST_CASE, bot_id)
        ]

    def runs_for(self, bot_id: str) -> list[PipelineRun]:
        return [PipelineRun.model_validate(p) for p in self.store.list(RecordKind.RUN, bot_id)]

    def versions_for(self, bot_id: str) -> list[PromptVersion]:
        return [
            PromptVersion.model_validate(p)
            for p in self.store.list(RecordKind.VERSION, bot_id)
        ]

    def provider_for(self, bot: Bot) -> Provider:
        if self.config.provider == "auto":
            return Provider(bot.model_choice.value)
        return Provider(self.config.provider)

    # -- bots -------------------------------------------------------------------

    def create_bot(self, title: str, description: str, model_choice: str) -> Bot:
        bot, root = new_bot(title, description, model_choice, self.runtime)
        with self.store.bot_lock(bot.id):
            self._save_version(root)
            self._save_bot(bot)
        return bot

    def get_bot(self, bot_id: str) -> Bot:
        return self._load_bot(bot_id)

    def list_bots(self) -> list[Bot]:
        return [Bot.model_validate(p) for p in self.store.list(RecordKind.BOT)]

    def current_prompt_text(self, bot: Bot) -> str:
        return self._load_version(bot.current_version).full_text

    def add_material(self, bot_id: str, filename: str, data: bytes) -> Bot:
        """Attach extracted plain text to the bot and rebuild the prompt's
        reference-materials section as a new manual_edit version."""
        content = data.decode("utf-8", errors="replace")
        def mutate() -> Bot:
            bot = self._load_bot(bot_id)
            material = make_material(
                filename, content, len(data), self.runtime.new_id("mat")
            )
            materials = bot.materials + (material,)
            current = self._load_version(bot.current_version)
            new_text = _with_materials_section(current.full_text, materials)
            bot = bot.model_copy(update={"materials": materials})
            if new_text != current.full_text:
                version = self._append_version(
                    bot, current, new_text, Provenance.MANUAL_EDIT
                )
                bot = bot.model_copy(update={"current_version": version.id})
                self._save_version(version)
                self._demote_passed_cases(bot.id)
            self._save_bot(bot)
            return bot
        return self.store.with_bot_lock(bot_id, mutate)

    # -- profiles ----------------------------------------------------------------

    def list_profiles(self) -> list[StudentProfile]:
        custom = [
            StudentProfile.model_validate(p) for p in self.store.list(RecordKind.PROFILE)
        ]
        return list(builtin_profiles()) + custom

    def get_profile(self, profile_id: str) -> StudentProfile:
        for profile in builtin_profiles():
            if profile.id == profile_id:
                return profile
        payload = self.store.get(RecordKind.PROFILE, profile_id)
        if payload is None:
            raise NotFoundError(f"student profile {profile_id} does not exist")
        return StudentProfile.model_validate(payload)

    def create_profile(
        self,
        name: str,
        opening_message: str,
        description: str = "",
        followups: Sequence[str] = (),
    ) -> StudentProfile:
        if not opening_message:
            raise ValidationError("opening_message must be non-empty")
        profile = StudentProfile(
            id=self.runtime.new_id("profile"),
            name=name,
            description=description,
            opening_message=opening_message,
            scripted_followups=tuple(followups),
            builtin=False,
        )
        self.store.put(RecordKind.PROFILE, profile.id, profile.model_dump(mode="json"))
        return profile

    # -- test cases ----------------------------------------------------------------

    def start_test_case(
        self, bot_id: str, profile_id: str
    ) -> tuple[TestCase, Optional[str]]:
        """Open a conversation: the profile's opening message plus the bot's
        reply. On gateway failure the case is still created (status unrun,
        no bot turn) and the error text is returned alongside it."""
        profile = self.get_profile(profile_id)

        def mutate() -> tuple[TestCase, Optional[str]]:
            bot = self._load_bot(bot_id)
            version = self._load_version(bot.current_version)
            opening = Turn(role=Role.STUDENT, text=profile.opening_message)
            case_id = self.runtime.new_id("case")
            try:
                request = chat_request_for_transcript(
                    version.full_text, (), profile.opening_message, self.provider_for(bot)
                )
                reply = self.gateway.complete(request).text
            except GatewayError as exc:
                case = TestCase(
                    id=case_id,
                    bot_id=bot.id,
                    profile_id=profile.id,
                    transcript=(opening,),
                    status=CaseStatus.UNRUN,
                    updated_at=self.runtime.clock(),
                )
                self._save_case(case)
                return case, str(exc)
            case = TestCase(
                id=case_id,
                bot_id=bot.id,
                profile_id=profile.id,
                transcript=(
                    opening,
                    Turn(role=Role.BOT, text=reply, produced_by_version=version.id),
                ),
                status=CaseStatus.AWAITING_REVIEW,
                updated_at=self.runtime.clock(),
            )
            self._save_case(case)
            return case, None

        return self.store.with_bot_lock(bot_id, mutate)

    def advance_test_case(
        self, case_id: str, student_message: Optional[str] = None
    ) -> TestCase:
        """Append the next student turn (explicit or scripted follow-up) and
        the bot's reply."""
        case = self._load_case(case_id)

        def mutate() -> TestCase:
            current = self._load_case(case_id)
            if not current.transcript or current.transcript[-1].role != Role.BOT:
                raise StateError("the conversation is waiting on the bot, not the student")
            message = student_message
            if message is None:
                profile = self.get_profile(current.profile_id)
                index = next_followup_index(current)
                if index >= len(profile.scripted_followups):
                    raise InputRequiredError(
                        "no scripted follow-ups remain; supply a student message"
                    )
                message = profile.scripted_followups[index]
            bot = self._load_bot(current.bot_id)
            version = self._load_version(bot.current_version)
            request = chat_request_for_transcript(
                version.full_text, current.transcript, message, self.provider_for(bot)
            )
            reply = self.gateway.complete(request).text
            check_case_transition(current.status, CaseStatus.AWAITING_REVIEW)
            updated = current.model_copy(
                update={
                    "transcript": current.transcript
                    + (
                        Turn(role=Role.STUDENT, text=message),
                        Turn(role=Role.BOT, text=reply, produced_by_version=version.id),
                    ),
                    "status": CaseStatus.AWAITING_REVIEW,
                    "updated_at": self.runtime.clock(),
                }
            )
            self._save_case(updated)
            return updated

        return self.store.with_bot_lock(case.bot_id, mutate)

    def mark_pass(self, case_id: str) -> TestCase:
        """Approve the final bot turn; snapshots it for regression checks."""
        case = self._load_case(case_id)

        def mutate() -> TestCase:
            current = self._load_case(case_id)
            if current.status == CaseStatus.UNRUN:
                raise StateError("nothing to approve: the case has not run")
            if current.status not in (CaseStatus.AWAITING_REVIEW, CaseStatus.REGRESSED):
                raise StateError(
                    f"cannot mark a {current.status.value} case as passed"
                )
            if not current.transcript or current.transcript[-1].role != Role.BOT:
                raise StateError("transcript must end with a bot turn")
            bot = self._load_bot(current.bot_id)
            last_index = len(current.transcript) - 1
            last = current.transcript[last_index]
            producing = last.produced_by_version or bot.current_version
            if producing != bot.current_version:
                raise StateError(
                    "the final reply was produced under an older prompt; "
                    "re-run the case before approving it"
                )
            check_case_transition(current.status, CaseStatus.PASSED)
            updated = current.model_copy(
                update={
                    "status": CaseStatus.PASSED,
                    "approved_snapshot": ApprovedSnapshot(
                        turn_index=last_index, text=last.text, prompt_version=producing
                    ),
                    "updated_at": self.runtime.clock(),
                }
            )
            self._save_case(updated)
            return updated

        return self.store.with_bot_lock(case.bot_id, mutate)

    def refresh_after_apply(self, case_id: str) -> tuple[TestCase, Optional[str]]:
        """Replay the case's student turns against the bot's current version.

        On gateway failure the case keeps its old transcript and status; the
        error text is returned alongside it."""
        case = self._load_case(case_id)

        def mutate() -> tuple[TestCase, Optional[str]]:
            current = self._load_case(case_id)
            bot = self._load_bot(current.bot_id)
            version = self._load_version(bot.current_version)
            try:
                refreshed = self._replayed_case(current, version)
            except GatewayError as exc:
                return current, str(exc)
            if refreshed.status != current.status:
                check_case_transition(current.status, refreshed.status)
            self._save_case(refreshed)
            return refreshed, None

        return self.store.with_bot_lock(case.bot_id, mutate)

    def _replayed_case(
        self,
        case: TestCase,
        version: PromptVersion,
        status_override: Optional[CaseStatus] = None,
    ) -> TestCase:
        """The case with bot turns regenerated under version; student turns
        are untouched. Status becomes awaiting_review unless overridden."""
        student_texts = [t.text for t in case.transcript if t.role == Role.STUDENT]
        replies = replay_student_turns(
            self.gateway, version.full_text, student_texts, self.provider_for(self._load_bot(case.bot_id))
        )
        transcript: list[Turn] = []
        for text, reply in zip(student_texts, replies):
            transcript.append(Turn(role=Role.STUDENT, text=text))
            transcript.append(
                Turn(role=Role.BOT, text=reply, produced_by_version=version.id)
            )
        status = status_override or CaseStatus.AWAITING_REVIEW
        update: dict = {
            "transcript": tuple(transcript),
            "status": status,
            "updated_at": self.runtime.clock(),
        }
        if status == CaseStatus.PASSED and case.approved_snapshot is not None:
            update["approved_snapshot"] = case.approved_snapshot.model_copy(
                update={"prompt_version": version.id}
            )
        return case.model_copy(update=update)

    # -- corrections and pipeline runs ---------------------------------------------

    def submit_correction(
        self, case_id: str, turn_index: int, corrected_text: str, synchronous: bool = False
    ) -> tuple[Correction, PipelineRun]:
        """Record a teacher edit of one bot turn and start the pipeline.

        The transcript is not rewritten here; it refreshes only after the
        teacher applies the resulting prompt update."""
        case = self._load_case(case_id)

        def mutate() -> tuple[Correction, PipelineRun]:
            current = self._load_case(case_id)
            bot = self._load_bot(current.bot_id)
            if bot.status != BotStatus.DRAFT:
                raise StateError("published bots cannot be corrected")
            if turn_index < 0 or turn_index >= len(current.transcript):
                raise ValidationError(
                    f"turn index {turn_index} is out of range (transcript has "
                    f"{len(current.transcript)} turns)"
                )
            turn = current.transcript[turn_index]
            if turn.role != Role.BOT:
                raise ValidationError(f"turn {turn_index} is a student turn, not a bot turn")
            if corrected_text == turn.text:
                raise ValidationError("corrected text is identical to the current response")
            if any(r.status == RunStatus.RUNNING for r in self.runs_for(bot.id)):
                raise BusyError(f"a pipeline run is already in flight for bot {bot.id}")
            correction = Correction(
                id=self.runtime.new_id("corr"),
                test_case_id=current.id,
                turn_index=turn_index,
                original_text=turn.text,
                corrected_text=corrected_text,
                created_at=self.runtime.clock(),
            )
            self.store.put(
                RecordKind.CORRECTION,
                correction.id,
                correction.model_dump(mode="json"),
                bot_id=bot.id,
            )
            run = PipelineRun(
                id=self.runtime.new_id("run"),
                correction_id=correction.id,
                status=RunStatus.RUNNING,
            )
            self._save_run(run, bot.id)
            return correction, run

        correction, run = self.store.with_bot_lock(case.bot_id, mutate)
        if synchronous:
            run = self.execute_run(run.id)
        else:
            worker = threading.Thread(
                target=self._execute_run_safely, args=(run.id,), daemon=True
            )
            worker.start()
        return correction, run

    def run_pipeline(self, correction_id: str) -> PipelineRun:
        """Synchronous pipeline execution for an already persisted correction."""
        correction = self._load_correction(correction_id)
        case = self._load_case(correction.test_case_id)

        def mutate() -> PipelineRun:
            bot = self._load_bot(case.bot_id)
            if bot.status != BotStatus.DRAFT:
                raise StateError("published bots cannot be corrected")
            if any(r.status == RunStatus.RUNNING for r in self.runs_for(bot.id)):
                raise BusyError(f"a pipeline run is already in flight for bot {bot.id}")
            run = PipelineRun(
                id=self.runtime.new_id("run"),
                correction_id=correction.id,
                status=RunStatus.RUNNING,
            )
            self._save_run(run, bot.id)
            return run

        run = self.store.with_bot_lock(case.bot_id, mutate)
        return self.execute_run(run.id)

    def _execute_run_safely(self, run_id: str) -> None:
        try:
            self.execute_run(run_id)
        except Exception:  # worker thread must never die silently mid-run
            try:
                run = self._load_run(run_id)
                correction = self._load_correction(run.correction_id)
                case = self._load_case(correction.test_case_id)
                self._save_run(
                    run.model_copy(
                        update={
                            "status": RunStatus.ERRORED,
                            "error_detail": "internal pipeline failure",
                        }
                    ),
                    case.bot_id,
                )
            except Exception:
                pass

    def execute_run(self, run_id: str) -> PipelineRun:
        """Drive one pipeline run to awaiting_teacher or errored. Holds the
        bot's writer lock for the whole run, so runs serialize per bot and
        the passed-case set is stable while the report is built."""
        run = self._load_run(run_id)
        correction = self._load_correction(run.correction_id)
        case = self._load_case(correction.test_case_id)

        def mutate() -> PipelineRun:
            current_run = self._load_run(run_id)
            if current_run.status != RunStatus.RUNNING:
                return current_run
            bot = self._load_bot(case.bot_id)
            version = self._load_version(bot.current_version)
            provider = self.provider_for(bot)
            student_message = (
                case.transcript[correction.turn_index - 1].text
                if correction.turn_index >= 1
                else ""
            )
            try:
                intent = pipeline.analyze_correction(
                    self.gateway, correction, student_message, version.full_text, provider
                )
                update = pipeline.propose_rewrite(
                    self.gateway, version.full_text, intent, correction, provider
                )
                staged = PromptVersion(
                    id=self.runtime.new_id("ver"),
                    bot_id=bot.id,
                    parent_id=version.id,
                    full_text=update.new_full_text,
                    diff_from_parent=update.diff,
                    provenance=Provenance.PIPELINE_REWRITE,
                    origin_correction=correction.id,
                    created_at=self.runtime.clock(),
                )
                self._save_version(staged)
                passed = [c for c in self.cases_for(bot.id) if c.status == CaseStatus.PASSED]
                report = pipeline.verify_regressions(
                    self.gateway,
                    staged.full_text,
                    staged.id,
                    passed,
                    self.rules_on_chain(bot),
                    self.config.judge_mode,
                    provider,
                )
                finished = current_run.model_copy(
                    update={
                        "inferred_intent": intent.summary,
                        "behavioral_rule": intent.behavioral_rule,
                        "proposed_version": staged.id,
                        "regression_report": report,
                        "status": RunStatus.AWAITING_TEACHER,
                    }
                )
            except (GatewayError, PipelineError, ValidationError) as exc:
                finished = current_run.model_copy(
                    update={"status": RunStatus.ERRORED, "error_detail": str(exc)}
                )
            self._save_run(finished, bot.id)
            return finished

        return self.store.with_bot_lock(case.bot_id, mutate)

    def get_run(self, run_id: str) -> PipelineRun:
        return self._load_run(run_id)

    def bot_id_of_run(self, run: PipelineRun) -> str:
        correction = self._load_correction(run.correction_id)
        return self._load_case(correction.test_case_id).bot_id

    def decide_run(
        self, run_id: str, decision: str
    ) -> tuple[Bot, PipelineRun, list[TestCase], list[str]]:
        """Teacher verdict on a staged update. apply advances the bot's
        current version, folds the regression verdicts into case statuses,
        and refreshes every case's transcript under the new prompt; discard
        changes nothing else."""
        if decision not in ("apply", "discard"):
            raise ValidationError("decision must be apply or discard")
        run = self._load_run(run_id)
        bot_id = self.bot_id_of_run(run)

        def mutate() -> tuple[Bot, PipelineRun, list[TestCase], list[str]]:
            current_run = self._load_run(run_id)
            if current_run.status != RunStatus.AWAITING_TEACHER:
                raise StateError(
                    f"run {run_id} is {current_run.status.value}, not awaiting_teacher"
                )
            bot = self._load_bot(bot_id)
            if decision == "discard":
                discarded = current_run.model_copy(update={"status": RunStatus.DISCARDED})
                self._save_run(discarded, bot.id)
                return bot, discarded, self.cases_for(bot.id), []

            assert current_run.proposed_version is not None
            assert current_run.regression_report is not None
            version = self._load_version(current_run.proposed_version)
            bot = bot.model_copy(update={"current_version": version.id})
            self._save_bot(bot)
            applied = current_run.model_copy(update={"status": RunStatus.APPLIED})
            self._save_run(applied, bot.id)

            # Verdict handling takes precedence over the refresh below.
            targets: dict[str, CaseStatus] = {}
            for entry in current_run.regression_report.evaluated_cases:
                if entry.verdict == Verdict.PASS:
                    targets[entry.test_case_id] = CaseStatus.PASSED
                else:
                    targets[entry.test_case_id] = CaseStatus.REGRESSED

            warnings: list[str] = []
            refreshed: list[TestCase] = []
            for case in self.cases_for(bot.id):
                if case.status == CaseStatus.FAILED or not case.transcript:
                    refreshed.append(case)
                    continue
                target = targets.get(case.id)
                check_case_transition(case.status, target or CaseStatus.AWAITING_REVIEW)
                try:
                    updated = self._replayed_case(case, version, status_override=target)
                except GatewayError as exc:
                    # Verdict handling still applies when the replay fails;
                    # only the transcript is left untouched.
                    warnings.append(f"{case.id}: {exc}")
                    if target is None:
                        refreshed.append(case)
                        continue
                    updated = self._with_verdict_status(case, target, version.id)
                self._save_case(updated)
                refreshed.append(updated)
            return bot, applied, refreshed, warnings

        return self.store.with_bot_lock(bot_id, mutate)

    def _with_verdict_status(
        self, case: TestCase, target: CaseStatus, version_id: str
    ) -> TestCase:
        update: dict = {"status": target, "updated_at": self.runtime.clock()}
        if target == CaseStatus.PASSED and case.approved_snapshot is not None:
            update["approved_snapshot"] = case.approved_snapshot.model_copy(
                update={"prompt_version": version_id}
            )
        return case.model_copy(update=update)

    def rules_on_chain(self, bot: Bot) -> list[str]:
        """behavioral_rules of applied runs along the current version chain,
        in the order they were accumulated (root first)."""
        versions = {v.id: v for v in self.versions_for(bot.id)}
        chain: list[str] = []
        cursor: Optional[str] = bot.current_version
        while cursor is not None:
            chain.append(cursor)
            cursor = versions[cursor].parent_id if cursor in versions else None
        chain.reverse()
        chain_set = set(chain)
        rules: dict[str, str] = {}
        for run in self.runs_for(bot.id):
            if (
                run.status == RunStatus.APPLIED
                and run.proposed_version in chain_set
                and run.behavioral_rule
            ):
                rules[run.proposed_version] = run.behavioral_rule
        return [rules[vid] for vid in chain if vid in rules]

    # -- manual prompt editing ---------------------------------------------------

    def set_prompt(
        self,
        bot_id: str,
        full_text: Optional[str] = None,
        template: Optional[str] = None,
    ) -> tuple[Bot, PromptVersion]:
        """Direct prompt edit or template instantiation; passed cases demote
        to awaiting_review because their approvals predate the new prompt."""
        if (full_text is None) == (template is None):
            raise ValidationError("supply exactly one of full_text or template")

        def mutate() -> tuple[Bot, PromptVersion]:
            bot = self._load_bot(bot_id)
            current = self._load_version(bot.current_version)
            if template is not None:
                if template not in BOT_TEMPLATE_NAMES:
                    raise ValidationError(
                        f"unknown template {template!r}; available: "
                        + ", ".join(BOT_TEMPLATE_NAMES)
                    )
                base = render(
                    load_bot_template(template), {"description": bot.description}
                ).strip()
                new_text = _with_materials_section(base, bot.materials)
                provenance = Provenance.TEMPLATE
            else:
                assert full_text is not None
                new_text = full_text
                provenance = Provenance.MANUAL_EDIT
            if not new_text.strip():
                raise ValidationError("prompt text must be non-empty")
            if new_text == current.full_text:
                raise ValidationError("prompt text is unchanged")
            version = self._append_version(bot, current, new_text, provenance)
            self._save_version(version)
            bot = bot.model_copy(update={"current_version": version.id})
            self._save_bot(bot)
            self._demote_passed_cases(bot.id)
            return bot, version

        return self.store.with_bot_lock(bot_id, mutate)

    def _append_version(
        self, bot: Bot, parent: PromptVersion, new_text: str, provenance: Provenance
    ) -> PromptVersion:
        return PromptVersion(
            id=self.runtime.new_id("ver"),
            bot_id=bot.id,
            parent_id=parent.id,
            full_text=new_text,
            diff_from_parent=compute_diff(parent.full_text, new_text),
            provenance=provenance,
            created_at=self.runtime.clock(),
        )

    def _demote_passed_cases(self, bot_id: str) -> None:
        for case in self.cases_for(bot_id):
            if case.status == CaseStatus.PASSED:
                self._save_case(
                    case.model_copy(
                        update={
                            "status": CaseStatus.AWAITING_REVIEW,
                            "updated_at": self.runtime.clock(),
                        }
                    )
                )

    # -- publication and sharing --------------------------------------------------

    def publish(self, bot_id: str) -> tuple[Bot, str]:
        def mutate() -> tuple[Bot, str]:
            bot = self._load_bot(bot_id)
            if bot.status != BotStatus.DRAFT:
                raise StateError(f"bot {bot_id} is already published")
            decision = check_publication_gate(
                bot, self.cases_for(bot_id), self.runs_for(bot_id)
            )
            if not decision.allowed:
                raise GateBlockedError(
                    list(decision.reasons), list(decision.unpassed_case_ids)
                )
            token = self.runtime.new_token()
            published = bot.model_copy(
                update={"status": BotStatus.PUBLISHED, "share_token": token}
            )
            self._save_bot(published)
            return published, f"/share/{token}"

        return self.store.with_bot_lock(bot_id, mutate)

    def bot_by_token(self, token: str) -> Bot:
        for payload in self.store.list(RecordKind.BOT):
            bot = Bot.model_validate(payload)
            if bot.status == BotStatus.PUBLISHED and bot.share_token == token:
                return bot
        raise NotFoundError("no published bot matches this link")

    def share_chat(
        self, token: str, message: str, session_id: Optional[str] = None
    ) -> tuple[str, str]:
        """Student-facing chat under a published bot's current prompt.

        Sessions are in-memory with a 30-minute idle expiry; an unknown or
        expired session id transparently starts a fresh one."""
        if not message:
            raise ValidationError("message must be non-empty")
        bot = self.bot_by_token(token)
        now = self._monotonic()
        with self._sessions_lock:
            self._expire_sessions(now)
            session: Optional[_ShareSession] = None
            if session_id is not None:
                session = self._sessions.get((token, session_id))
            if session is None:
                session_id = self.runtime.new_id("sess")
                session = _ShareSession(now)
                self._sessions[(token, session_id)] = session
            history = tuple(session.turns)
        version = self._load_version(bot.current_version)
        request = chat_request_for_transcript(
            version.full_text,
            history,
            message,
            self.provider_for(bot),
            temperature=INTERACTIVE_TEMPERATURE,
        )
        reply = self.gateway.complete(request).text
        with self._sessions_lock:
            session.turns.extend(
                (
                    Turn(role=Role.STUDENT, text=message),
                    Turn(role=Role.BOT, text=reply, produced_by_version=version.id),
                )
            )
            session.last_seen = now
        assert session_id is not None
        return reply, session_id

    def _expire_sessions(self, now: float) -> None:
        stale = [
            key
            for key, session in self._sessions.items()
            if now - session.last_seen > SHARE_SESSION_TTL_SECS
        ]
        for key in stale:
            del self._sessions[key]

    # -- headless regression --------------------------------------------------------

    def regress(self, bot_id: str) -> RegressionReport:
        """Replay every passed case against the bot's current version."""
        bot = self._load_bot(bot_id)
        version = self._load_version(bot.current_version)
        passed = [c for c in self.cases_for(bot_id) if c.status == CaseStatus.PASSED]
        return pipeline.verify_regressions(
            self.gateway,
            version.full_text,
            version.id,
            passed,
            self.rules_on_chain(bot),
            self.config.judge_mode,
            self.provider_for(bot),
        )


def _with_materials_section(prompt_text: str, materials: Sequence[MaterialAttachment]) -> str:
    """Rebuild the reference-materials section at the end of the prompt."""
    heading_index = prompt_text.find(f"\n\n{MATERIALS_HEADING}\n")
    base = prompt_text[:heading_index] if heading_index != -1 else prompt_text
    if not materials:
        return base
    sections = [f"[{m.filename}]\n{m.content}" for m in materials]
    return base + f"\n\n{MATERIALS_HEADING}\n\n" + "\n\n".join(sections)
