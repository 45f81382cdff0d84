"""Persistent domain types, status machines, and the publication gate.

Everything here is an immutable value (frozen pydantic models) with no
I/O; identity and timestamps are supplied by the caller through a Runtime.
Mutation happens by constructing replacement values and persisting them
under the store's per-bot writer lock.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from .errors import ValidationError
from .runtime import Runtime, mint_share_token  # noqa: F401  (re-exported op)
from .textdiff import TrackedDiff

MATERIAL_CONTENT_CAP = 20_000

ROOT_PROMPT_TEMPLATE = "You are a tutoring assistant. Context: {description}"
MATERIALS_HEADING = "Reference materials:"


class ModelChoice(str, Enum):
    OPENAI = "openai"
    ANTHROPIC = "anthropic"
    GOOGLE = "google"


class BotStatus(str, Enum):
    DRAFT = "draft"
    PUBLISHED = "published"


class Provenance(str, Enum):
    INITIAL = "initial"
    PIPELINE_REWRITE = "pipeline_rewrite"
    MANUAL_EDIT = "manual_edit"
    TEMPLATE = "template"


class CaseStatus(str, Enum):
    UNRUN = "unrun"
    AWAITING_REVIEW = "awaiting_review"
    PASSED = "passed"
    REGRESSED = "regressed"
    FAILED = "failed"


class RunStatus(str, Enum):
    RUNNING = "running"
    AWAITING_TEACHER = "awaiting_teacher"
    APPLIED = "applied"
    DISCARDED = "discarded"
    ERRORED = "errored"


class Role(str, Enum):
    STUDENT = "student"
    BOT = "bot"


class Verdict(str, Enum):
    PASS = "pass"
    REGRESSION = "regression"
    ERROR = "error"


# The only legal test-case status transitions (self-loops where a re-run
# re-enters the same status are listed explicitly). passed -> awaiting_review
# exists solely for the manual-prompt-edit demotion, which invalidates
# approvals made under the replaced prompt.
CASE_TRANSITIONS: dict[CaseStatus, frozenset[CaseStatus]] = {
    CaseStatus.UNRUN: frozenset({CaseStatus.AWAITING_REVIEW}),
    CaseStatus.AWAITING_REVIEW: frozenset(
        {CaseStatus.PASSED, CaseStatus.FAILED, CaseStatus.AWAITING_REVIEW}
    ),
    CaseStatus.PASSED: frozenset(
        {CaseStatus.REGRESSED, CaseStatus.PASSED, CaseStatus.AWAITING_REVIEW}
    ),
    CaseStatus.REGRESSED: frozenset({CaseStatus.AWAITING_REVIEW, CaseStatus.PASSED}),
    CaseStatus.FAILED: frozenset(),
}


class MaterialAttachment(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    filename: str
    content: str
    byte_size: int
    truncated: bool = False

    @model_validator(mode="after")
    def _check(self) -> "MaterialAttachment":
        if self.byte_size < 0:
            raise ValueError("byte_size must be non-negative")
        if len(self.content) > MATERIAL_CONTENT_CAP:
            raise ValueError(f"content exceeds the {MATERIAL_CONTENT_CAP}-char cap")
        return self


class Bot(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    title: str
    description: str
    model_choice: ModelChoice
    materials: tuple[MaterialAttachment, ...] = ()
    current_version: str
    status: BotStatus = BotStatus.DRAFT
    share_token: Optional[str] = None
    created_at: str

    @model_validator(mode="after")
    def _check(self) -> "Bot":
        if self.status == BotStatus.PUBLISHED and not self.share_token:
            raise ValueError("published bot requires a share_token")
        return self


class PromptVersion(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    bot_id: str
    parent_id: Optional[str] = None
    full_text: str
    diff_from_parent: TrackedDiff = TrackedDiff()
    provenance: Provenance
    origin_correction: Optional[str] = None
    created_at: str

    @model_validator(mode="after")
    def _check(self) -> "PromptVersion":
        if (self.provenance == Provenance.PIPELINE_REWRITE) != (
            self.origin_correction is not None
        ):
            raise ValueError(
                "origin_correction present iff provenance is pipeline_rewrite"
            )
        if self.parent_id is None and self.diff_from_parent.hunks:
            raise ValueError("root version must carry an empty diff")
        return self


class StudentProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    name: str
    description: str = ""
    opening_message: str
    scripted_followups: tuple[str, ...] = ()
    builtin: bool = False

    @model_validator(mode="after")
    def _check(self) -> "StudentProfile":
        if not self.opening_message:
            raise ValueError("opening_message must be non-empty")
        return self


class Turn(BaseModel):
    model_config = ConfigDict(frozen=True)

    role: Role
    text: str
    produced_by_version: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "Turn":
        if self.role == Role.STUDENT and self.produced_by_version is not None:
            raise ValueError("student turns carry no producing version")
        return self


class ApprovedSnapshot(BaseModel):
    model_config = ConfigDict(frozen=True)

    turn_index: int
    text: str
    prompt_version: str


class TestCase(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    bot_id: str
    profile_id: str
    transcript: tuple[Turn, ...] = ()
    status: CaseStatus = CaseStatus.UNRUN
    approved_snapshot: Optional[ApprovedSnapshot] = None
    updated_at: str

    @model_validator(mode="after")
    def _check(self) -> "TestCase":
        for i, turn in enumerate(self.transcript):
            expected = Role.STUDENT if i % 2 == 0 else Role.BOT
            if turn.role != expected:
                raise ValueError(
                    f"transcript must alternate student/bot starting with student "
                    f"(turn {i} is {turn.role.value})"
                )
        if self.status == CaseStatus.PASSED and self.approved_snapshot is None:
            raise ValueError("passed case requires an approved_snapshot")
        return self


class Correction(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    test_case_id: str
    turn_index: int
    original_text: str
    corrected_text: str
    created_at: str

    @model_validator(mode="after")
    def _check(self) -> "Correction":
        if self.corrected_text == self.original_text:
            raise ValueError("corrected_text must differ from original_text")
        if self.turn_index < 0:
            raise ValueError("turn_index must be non-negative")
        return self


class CaseVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    test_case_id: str
    verdict: Verdict
    rationale: str = ""
    replayed_response: str = ""


class RegressionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    evaluated_cases: tuple[CaseVerdict, ...] = ()
    prompt_version: str


class PipelineRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    correction_id: str
    inferred_intent: str = ""
    behavioral_rule: str = ""
    proposed_version: Optional[str] = None
    regression_report: Optional[RegressionReport] = None
    status: RunStatus = RunStatus.RUNNING
    error_detail: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "PipelineRun":
        if self.status in (RunStatus.AWAITING_TEACHER, RunStatus.APPLIED):
            if not self.inferred_intent or self.proposed_version is None:
                raise ValueError(
                    f"{self.status.value} run requires inferred_intent and "
                    "proposed_version"
                )
        if self.status == RunStatus.APPLIED and self.regression_report is None:
            raise ValueError("applied run requires a regression_report")
        return self


class GateDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    allowed: bool
    reasons: tuple[str, ...] = ()
    unpassed_case_ids: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def make_material(
    filename: str, content: str, byte_size: int, material_id: str
) -> MaterialAttachment:
    """Cap extracted text at MATERIAL_CONTENT_CAP chars, recording truncation."""
    truncated = len(content) > MATERIAL_CONTENT_CAP
    return MaterialAttachment(
        id=material_id,
        filename=filename,
        content=content[:MATERIAL_CONTENT_CAP],
        byte_size=byte_size,
        truncated=truncated,
    )


def root_prompt_text(
    description: str, materials: Sequence[MaterialAttachment] = ()
) -> str:
    """Seed scaffold: fixed template around the teacher's learning context,
    with any uploaded material text appended under a fixed heading."""
    text = ROOT_PROMPT_TEMPLATE.format(description=description)
    if materials:
        sections = [f"[{m.filename}]\n{m.content}" for m in materials]
        text += f"\n\n{MATERIALS_HEADING}\n\n" + "\n\n".join(sections)
    return text


def new_bot(
    title: str,
    description: str,
    model_choice: ModelChoice | str,
    runtime: Runtime,
) -> tuple[Bot, PromptVersion]:
    """Create a draft bot with its root prompt version."""
    if not title or not title.strip():
        raise ValidationError("title must be non-empty")
    try:
        choice = ModelChoice(model_choice)
    except ValueError:
        raise ValidationError(f"unknown model_choice {model_choice!r}") from None
    now = runtime.clock()
    bot_id = runtime.new_id("bot")
    version = PromptVersion(
        id=runtime.new_id("ver"),
        bot_id=bot_id,
        parent_id=None,
        full_text=root_prompt_text(description),
        provenance=Provenance.INITIAL,
        created_at=now,
    )
    bot = Bot(
        id=bot_id,
        title=title,
        description=description,
        model_choice=choice,
        current_version=version.id,
        status=BotStatus.DRAFT,
        created_at=now,
    )
    return bot, version


NO_CYCLE_REASON = "no completed pipeline cycle"
NO_CASES_REASON = "no test cases recorded"


def check_publication_gate(
    bot: Bot, cases: Sequence[TestCase], runs: Sequence[PipelineRun]
) -> GateDecision:
    """Allowed iff at least one applied run exists, the suite is non-empty,
    and every test case is passed. Blocked carries one reason per violated
    condition."""
    for case in cases:
        if case.bot_id != bot.id:
            raise ValidationError(f"test case {case.id} does not belong to bot {bot.id}")

    reasons: list[str] = []
    if not any(r.status == RunStatus.APPLIED for r in runs):
        reasons.append(NO_CYCLE_REASON)
    if not cases:
        reasons.append(NO_CASES_REASON)
    unpassed = [c for c in cases if c.status != CaseStatus.PASSED]
    if unpassed:
        listing = ", ".join(f"{c.id} ({c.status.value})" for c in unpassed)
        reasons.append(f"{len(unpassed)} test case(s) not passed: {listing}")
    return GateDecision(
        allowed=not reasons,
        reasons=tuple(reasons),
        unpassed_case_ids=tuple(c.id for c in unpassed),
    )


def check_case_transition(current: CaseStatus, new: CaseStatus) -> None:
    """Raise unless new is reachable from current in the status machine."""
    if new not in CASE_TRANSITIONS[current]:
        raise ValidationError(
            f"illegal test-case transition {current.value} -> {new.value}"
        )
