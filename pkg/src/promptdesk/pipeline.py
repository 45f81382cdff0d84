"""The three-step correction pipeline: infer intent from an edited reply,
propose a targeted system-prompt rewrite, and verify the rewrite against
every previously passed test case.

Each step is a pure function over a gateway; run orchestration and
persistence live in the service layer.
"""

from __future__ import annotations

import re
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from .assets import load_template, render
from .domain import CaseStatus, CaseVerdict, Correction, RegressionReport, TestCase, Verdict
from .errors import GatewayError, PipelineError, ValidationError
from .gateway import PIPELINE_TEMPERATURE, ChatMessage, ChatRequest, Gateway, Provider
from .scenarios import JudgeMode, judge_equivalence, replay_student_turns, student_texts_up_to
from .textdiff import TrackedDiff, compute_diff

INTENT_REPROMPT_SUFFIX = (
    "Your previous reply could not be parsed. Reply again with exactly one fenced "
    "block containing an `intent:` line and a `rule:` line."
)

REWRITE_RETRY_SUFFIX = (
    "Your previous reply was not usable: the updated prompt must keep the original "
    "prompt's first line verbatim and must differ from the original prompt. Reply "
    "with the complete updated system prompt and nothing else."
)


class InferredIntent(BaseModel):
    model_config = ConfigDict(frozen=True)

    summary: str
    behavioral_rule: str

    @model_validator(mode="after")
    def _check(self) -> "InferredIntent":
        if not self.summary.strip() or not self.behavioral_rule.strip():
            raise ValueError("summary and behavioral_rule must be non-empty")
        return self


class ProposedPromptUpdate(BaseModel):
    model_config = ConfigDict(frozen=True)

    new_full_text: str
    diff: TrackedDiff
    rationale: str


# -- structured-reply parsing -------------------------------------------------

_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_LABEL = re.compile(r"^(\w+)\s*:\s*(.*)$")


def parse_labeled_fields(text: str, labels: Sequence[str]) -> Optional[dict[str, str]]:
    """Parse `label: value` fields (multi-line values) out of the first fenced
    block, falling back to the whole text. None unless every label is present
    and non-empty."""
    fence = _FENCE.search(text)
    body = fence.group(1) if fence else text
    fields: dict[str, list[str]] = {}
    current: Optional[str] = None
    wanted = {label.lower() for label in labels}
    for line in body.split("\n"):
        match = _LABEL.match(line)
        if match and match.group(1).lower() in wanted:
            current = match.group(1).lower()
            fields[current] = [match.group(2)]
        elif current is not None:
            fields[current].append(line)
    result = {label: "\n".join(lines).strip() for label, lines in fields.items()}
    if any(not result.get(label) for label in wanted):
        return None
    return result


def extract_prompt_reply(text: str) -> str:
    """A rewrite reply is the new prompt, optionally wrapped in a fence."""
    fence = _FENCE.search(text)
    body = fence.group(1) if fence else text
    return body.strip()


# -- step 1: intent inference --------------------------------------------------

def build_intent_request(
    current_prompt: str,
    student_message: str,
    original_response: str,
    corrected_response: str,
    provider: Provider,
    reprompt: bool = False,
) -> ChatRequest:
    body = render(
        load_template("intent_analysis"),
        {
            "current_prompt": current_prompt,
            "student_message": student_message,
            "original_response": original_response,
            "corrected_response": corrected_response,
        },
    )
    if reprompt:
        body = body + "\n\n" + INTENT_REPROMPT_SUFFIX
    return ChatRequest(
        system_prompt="",
        messages=(ChatMessage(role="user", text=body),),
        temperature=PIPELINE_TEMPERATURE,
        provider=provider,
    )


def analyze_correction(
    gateway: Gateway,
    correction: Correction,
    student_message: str,
    current_prompt: str,
    provider: Provider,
) -> InferredIntent:
    """Infer the teaching intent behind an edit; one reprompt on parse failure."""
    if correction.corrected_text == correction.original_text:
        raise ValidationError("correction does not change the response")
    for reprompt in (False, True):
        request = build_intent_request(
            current_prompt,
            student_message,
            correction.original_text,
            correction.corrected_text,
            provider,
            reprompt=reprompt,
        )
        reply = gateway.complete(request).text
        fields = parse_labeled_fields(reply, ("intent", "rule"))
        if fields is not None:
            return InferredIntent(summary=fields["intent"], behavioral_rule=fields["rule"])
    raise PipelineError("intent reply was unparseable after one reprompt")


# -- step 2: prompt rewrite -----------------------------------------------------

def build_rewrite_request(
    current_prompt: str,
    intent_summary: str,
    behavioral_rule: str,
    original_response: str,
    corrected_response: str,
    provider: Provider,
    retry: bool = False,
) -> ChatRequest:
    body = render(
        load_template("rewrite"),
        {
            "current_prompt": current_prompt,
            "intent_summary": intent_summary,
            "behavioral_rule": behavioral_rule,
            "original_response": original_response,
            "corrected_response": corrected_response,
        },
    )
    if retry:
        body = body + "\n\n" + REWRITE_RETRY_SUFFIX
    return ChatRequest(
        system_prompt="",
        messages=(ChatMessage(role="user", text=body),),
        temperature=PIPELINE_TEMPERATURE,
        provider=provider,
    )


def propose_rewrite(
    gateway: Gateway,
    current_prompt: str,
    intent: InferredIntent,
    correction: Correction,
    provider: Provider,
) -> ProposedPromptUpdate:
    """Targeted rewrite of the current prompt enforcing the inferred rule.

    The reply must keep the original first line (anchor against wholesale
    replacement) and must differ from the original; one retry with an
    explicit corrective instruction, then PipelineError.
    """
    anchor = current_prompt.split("\n", 1)[0]
    failure = ""
    for retry in (False, True):
        request = build_rewrite_request(
            current_prompt,
            intent.summary,
            intent.behavioral_rule,
            correction.original_text,
            correction.corrected_text,
            provider,
            retry=retry,
        )
        candidate = extract_prompt_reply(gateway.complete(request).text)
        if candidate == current_prompt:
            failure = "rewrite returned the prompt unchanged"
            continue
        if anchor not in candidate.split("\n"):
            failure = "rewrite dropped the prompt's first line (anchor check)"
            continue
        return ProposedPromptUpdate(
            new_full_text=candidate,
            diff=compute_diff(current_prompt, candidate),
            rationale=intent.summary,
        )
    raise PipelineError(failure + " after one retry")


# -- step 3: regression verification --------------------------------------------

def verify_regressions(
    gateway: Gateway,
    proposed_full_text: str,
    proposed_version_id: str,
    passed_cases: Sequence[TestCase],
    intent_history: Sequence[str],
    judge_mode: JudgeMode,
    provider: Provider,
) -> RegressionReport:
    """Replay every previously passed case against the proposed prompt and
    judge each replay against its approved snapshot.

    Per-case failures become `error` verdicts, never exceptions; the report
    covers exactly the input cases, assembled in case-id order.
    """
    for case in passed_cases:
        if case.status != CaseStatus.PASSED or case.approved_snapshot is None:
            raise ValidationError(f"case {case.id} is not a passed case with a snapshot")

    verdicts: list[CaseVerdict] = []
    for case in sorted(passed_cases, key=lambda c: c.id):
        snapshot = case.approved_snapshot
        assert snapshot is not None
        try:
            replies = replay_student_turns(
                gateway,
                proposed_full_text,
                student_texts_up_to(case, snapshot.turn_index),
                provider,
            )
            replayed = replies[-1] if replies else ""
            verdict = judge_equivalence(
                snapshot.text,
                replayed,
                intent_history,
                judge_mode,
                gateway=gateway,
                provider=provider,
            )
            verdicts.append(
                CaseVerdict(
                    test_case_id=case.id,
                    verdict=Verdict.PASS if verdict.equivalent else Verdict.REGRESSION,
                    rationale=verdict.rationale,
                    replayed_response=replayed,
                )
            )
        except (GatewayError, PipelineError, ValidationError) as exc:
            verdicts.append(
                CaseVerdict(
                    test_case_id=case.id,
                    verdict=Verdict.ERROR,
                    rationale=str(exc),
                    replayed_response="",
                )
            )
    return RegressionReport(evaluated_cases=tuple(verdicts), prompt_version=proposed_version_id)
