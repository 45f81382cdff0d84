"""Student profiles, simulated test-case conversations, and the response
equivalence judge used by regression verification.

Pure conversation/judging logic: persistence and pipeline triggering live
in the service layer.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import Optional, Sequence

from pydantic import BaseModel, ConfigDict

from .assets import builtin_profiles, load_template, render
from .domain import Role, TestCase, Turn
from .errors import PipelineError, ValidationError
from .gateway import (
    INTERACTIVE_TEMPERATURE,
    PIPELINE_TEMPERATURE,
    ChatMessage,
    ChatRequest,
    Gateway,
    Provider,
)

__all__ = [
    "JudgeMode",
    "JudgeVerdict",
    "builtin_profiles",
    "chat_request_for_transcript",
    "judge_equivalence",
    "build_judge_request",
    "next_followup_index",
    "replay_student_turns",
]

EXACT_MATCH_RATIONALE = "byte-identical after normalization"
EXACT_DIFFER_RATIONALE = "texts differ"

JUDGE_REPROMPT_SUFFIX = (
    "Your previous answer could not be parsed. Answer again, starting with the "
    "single word YES or NO, followed by a one-sentence rationale."
)


class JudgeMode(str, Enum):
    EXACT = "exact"
    LLM = "llm"


class JudgeVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    equivalent: bool
    rationale: str
    mode: JudgeMode


# -- conversation driving ----------------------------------------------------

def chat_request_for_transcript(
    system_prompt: str,
    prior_turns: Sequence[Turn],
    student_message: str,
    provider: Provider,
    temperature: float = INTERACTIVE_TEMPERATURE,
) -> ChatRequest:
    """The completion request for the bot's next reply after student_message."""
    messages = [
        ChatMessage(role="user" if t.role == Role.STUDENT else "assistant", text=t.text)
        for t in prior_turns
    ]
    messages.append(ChatMessage(role="user", text=student_message))
    return ChatRequest(
        system_prompt=system_prompt,
        messages=tuple(messages),
        temperature=temperature,
        provider=provider,
    )


def next_followup_index(case: TestCase) -> int:
    """How many scripted follow-ups this case has already consumed."""
    student_turns = sum(1 for t in case.transcript if t.role == Role.STUDENT)
    return max(0, student_turns - 1)


def replay_student_turns(
    gateway: Gateway,
    system_prompt: str,
    student_texts: Sequence[str],
    provider: Provider,
) -> list[str]:
    """Regenerate the bot side of a conversation at temperature 0.

    Replays sequentially, so each regenerated reply conditions the next one;
    returns one bot reply per student turn. Gateway errors propagate.
    """
    replies: list[str] = []
    turns: list[Turn] = []
    for text in student_texts:
        request = chat_request_for_transcript(
            system_prompt, turns, text, provider, temperature=PIPELINE_TEMPERATURE
        )
        reply = gateway.complete(request).text
        replies.append(reply)
        turns.append(Turn(role=Role.STUDENT, text=text))
        turns.append(Turn(role=Role.BOT, text=reply))
    return replies


def student_texts_up_to(case: TestCase, bot_turn_index: int) -> list[str]:
    """Student turns addressed to the bot turn at bot_turn_index, in order."""
    if bot_turn_index >= len(case.transcript) or bot_turn_index % 2 == 0:
        raise ValidationError(
            f"turn {bot_turn_index} is not a bot turn of test case {case.id}"
        )
    return [
        t.text for t in case.transcript[:bot_turn_index] if t.role == Role.STUDENT
    ]


# -- equivalence judging -----------------------------------------------------

def normalize_exact(text: str) -> str:
    """CRLF -> LF, then trailing whitespace trimmed per line."""
    lines = text.replace("\r\n", "\n").split("\n")
    return "\n".join(line.rstrip() for line in lines)


def render_rules(behavioral_rules: Sequence[str]) -> str:
    if not behavioral_rules:
        return "(none)"
    return "\n".join(f"- {rule}" for rule in behavioral_rules)


def build_judge_request(
    approved_text: str,
    replayed_text: str,
    behavioral_rules: Sequence[str],
    provider: Provider,
    reprompt: bool = False,
) -> ChatRequest:
    body = render(
        load_template("judge"),
        {
            "approved_response": approved_text,
            "replayed_response": replayed_text,
            "behavioral_rules": render_rules(behavioral_rules),
        },
    )
    if reprompt:
        body = body + "\n\n" + JUDGE_REPROMPT_SUFFIX
    return ChatRequest(
        system_prompt="",
        messages=(ChatMessage(role="user", text=body),),
        temperature=PIPELINE_TEMPERATURE,
        provider=provider,
    )


_YES_NO = re.compile(r"^\s*(yes|no)\b[\s:,.;!\-–—]*(.*)$", re.IGNORECASE | re.DOTALL)


def parse_judge_reply(text: str) -> Optional[tuple[bool, str]]:
    stripped = text.strip()
    fence = re.search(r"```[^\n]*\n(.*?)```", stripped, re.DOTALL)
    if fence:
        stripped = fence.group(1).strip()
    match = _YES_NO.match(stripped)
    if not match:
        return None
    rationale = match.group(2).strip() or stripped
    return match.group(1).lower() == "yes", rationale


def judge_equivalence(
    approved_text: str,
    replayed_text: str,
    intent_history: Sequence[str],
    mode: JudgeMode,
    gateway: Gateway | None = None,
    provider: Provider = Provider.SCRIPTED,
) -> JudgeVerdict:
    """Decide whether a replayed response preserves the approved behavior.

    exact mode compares normalized bytes; llm mode asks the judge template
    for YES/NO + rationale, reprompting once on an unparseable reply before
    raising PipelineError.
    """
    if mode == JudgeMode.EXACT:
        same = normalize_exact(approved_text) == normalize_exact(replayed_text)
        return JudgeVerdict(
            equivalent=same,
            rationale=EXACT_MATCH_RATIONALE if same else EXACT_DIFFER_RATIONALE,
            mode=mode,
        )
    if gateway is None:
        raise ValidationError("llm judge mode requires a gateway")
    for reprompt in (False, True):
        request = build_judge_request(
            approved_text, replayed_text, intent_history, provider, reprompt=reprompt
        )
        reply = gateway.complete(request).text
        parsed = parse_judge_reply(reply)
        if parsed is not None:
            equivalent, rationale = parsed
            return JudgeVerdict(equivalent=equivalent, rationale=rationale, mode=mode)
    raise PipelineError("judge reply was unparseable after one reprompt")
