"""Deterministic demo content: one demo bot, one passed test case per
built-in profile, and a fixture file covering the whole scripted happy path
(initial chats, the demo correction's pipeline, post-update replays,
judging, follow-ups, and the published share chat).

Fixture keys are computed with the same request builders the pipeline uses,
so the file stays consistent with the shipped templates by construction.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .assets import builtin_profiles
from .domain import (
    ApprovedSnapshot,
    Bot,
    BotStatus,
    CaseStatus,
    ModelChoice,
    PromptVersion,
    Provenance,
    Role,
    TestCase,
    Turn,
    root_prompt_text,
)
from .gateway import (
    INTERACTIVE_TEMPERATURE,
    PIPELINE_TEMPERATURE,
    ChatRequest,
    Provider,
    fixture_key,
    write_fixture_file,
)
from .pipeline import build_intent_request, build_rewrite_request
from .scenarios import build_judge_request, chat_request_for_transcript
from .service import AuthoringService
from .store import RecordKind

DEMO_BOT_ID = "bot-demo"
DEMO_ROOT_VERSION_ID = "ver-demo-root"
DEMO_TITLE = "Stats Tutor"
DEMO_DESCRIPTION = "a Socratic tutor for introductory statistics"
DEMO_MODEL = ModelChoice.OPENAI

FIXTURES_FILENAME = "fixtures.jsonl"

# The demo correction: the teacher rewrites the expected-path reply into a
# guiding question instead of a worked answer.
CORRECTED_REPLY = (
    "Let's figure it out together. If you lined your numbers up from smallest "
    "to largest, which one do you think would sit exactly in the middle? Try "
    "that with 3, 4, 7, 9, 12 and tell me what you find."
)

INTENT_SUMMARY = (
    "The teacher wants the tutor to coach with guiding questions rather than "
    "hand over the procedure."
)
BEHAVIORAL_RULE = (
    "Ask one guiding question and wait for the student's attempt before "
    "revealing any part of the solution."
)
INTENT_REPLY = f"```\nintent: {INTENT_SUMMARY}\nrule: {BEHAVIORAL_RULE}\n```"

POLICY_LINE = (
    "Always ask one guiding question and wait for the student's attempt "
    "before revealing any part of the solution."
)

JUDGE_YES_REPLY = "YES: the replayed reply keeps the approved teaching behavior."

SHARE_MESSAGE = "Hi! Can you help me practice finding the median?"
SHARE_REPLY = (
    "Absolutely! Let's start simple: here are five numbers, 8, 3, 5, 9, 2. "
    "What would you do first before picking the middle one?"
)

REPLIES_ROOT = {
    "profile-expected-path": (
        "To find the median, first sort the numbers from smallest to largest "
        "and take the middle value. For 3, 4, 7, 9, 12 the median is 7."
    ),
    "profile-struggling-learner": (
        "No worries, they are different ideas. The average adds every value "
        "and divides by the count, while the median is the middle value once "
        "the numbers are sorted. Sort your list and look at the center."
    ),
    "profile-off-topic-input": (
        "I can't help with video games or essays, but I'd love to get you "
        "ready for your statistics work. Shall we look at finding the median "
        "together?"
    ),
}

REPLIES_UPDATED = {
    "profile-expected-path": (
        "Good question! Before I explain anything, try this: if you lined "
        "your numbers up from smallest to largest, which one would sit "
        "exactly in the middle? Sort 3, 4, 7, 9, 12 and tell me what you find."
    ),
    "profile-struggling-learner": (
        "Let's untangle them one step at a time. Suppose your quiz scores "
        "were 2, 6, and 10. If you lined them up in order, which score sits "
        "in the middle? Start there and tell me what you picked."
    ),
    "profile-off-topic-input": (
        "Nice try! I'm here for statistics, not video games or essays. "
        "Here's a warm-up instead: if you sorted the numbers 5, 1, 9, what "
        "would sit in the middle? Give it a shot."
    ),
}

FOLLOWUP_REPLIES_ROOT = {
    "profile-expected-path": (
        "Exactly: sort them first. Sorted, the list reads 3, 4, 7, 9, 12, so "
        "the middle value is 7. That is the median.",
        "With an even count there are two middle values; take their average. "
        "For 3, 4, 7, 9 the median is (4 + 7) / 2 = 5.5.",
    ),
    "profile-struggling-learner": (
        "The middle one of 2, 6, 10 is 6, so 6 is the median. The average "
        "would be (2 + 6 + 10) / 3 = 6 here, but the two usually differ.",
        "Yes, that's the whole trick: order the numbers and pick the center "
        "value. If two share the middle, average those two.",
    ),
    "profile-off-topic-input": (
        "Ha! I'll stay out of animal fights too. Let's trade: answer one "
        "median question and then we take a two-minute breather. Deal?",
        "Great, welcome back. Sort 5, 1, 9 and tell me which value lands in "
        "the middle.",
    ),
}

FOLLOWUP_REPLIES_UPDATED = {
    "profile-expected-path": (
        "You're on the right track. After sorting 3, 4, 7, 9, 12, which "
        "position is exactly halfway through the list?",
        "Before I answer, picture 3, 4, 7, 9: there is no single middle. "
        "What could you do with the two middle numbers to be fair?",
    ),
    "profile-struggling-learner": (
        "You're closer than you think. Line up 2, 6, 10 from small to large; "
        "which one has the same amount of numbers on each side?",
        "Exactly the right instinct. Try it on 4, 8, 1, 6, 3: what do you "
        "get once they're in order?",
    ),
    "profile-off-topic-input": (
        "I'll dodge that one. Back to numbers: if you sorted 5, 1, 9, which "
        "value would have one neighbor on each side?",
        "Glad to! Sort 5, 1, 9 for me and say which value sits in the "
        "middle. What do you get?",
    ),
}


def demo_root_prompt() -> str:
    return root_prompt_text(DEMO_DESCRIPTION)


def demo_updated_prompt() -> str:
    return demo_root_prompt() + "\n" + POLICY_LINE


def demo_case_id(profile_id: str) -> str:
    return "case-demo-" + profile_id.removeprefix("profile-")


def _chat(prompt: str, prior: Iterable[Turn], message: str, temperature: float) -> ChatRequest:
    return chat_request_for_transcript(
        prompt, tuple(prior), message, Provider.SCRIPTED, temperature=temperature
    )


def build_demo_fixtures() -> dict[str, str]:
    """Every scripted exchange the demo workflow can hit, keyed for playback."""
    p0, p1 = demo_root_prompt(), demo_updated_prompt()
    fixtures: dict[str, str] = {}

    def put(request: ChatRequest, response: str) -> None:
        fixtures[fixture_key(request)] = response

    for profile in builtin_profiles():
        opening = profile.opening_message
        r0 = REPLIES_ROOT[profile.id]
        r1 = REPLIES_UPDATED[profile.id]

        # Opening exchange: interactive chat and temperature-0 replay.
        for prompt, reply in ((p0, r0), (p1, r1)):
            put(_chat(prompt, (), opening, INTERACTIVE_TEMPERATURE), reply)
            put(_chat(prompt, (), opening, PIPELINE_TEMPERATURE), reply)

        # Scripted follow-ups, so multi-turn demo sessions stay scripted.
        f1, f2 = profile.scripted_followups
        for prompt, reply, (fu1, fu2) in (
            (p0, r0, FOLLOWUP_REPLIES_ROOT[profile.id]),
            (p1, r1, FOLLOWUP_REPLIES_UPDATED[profile.id]),
        ):
            turns = [Turn(role=Role.STUDENT, text=opening), Turn(role=Role.BOT, text=reply)]
            put(_chat(prompt, turns, f1, INTERACTIVE_TEMPERATURE), fu1)
            turns += [Turn(role=Role.STUDENT, text=f1), Turn(role=Role.BOT, text=fu1)]
            put(_chat(prompt, turns, f2, INTERACTIVE_TEMPERATURE), fu2)

        # Equivalence judging across every snapshot/replay pairing the
        # workflow produces, before and after the demo rule is applied.
        for rules in ((), (BEHAVIORAL_RULE,)):
            for approved, replayed in ((r0, r0), (r0, r1), (r1, r1)):
                put(
                    build_judge_request(approved, replayed, rules, Provider.SCRIPTED),
                    JUDGE_YES_REPLY,
                )

    expected = builtin_profiles()[0]
    opening = expected.opening_message
    original = REPLIES_ROOT[expected.id]
    put(
        build_intent_request(p0, opening, original, CORRECTED_REPLY, Provider.SCRIPTED),
        INTENT_REPLY,
    )
    put(
        build_rewrite_request(
            p0, INTENT_SUMMARY, BEHAVIORAL_RULE, original, CORRECTED_REPLY, Provider.SCRIPTED
        ),
        p1,
    )
    put(_chat(p1, (), SHARE_MESSAGE, INTERACTIVE_TEMPERATURE), SHARE_REPLY)
    return fixtures


def seed_demo(service: AuthoringService, fixtures_path: str | Path) -> dict:
    """Write the fixture file, load it, and create the demo bot with one
    passed test case per built-in profile. Idempotent: an existing demo bot
    is left untouched (fixtures are still rewritten)."""
    fixtures = build_demo_fixtures()
    fixtures_path = Path(fixtures_path)
    fixtures_path.parent.mkdir(parents=True, exist_ok=True)
    write_fixture_file(fixtures_path, fixtures)
    service.gateway.fixtures.load_file(fixtures_path)

    summary = {
        "bot_id": DEMO_BOT_ID,
        "case_ids": [demo_case_id(p.id) for p in builtin_profiles()],
        "fixture_count": len(fixtures),
        "fixtures_path": str(fixtures_path),
        "created": False,
    }
    if service.store.get(RecordKind.BOT, DEMO_BOT_ID) is not None:
        return summary

    now = service.runtime.clock()
    root = PromptVersion(
        id=DEMO_ROOT_VERSION_ID,
        bot_id=DEMO_BOT_ID,
        parent_id=None,
        full_text=demo_root_prompt(),
        provenance=Provenance.INITIAL,
        created_at=now,
    )
    bot = Bot(
        id=DEMO_BOT_ID,
        title=DEMO_TITLE,
        description=DEMO_DESCRIPTION,
        model_choice=DEMO_MODEL,
        current_version=root.id,
        status=BotStatus.DRAFT,
        created_at=now,
    )

    def mutate() -> None:
        service.store.put(
            RecordKind.VERSION, root.id, root.model_dump(mode="json"), bot_id=bot.id
        )
        service.store.put(RecordKind.BOT, bot.id, bot.model_dump(mode="json"), bot_id=bot.id)
        for profile in builtin_profiles():
            reply = REPLIES_ROOT[profile.id]
            case = TestCase(
                id=demo_case_id(profile.id),
                bot_id=bot.id,
                profile_id=profile.id,
                transcript=(
                    Turn(role=Role.STUDENT, text=profile.opening_message),
                    Turn(role=Role.BOT, text=reply, produced_by_version=root.id),
                ),
                status=CaseStatus.PASSED,
                approved_snapshot=ApprovedSnapshot(
                    turn_index=1, text=reply, prompt_version=root.id
                ),
                updated_at=service.runtime.clock(),
            )
            service.store.put(
                RecordKind.TEST_CASE, case.id, case.model_dump(mode="json"), bot_id=bot.id
            )

    service.store.with_bot_lock(bot.id, mutate)
    summary["created"] = True
    return summary
