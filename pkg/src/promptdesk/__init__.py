"""Correction-driven authoring service for AI tutoring chatbots.

A teacher refines a bot by editing unsatisfactory replies in a simulated
student chat; each edit drives a pipeline that infers the teaching intent,
proposes a tracked system-prompt rewrite, and replays every previously
approved test case before the change can ship. Publication stays blocked
until at least one cycle has been applied and the whole suite passes.
"""

from .domain import (
    Bot,
    BotStatus,
    CaseStatus,
    Correction,
    GateDecision,
    ModelChoice,
    PipelineRun,
    PromptVersion,
    Provenance,
    RegressionReport,
    RunStatus,
    StudentProfile,
    TestCase,
    Turn,
    Verdict,
    check_publication_gate,
    mint_share_token,
    new_bot,
)
from .gateway import ChatRequest, ChatResponse, FixtureStore, Gateway, Provider, fixture_key
from .runtime import DeterministicRuntime, Runtime
from .scenarios import JudgeMode, JudgeVerdict, builtin_profiles, judge_equivalence
from .service import AuthoringService, ServiceConfig
from .store import Store, open_store
from .textdiff import Hunk, TrackedDiff, apply_diff, compute_diff

__version__ = "0.1.0"

__all__ = [
    "AuthoringService",
    "Bot",
    "BotStatus",
    "CaseStatus",
    "ChatRequest",
    "ChatResponse",
    "Correction",
    "DeterministicRuntime",
    "FixtureStore",
    "GateDecision",
    "Gateway",
    "Hunk",
    "JudgeMode",
    "JudgeVerdict",
    "ModelChoice",
    "PipelineRun",
    "PromptVersion",
    "Provenance",
    "Provider",
    "RegressionReport",
    "RunStatus",
    "Runtime",
    "ServiceConfig",
    "Store",
    "StudentProfile",
    "TestCase",
    "TrackedDiff",
    "Turn",
    "Verdict",
    "apply_diff",
    "builtin_profiles",
    "check_publication_gate",
    "compute_diff",
    "fixture_key",
    "judge_equivalence",
    "mint_share_token",
    "new_bot",
    "open_store",
]
