"""Versioned text assets: pipeline templates, bot prompt templates, and the
built-in student profiles.

Template wording is part of the scripted-fixture contract: fixture keys hash
over the rendered text, so editing a template invalidates existing fixtures.
"""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from ..domain import StudentProfile

_ASSET_DIR = Path(__file__).resolve().parent

# Built-in profile load order (and therefore display order).
_PROFILE_FILES = ("expected_path.json", "struggling_learner.json", "off_topic_input.json")

BOT_TEMPLATE_NAMES = ("socratic_tutor", "practice_quiz_coach")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Pipeline template by name: intent_analysis, rewrite, or judge."""
    return (_ASSET_DIR / "templates" / f"{name}.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_bot_template(name: str) -> str:
    path = _ASSET_DIR / "bot_templates" / f"{name}.txt"
    if not path.exists():
        raise KeyError(name)
    return path.read_text(encoding="utf-8")


def render(template: str, values: Mapping[str, str]) -> str:
    """Fill {{name}} placeholders by literal replacement; text containing
    braces passes through untouched."""
    out = template
    for key, value in values.items():
        out = out.replace("{{" + key + "}}", value)
    return out


@lru_cache(maxsize=None)
def builtin_profiles() -> tuple[StudentProfile, ...]:
    """The three shipped student profiles, in a fixed order."""
    profiles = []
    for filename in _PROFILE_FILES:
        raw = json.loads((_ASSET_DIR / "profiles" / filename).read_text(encoding="utf-8"))
        profiles.append(
            StudentProfile(
                id="profile-" + Path(filename).stem.replace("_", "-"),
                name=raw["name"],
                description=raw.get("description", ""),
                opening_message=raw["opening_message"],
                scripted_followups=tuple(raw.get("followups", ())),
                builtin=True,
            )
        )
    return tuple(profiles)
