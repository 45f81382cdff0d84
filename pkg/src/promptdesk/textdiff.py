"""Line-granularity tracked diffs: compute via LCS, apply exactly.

A TrackedDiff is a sequence of maximal hunks (keep / delete / insert) over
whole lines, plus two flags recording whether each side of the diff ended
with a newline, so apply() round-trips byte-exactly even for texts without
a trailing newline.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, model_validator

from .errors import DiffApplicationError

HunkKind = Literal["keep", "delete", "insert"]


class Hunk(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: HunkKind
    lines: tuple[str, ...]


class TrackedDiff(BaseModel):
    model_config = ConfigDict(frozen=True)

    hunks: tuple[Hunk, ...] = ()
    old_ends_with_newline: bool = False
    new_ends_with_newline: bool = False

    @model_validator(mode="after")
    def _maximal_hunks(self) -> "TrackedDiff":
        for a, b in zip(self.hunks, self.hunks[1:]):
            if a.kind == b.kind:
                raise ValueError(f"adjacent hunks share kind {a.kind!r}")
        return self

    def old_lines(self) -> list[str]:
        """keep+delete projection: the lines of the text this diff was built from."""
        out: list[str] = []
        for h in self.hunks:
            if h.kind in ("keep", "delete"):
                out.extend(h.lines)
        return out

    def new_lines(self) -> list[str]:
        """keep+insert projection: the lines of the text this diff produces."""
        out: list[str] = []
        for h in self.hunks:
            if h.kind in ("keep", "insert"):
                out.extend(h.lines)
        return out

    def cost(self) -> int:
        """Total changed-line count (deleted + inserted)."""
        return sum(len(h.lines) for h in self.hunks if h.kind != "keep")

    def is_empty_change(self) -> bool:
        return self.cost() == 0 and self.old_ends_with_newline == self.new_ends_with_newline


def split_lines(text: str) -> tuple[list[str], bool]:
    """Split on LF; report whether the text carried a trailing newline.

    join_lines(*split_lines(t)) == t for every text, including "".
    """
    if text == "":
        return [], False
    trailing = text.endswith("\n")
    body = text[:-1] if trailing else text
    return body.split("\n"), trailing


def join_lines(lines: list[str], trailing_newline: bool) -> str:
    if not lines and not trailing_newline:
        return ""
    return "\n".join(lines) + ("\n" if trailing_newline else "")


def _lcs_matches(old: list[str], new: list[str]) -> list[tuple[int, int]]:
    """Index pairs of one longest common subsequence of the two line lists."""
    n, m = len(old), len(new)
    if n == 0 or m == 0:
        return []
    # Intern lines to ints so the DP compares small integers, not strings.
    ids: dict[str, int] = {}
    a = [ids.setdefault(line, len(ids)) for line in old]
    b = [ids.setdefault(line, len(ids)) for line in new]

    # dp[i][j] = LCS length of a[i:], b[j:]
    width = m + 1
    dp = [0] * ((n + 1) * width)
    for i in range(n - 1, -1, -1):
        ai = a[i]
        row = i * width
        below = row + width
        for j in range(m - 1, -1, -1):
            if ai == b[j]:
                dp[row + j] = dp[below + j + 1] + 1
            else:
                down = dp[below + j]
                right = dp[row + j + 1]
                dp[row + j] = down if down >= right else right

    matches: list[tuple[int, int]] = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j]:
            matches.append((i, j))
            i += 1
            j += 1
        elif dp[(i + 1) * width + j] >= dp[i * width + j + 1]:
            i += 1
        else:
            j += 1
    return matches


def compute_diff(old_text: str, new_text: str) -> TrackedDiff:
    """LCS line diff of old_text -> new_text.

    The result is minimal in deleted+inserted line count among all diffs
    consistent with a common subsequence, and its hunks are maximal
    (adjacent hunks never share a kind).
    """
    old, old_nl = split_lines(old_text)
    new, new_nl = split_lines(new_text)
    matches = _lcs_matches(old, new)

    hunks: list[Hunk] = []

    def emit(kind: HunkKind, lines: list[str]) -> None:
        if lines:
            hunks.append(Hunk(kind=kind, lines=tuple(lines)))

    oi = ni = 0
    k = 0
    while k < len(matches):
        mi, mj = matches[k]
        emit("delete", old[oi:mi])
        emit("insert", new[ni:mj])
        # Group the run of consecutive matches into a single keep hunk.
        run = k
        while (
            run + 1 < len(matches)
            and matches[run + 1][0] == matches[run][0] + 1
            and matches[run + 1][1] == matches[run][1] + 1
        ):
            run += 1
        emit("keep", old[mi : matches[run][0] + 1])
        oi, ni = matches[run][0] + 1, matches[run][1] + 1
        k = run + 1
    emit("delete", old[oi:])
    emit("insert", new[ni:])

    return TrackedDiff(
        hunks=tuple(hunks),
        old_ends_with_newline=old_nl,
        new_ends_with_newline=new_nl,
    )


def apply_diff(old_text: str, diff: TrackedDiff) -> str:
    """Rebuild the new text from old_text and diff, byte-exact.

    Raises DiffApplicationError (with the first divergent line index) when
    the diff's keep+delete projection does not match old_text.
    """
    actual, actual_nl = split_lines(old_text)
    expected = diff.old_lines()
    for i, (exp, act) in enumerate(zip(expected, actual)):
        if exp != act:
            raise DiffApplicationError(i, f"expected {exp!r}, found {act!r}")
    if len(expected) != len(actual):
        raise DiffApplicationError(
            min(len(expected), len(actual)),
            f"diff covers {len(expected)} lines, text has {len(actual)}",
        )
    if actual_nl != diff.old_ends_with_newline:
        raise DiffApplicationError(
            len(actual), "trailing-newline marker does not match the text"
        )
    return join_lines(diff.new_lines(), diff.new_ends_with_newline)
