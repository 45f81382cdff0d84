// Tracked-diff rendering. Deleted lines are struck through in red,
// inserted lines are green; the DOM keeps enough structure that the diff
// model can be extracted back out unchanged (round-trip invariant: the UI
// displays the server's diff, it never recomputes one).

import type { Hunk, HunkKind, TrackedDiff } from "./types";

export function renderDiff(diff: TrackedDiff): HTMLElement {
  const container = document.createElement("div");
  container.className = "diff-view";
  container.dataset.oldNl = String(diff.old_ends_with_newline);
  container.dataset.newNl = String(diff.new_ends_with_newline);
  for (const hunk of diff.hunks) {
    const group = document.createElement("div");
    group.className = `diff-hunk diff-hunk-${hunk.kind}`;
    group.dataset.kind = hunk.kind;
    for (const line of hunk.lines) {
      const row = document.createElement("div");
      row.className = `diff-line diff-line-${hunk.kind}`;
      const marker = hunk.kind === "delete" ? "-" : hunk.kind === "insert" ? "+" : " ";
      row.dataset.marker = marker;
      row.textContent = line;
      group.appendChild(row);
    }
    container.appendChild(group);
  }
  return container;
}

export function extractDiff(container: HTMLElement): TrackedDiff {
  const hunks: Hunk[] = [];
  for (const group of Array.from(container.querySelectorAll<HTMLElement>(".diff-hunk"))) {
    const kind = group.dataset.kind as HunkKind;
    const lines = Array.from(group.querySelectorAll<HTMLElement>(".diff-line")).map(
      (row) => row.textContent ?? "",
    );
    hunks.push({ kind, lines });
  }
  return {
    hunks,
    old_ends_with_newline: container.dataset.oldNl === "true",
    new_ends_with_newline: container.dataset.newNl === "true",
  };
}

export function changedLineCount(diff: TrackedDiff): number {
  return diff.hunks
    .filter((h) => h.kind !== "keep")
    .reduce((total, h) => total + h.lines.length, 0);
}
