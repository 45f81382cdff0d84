// Authoring page behavior against a stubbed API client: inline edit
// validation, run banner lifecycle, pending-diff gating, and the publish
// dialog.

import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiError, type Client } from "../src/api";
import { initApp } from "../src/app";
import type { Bot, PipelineRun, StudentProfile, TestCase, TrackedDiff } from "../src/types";

const bot: Bot = {
  id: "bot-1",
  title: "Stats Tutor",
  description: "intro stats",
  model_choice: "openai",
  status: "draft",
  share_token: null,
  current_version: "ver-1",
  current_prompt: "You are a tutoring assistant. Context: intro stats",
};

const profile: StudentProfile = {
  id: "profile-expected-path",
  name: "expected path",
  description: "",
  opening_message: "Hi!",
  scripted_followups: ["and then?", "one more"],
  builtin: true,
};

function makeCase(): TestCase {
  return {
    id: "case-1",
    bot_id: "bot-1",
    profile_id: "profile-expected-path",
    transcript: [
      { role: "student", text: "Hi!", produced_by_version: null },
      { role: "bot", text: "The answer is 7.", produced_by_version: "ver-1" },
    ],
    status: "awaiting_review",
    updated_at: "2026-01-01T00:00:00Z",
  };
}

const diff: TrackedDiff = {
  hunks: [
    { kind: "keep", lines: ["You are a tutoring assistant. Context: intro stats"] },
    { kind: "insert", lines: ["Always ask a guiding question first."] },
  ],
  old_ends_with_newline: false,
  new_ends_with_newline: false,
};

function readyRun(): PipelineRun {
  return {
    id: "run-1",
    correction_id: "corr-1",
    inferred_intent: "Prefer questions over answers",
    behavioral_rule: "Ask first.",
    proposed_version: "ver-2",
    regression_report: { evaluated_cases: [], prompt_version: "ver-2" },
    status: "awaiting_teacher",
    error_detail: null,
    proposed: { version_id: "ver-2", full_text: "updated prompt", diff },
  };
}

interface Stub extends Client {
  submitCorrection: ReturnType<typeof vi.fn>;
}

function makeClient(overrides: Partial<Record<keyof Client, unknown>> = {}): Stub {
  return {
    baseUrl: "",
    listBots: vi.fn(async () => ({ bots: [bot] })),
    listProfiles: vi.fn(async () => ({ profiles: [profile] })),
    listTestCases: vi.fn(async () => ({ cases: [makeCase()] })),
    getBot: vi.fn(async () => bot),
    getTestCase: vi.fn(async () => makeCase()),
    startTestCase: vi.fn(),
    advanceTestCase: vi.fn(),
    submitCorrection: vi.fn(async () => ({ run_id: "run-1" })),
    getRun: vi.fn(async () => readyRun()),
    decideRun: vi.fn(async () => ({
      bot: { ...bot, current_version: "ver-2", current_prompt: "updated prompt" },
      run: { ...readyRun(), status: "applied" },
      cases: [makeCase()],
      warnings: [],
    })),
    markPass: vi.fn(async () => ({ ...makeCase(), status: "passed" })),
    publish: vi.fn(),
    shareCard: vi.fn(),
    shareMessage: vi.fn(),
    createBot: vi.fn(),
    ...overrides,
  } as unknown as Stub;
}

async function flush(times = 6): Promise<void> {
  for (let i = 0; i < times; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

function $(selector: string): HTMLElement {
  const node = document.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node;
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

describe("inline editing", () => {
  it("opens the editor on a bot bubble and rejects a no-change submit locally", async () => {
    const client = makeClient();
    initApp(root, client);
    await flush();

    $('[data-turn-index="1"]').click();
    await flush(1);
    const error = $('[data-testid="edit-error"]');
    expect(error.hidden).toBe(true);

    $('[data-testid="submit-correction"]').click();
    await flush(1);
    expect(error.hidden).toBe(false);
    expect(error.textContent).toContain("Edit the reply");
    expect(client.submitCorrection.mock.calls.length).toBe(0);
  });

  it("student bubbles are not editable", async () => {
    const client = makeClient();
    initApp(root, client);
    await flush();
    $('[data-turn-index="0"]').click();
    await flush(1);
    expect(document.querySelector('[data-testid="inline-editor"]')).toBeNull();
  });

  it("a changed submit posts the correction and shows the banner until ready", async () => {
    const client = makeClient();
    initApp(root, client);
    await flush();

    $('[data-turn-index="1"]').click();
    await flush(1);
    const textarea = document.querySelector<HTMLTextAreaElement>(".inline-editor-text")!;
    textarea.value = "What do you think the middle value is?";
    textarea.dispatchEvent(new Event("input"));
    $('[data-testid="submit-correction"]').click();
    await flush();

    expect(client.submitCorrection.mock.calls[0]).toEqual([
      "case-1",
      1,
      "What do you think the middle value is?",
    ]);
    const banner = $('[data-testid="run-banner"]');
    expect(banner.dataset.phase).toBe("ready");
    expect(document.querySelector('[data-testid="update-prompt"]')).not.toBeNull();
    // Pending diff is not shown until the teacher opens the review.
    expect(document.querySelector('[data-testid="diff-panel"]')).toBeNull();
  });

  it("an errored run surfaces error_detail with a retry affordance", async () => {
    const erroredRun: PipelineRun = {
      ...readyRun(),
      status: "errored",
      error_detail: "no fixture registered for key abc123",
      proposed_version: null,
      proposed: undefined,
    };
    const client = makeClient({ getRun: vi.fn(async () => erroredRun) });
    initApp(root, client);
    await flush();

    $('[data-turn-index="1"]').click();
    await flush(1);
    const textarea = document.querySelector<HTMLTextAreaElement>(".inline-editor-text")!;
    textarea.value = "different";
    textarea.dispatchEvent(new Event("input"));
    $('[data-testid="submit-correction"]').click();
    await flush();

    const banner = $('[data-testid="run-banner"]');
    expect(banner.dataset.phase).toBe("errored");
    expect(banner.textContent).toContain("no fixture registered for key abc123");
    expect(document.querySelector('[data-testid="retry-run"]')).not.toBeNull();
  });

  it("editing is blocked while a run is undecided", async () => {
    const client = makeClient();
    initApp(root, client);
    await flush();
    $('[data-turn-index="1"]').click();
    await flush(1);
    const textarea = document.querySelector<HTMLTextAreaElement>(".inline-editor-text")!;
    textarea.value = "changed";
    textarea.dispatchEvent(new Event("input"));
    $('[data-testid="submit-correction"]').click();
    await flush();

    $('[data-turn-index="1"]').click();
    await flush(1);
    expect(document.querySelector('[data-testid="inline-editor"]')).toBeNull();
  });
});

describe("review and decision", () => {
  async function reachReady(client: Stub): Promise<void> {
    initApp(root, client);
    await flush();
    $('[data-turn-index="1"]').click();
    await flush(1);
    const textarea = document.querySelector<HTMLTextAreaElement>(".inline-editor-text")!;
    textarea.value = "changed";
    textarea.dispatchEvent(new Event("input"));
    $('[data-testid="submit-correction"]').click();
    await flush();
  }

  it("update button reveals the diff; apply refreshes prompt and clears it", async () => {
    const client = makeClient();
    await reachReady(client);

    $('[data-testid="update-prompt"]').click();
    await flush(1);
    const panel = $('[data-testid="diff-panel"]');
    expect(panel.querySelectorAll(".diff-line-insert").length).toBe(1);

    $('[data-testid="apply-update"]').click();
    await flush();
    expect($('[data-testid="prompt-text"]').textContent).toBe("updated prompt");
    expect(document.querySelector('[data-testid="diff-panel"]')).toBeNull();
    expect(document.querySelector('[data-testid="run-banner"]')).toBeNull();
  });

  it("discard clears the pending diff without touching the prompt", async () => {
    const client = makeClient({
      decideRun: vi.fn(async () => ({
        bot,
        run: { ...readyRun(), status: "discarded" },
        cases: [makeCase()],
        warnings: [],
      })),
    });
    await reachReady(client);
    $('[data-testid="update-prompt"]').click();
    await flush(1);
    $('[data-testid="discard-update"]').click();
    await flush();
    expect($('[data-testid="prompt-text"]').textContent).toBe(bot.current_prompt);
    expect(document.querySelector('[data-testid="diff-panel"]')).toBeNull();
  });
});

describe("publish dialog", () => {
  it("renders gate reasons verbatim and focuses offending cases", async () => {
    const client = makeClient({
      publish: vi.fn(async () => {
        throw new ApiError(
          {
            code: "gate_blocked",
            message: "publication blocked",
            details: {
              reasons: ["1 test case(s) not passed: case-1 (awaiting_review)"],
              unpassed_case_ids: ["case-1"],
            },
          },
          409,
        );
      }),
    });
    initApp(root, client);
    await flush();

    $('[data-testid="publish"]').click();
    await flush();
    const dialog = $('[data-testid="publish-dialog"]');
    expect(dialog.dataset.outcome).toBe("blocked");
    expect($('[data-testid="blocked-reasons"]').textContent).toContain(
      "1 test case(s) not passed: case-1 (awaiting_review)",
    );

    dialog.querySelector<HTMLElement>('[data-case-id="case-1"]')!.click();
    await flush(1);
    expect(document.querySelector('[data-testid="publish-dialog"]')).toBeNull();
    const activeTab = $(".case-tab-active");
    expect(activeTab.dataset.caseId).toBe("case-1");
  });

  it("shows the share link and copies it", async () => {
    const writeText = vi.fn(async () => undefined);
    Object.defineProperty(navigator, "clipboard", {
      value: { writeText },
      configurable: true,
    });
    const client = makeClient({
      publish: vi.fn(async () => ({
        share_url: "/share/tok123",
        bot: { ...bot, status: "published", share_token: "tok123" },
      })),
    });
    initApp(root, client);
    await flush();

    $('[data-testid="publish"]').click();
    await flush();
    const link = $('[data-testid="share-link"]');
    expect(link.textContent).toBe("/share/tok123");
    expect(link.getAttribute("href")).toBe("#/share/tok123");

    $('[data-testid="copy-share"]').click();
    await flush(1);
    expect(writeText).toHaveBeenCalledWith("/share/tok123");
  });
});
