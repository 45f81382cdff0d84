// End-to-end workflow against a real scripted-provider backend: the test
// spawns `promptdesk serve` on seeded demo data and drives the actual DOM
// app through the whole teacher journey, then the student share page.
//
// Steps covered: edit a bot bubble -> update button appears -> tracked diff
// rendered with distinct insert/delete styling -> apply -> chat refreshes ->
// mark pass -> blocked publish dialog (one case unpassed) -> pass the rest
// -> share link rendered and navigable -> student chat answers.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Client } from "../src/api";
import { extractDiff } from "../src/diff";
import { initApp, type AppHandle } from "../src/app";
import { route } from "../src/main";

const PYTHON = process.env.PROMPTDESK_PYTHON ?? "python3";

let server: ChildProcess;
let base: string;
let demo: { botId: string; corrected: string; shareMessage: string; policyLine: string };

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      probe.close(() =>
        typeof address === "object" && address
          ? resolve(address.port)
          : reject(new Error("no port")),
      );
    });
  });
}

async function waitFor<T>(
  probe: () => T | null | undefined | false,
  what: string,
  timeoutMs = 30_000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const result = probe();
    if (result) return result;
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

function $(selector: string): HTMLElement {
  const node = document.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node;
}

beforeAll(async () => {
  const dataDir = join(mkdtempSync(join(tmpdir(), "promptdesk-e2e-")), "data");
  const env = { ...process.env, PD_DATA_DIR: dataDir };

  const constants = spawnSync(
    PYTHON,
    [
      "-c",
      "import json; from promptdesk import seed; print(json.dumps({" +
        "'botId': seed.DEMO_BOT_ID, 'corrected': seed.CORRECTED_REPLY," +
        "'shareMessage': seed.SHARE_MESSAGE, 'policyLine': seed.POLICY_LINE}))",
    ],
    { encoding: "utf-8" },
  );
  if (constants.status !== 0) {
    throw new Error(`cannot read seed constants: ${constants.stderr}`);
  }
  demo = JSON.parse(constants.stdout);

  const seeded = spawnSync(PYTHON, ["-m", "promptdesk.cli", "seed"], {
    env,
    encoding: "utf-8",
  });
  if (seeded.status !== 0) {
    throw new Error(`seed failed: ${seeded.stderr}`);
  }

  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  server = spawn(PYTHON, ["-m", "promptdesk.cli", "serve", "--bind", `127.0.0.1:${port}`], {
    env,
    stdio: "ignore",
  });
  await waitFor(() => server.exitCode === null, "server process alive", 1000);
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await fetch(`${base}/healthz`);
      if (response.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("backend never became healthy");
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
});

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("teacher workflow end to end", () => {
  let app: AppHandle;
  let root: HTMLElement;
  let client: Client;

  it("drives correction -> diff -> apply -> gate -> publish -> student chat", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
    client = new Client(base);
    app = initApp(root, client, demo.botId);

    // Seeded bot loads with its three passed demo cases.
    await waitFor(
      () => document.querySelectorAll(".case-tab").length === 3,
      "seeded case tabs",
    );
    expect($(".bot-title").textContent).toBe("Stats Tutor");

    // Start two fresh cases: one to correct, one to trip the gate later.
    const picker = document.querySelector<HTMLSelectElement>(
      '[data-testid="profile-picker"]',
    )!;
    picker.value = "profile-expected-path";
    $('[data-testid="start-case"]').click();
    await waitFor(
      () => document.querySelectorAll(".case-tab").length === 4,
      "first new case",
    );
    const correctedCaseId = app.state.activeCaseId!;

    picker.value = "profile-struggling-learner";
    $('[data-testid="start-case"]').click();
    await waitFor(
      () => document.querySelectorAll(".case-tab").length === 5,
      "second new case",
    );
    const gateTripCaseId = app.state.activeCaseId!;
    expect(gateTripCaseId).not.toBe(correctedCaseId);

    // Back to the first new case; its transcript shows the scripted reply.
    document
      .querySelector<HTMLElement>(`.case-tab[data-case-id="${correctedCaseId}"]`)!
      .click();
    const bubble = await waitFor(
      () => document.querySelector<HTMLElement>('.bubble-bot[data-turn-index="1"]'),
      "bot bubble",
    );
    const originalReply = bubble.textContent ?? "";

    // Step 1: edit the unsatisfactory reply.
    bubble.click();
    const textarea = await waitFor(
      () => document.querySelector<HTMLTextAreaElement>(".inline-editor-text"),
      "inline editor",
    );
    textarea.value = demo.corrected;
    textarea.dispatchEvent(new Event("input"));
    $('[data-testid="submit-correction"]').click();

    // Step 2: the update button appears when the pipeline is ready.
    const updateButton = await waitFor(
      () => document.querySelector<HTMLElement>('[data-testid="update-prompt"]'),
      "update-prompt button",
    );

    // Step 3: tracked diff with visually distinct deletions/insertions.
    updateButton.click();
    const diffView = await waitFor(
      () => document.querySelector<HTMLElement>(".diff-view"),
      "diff view",
    );
    const inserts = diffView.querySelectorAll(".diff-line-insert");
    expect(inserts.length).toBe(1);
    expect(inserts[0]!.textContent).toBe(demo.policyLine);
    const extracted = extractDiff(diffView);
    expect(extracted.hunks.map((h) => h.kind)).toEqual(["keep", "insert"]);

    // Step 4: apply the update.
    $('[data-testid="apply-update"]').click();
    await waitFor(
      () => $('[data-testid="prompt-text"]').textContent?.includes(demo.policyLine),
      "prompt text updated",
    );

    // Step 5: the test-case chat refreshed under the new prompt.
    const refreshedBubble = await waitFor(
      () => document.querySelector<HTMLElement>('.bubble-bot[data-turn-index="1"]'),
      "refreshed bubble",
    );
    expect(refreshedBubble.textContent).not.toBe(originalReply);

    // Step 6: mark the corrected case as passing.
    await waitFor(
      () => !$('[data-testid="mark-pass"]').hasAttribute("disabled"),
      "mark-pass enabled",
    );
    $('[data-testid="mark-pass"]').click();
    await waitFor(
      () =>
        document
          .querySelector(`.case-tab[data-case-id="${correctedCaseId}"] .case-badge`)!
          .textContent?.includes("passed"),
      "corrected case badge passed",
    );

    // Step 7: publication is blocked while the second case is unpassed.
    $('[data-testid="publish"]').click();
    const dialog = await waitFor(
      () => document.querySelector<HTMLElement>('[data-testid="publish-dialog"]'),
      "blocked publish dialog",
    );
    expect(dialog.dataset.outcome).toBe("blocked");
    expect($('[data-testid="blocked-reasons"]').textContent).toContain(gateTripCaseId);

    // Focus the offending case from the dialog, then pass it.
    dialog.querySelector<HTMLElement>(`[data-case-id="${gateTripCaseId}"]`)!.click();
    await waitFor(
      () =>
        document.querySelector(".case-tab-active")?.getAttribute("data-case-id") ===
        gateTripCaseId,
      "offending case focused",
    );
    await waitFor(
      () => !$('[data-testid="mark-pass"]').hasAttribute("disabled"),
      "mark-pass enabled for gate case",
    );
    $('[data-testid="mark-pass"]').click();
    await waitFor(
      () =>
        document
          .querySelector(`.case-tab[data-case-id="${gateTripCaseId}"] .case-badge`)!
          .textContent?.includes("passed"),
      "gate case badge passed",
    );

    // Step 8: publish succeeds; the share link is rendered and navigable.
    $('[data-testid="publish"]').click();
    const shareLink = await waitFor(
      () => document.querySelector<HTMLElement>('[data-testid="share-link"]'),
      "share link",
    );
    const shareHref = shareLink.getAttribute("href")!;
    expect(shareHref).toMatch(/^#\/share\/.+/);

    // Navigate to the student chat page and hold a conversation.
    route(root, client, shareHref);
    await waitFor(
      () => $(".share-title").textContent === "Stats Tutor",
      "share card title",
    );
    const input = document.querySelector<HTMLInputElement>('[data-testid="share-input"]')!;
    input.value = demo.shareMessage;
    $('[data-testid="share-send"]').click();
    const reply = await waitFor(
      () => document.querySelector<HTMLElement>(".share-bubble-bot"),
      "student chat reply",
    );
    expect(reply.textContent).toContain("Let's start simple");
  });
});
