// Authoring page: prompt editor with tracked-diff review on the left, the
// editable test-case chat on the right, a pipeline banner during runs, and
// the publish dialog. All state shown here comes from the API; the UI
// renders verdicts, reasons, and diffs without recomputing them.

import { ApiError, Client } from "./api";
import { renderDiff } from "./diff";
import { PollCancelled, phaseFor, pollRun, type PollHandle } from "./poll";
import type {
  Bot,
  PipelineRun,
  RunPhase,
  StudentProfile,
  TestCase,
} from "./types";

interface RunBannerState {
  runId: string;
  phase: RunPhase;
  run: PipelineRun | null;
  errorDetail: string | null;
  retry: { caseId: string; turnIndex: number; text: string } | null;
}

type PublishDialogState =
  | { kind: "blocked"; reasons: string[]; unpassedCaseIds: string[] }
  | { kind: "published"; shareUrl: string };

interface ViewState {
  bot: Bot | null;
  profiles: StudentProfile[];
  cases: TestCase[];
  activeCaseId: string | null;
  editingTurn: number | null;
  draftText: string;
  runBanner: RunBannerState | null;
  pendingRun: PipelineRun | null; // ready and undecided: diff may be shown
  diffOpen: boolean;
  publishDialog: PublishDialogState | null;
  notice: string | null;
}

export interface AppHandle {
  refresh(): Promise<void>;
  state: ViewState;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function copyText(text: string): Promise<void> {
  const clipboard = navigator.clipboard;
  if (clipboard?.writeText) {
    await clipboard.writeText(text);
  }
}

export function initApp(root: HTMLElement, client: Client, botId?: string): AppHandle {
  const state: ViewState = {
    bot: null,
    profiles: [],
    cases: [],
    activeCaseId: null,
    editingTurn: null,
    draftText: "",
    runBanner: null,
    pendingRun: null,
    diffOpen: false,
    publishDialog: null,
    notice: null,
  };
  let poller: PollHandle | null = null;

  root.innerHTML = "";
  const header = el("header", "app-header");
  const title = el("h1", "bot-title");
  const statusBadge = el("span", "bot-status");
  const publishButton = el("button", "publish-button", "Publish");
  publishButton.dataset.testid = "publish";
  header.append(title, statusBadge, publishButton);

  const columns = el("div", "columns");
  const promptPane = el("section", "prompt-pane");
  const chatPane = el("section", "chat-pane");
  columns.append(promptPane, chatPane);

  const dialogHost = el("div", "dialog-host");
  const noticeHost = el("div", "notice-host");
  root.append(header, noticeHost, columns, dialogHost);

  // ---- actions -------------------------------------------------------------

  async function refresh(): Promise<void> {
    const [bots, profiles] = await Promise.all([client.listBots(), client.listProfiles()]);
    state.profiles = profiles.profiles;
    state.bot =
      (botId ? bots.bots.find((b) => b.id === botId) : undefined) ?? bots.bots[0] ?? null;
    if (state.bot) {
      state.cases = await listCases(state.bot.id);
      if (!state.activeCaseId && state.cases.length > 0) {
        state.activeCaseId = state.cases[0]!.id;
      }
    }
    render();
  }

  async function listCases(id: string): Promise<TestCase[]> {
    const { cases } = await client.listTestCases(id);
    return cases;
  }

  function activeCase(): TestCase | null {
    return state.cases.find((c) => c.id === state.activeCaseId) ?? null;
  }

  function undecidedRun(): boolean {
    return state.runBanner !== null && state.runBanner.phase !== "errored";
  }

  async function startCase(profileId: string): Promise<void> {
    if (!state.bot) return;
    const testCase = await client.startTestCase(state.bot.id, profileId);
    state.cases.push(testCase);
    state.activeCaseId = testCase.id;
    render();
  }

  async function submitEdit(caseId: string, turnIndex: number, text: string): Promise<void> {
    state.editingTurn = null;
    state.runBanner = {
      runId: "",
      phase: "analyzing",
      run: null,
      errorDetail: null,
      retry: { caseId, turnIndex, text },
    };
    render();
    let runId: string;
    try {
      ({ run_id: runId } = await client.submitCorrection(caseId, turnIndex, text));
    } catch (err) {
      state.runBanner = {
        runId: "",
        phase: "errored",
        run: null,
        errorDetail: err instanceof ApiError ? err.message : String(err),
        retry: { caseId, turnIndex, text },
      };
      render();
      return;
    }
    state.runBanner.runId = runId;
    poller?.cancel();
    poller = pollRun(client, runId, (run, elapsed) => {
      if (!state.runBanner || state.runBanner.runId !== runId) return;
      state.runBanner.phase = phaseFor(run, elapsed);
      state.runBanner.run = run;
      render();
    });
    try {
      const run = await poller.done;
      if (run.status === "awaiting_teacher") {
        state.runBanner = { runId, phase: "ready", run, errorDetail: null, retry: null };
        state.pendingRun = run;
      } else {
        state.runBanner = {
          runId,
          phase: "errored",
          run,
          errorDetail: run.error_detail ?? `run ended ${run.status}`,
          retry: { caseId, turnIndex, text },
        };
      }
    } catch (err) {
      if (err instanceof PollCancelled) return; // a newer submission took over
      state.runBanner = {
        runId,
        phase: "errored",
        run: null,
        errorDetail: String(err),
        retry: { caseId, turnIndex, text },
      };
    }
    render();
  }

  async function decide(decision: "apply" | "discard"): Promise<void> {
    if (!state.pendingRun) return;
    try {
      const result = await client.decideRun(state.pendingRun.id, decision);
      if (decision === "apply") {
        state.bot = result.bot;
        state.cases = result.cases.filter((c) => c.bot_id === result.bot.id);
        state.notice = result.warnings.length > 0 ? result.warnings.join("; ") : null;
      }
      state.pendingRun = null;
      state.diffOpen = false;
      state.runBanner = null;
    } catch (err) {
      state.notice = err instanceof ApiError ? err.message : String(err);
    }
    render();
  }

  async function markPass(caseId: string): Promise<void> {
    try {
      const updated = await client.markPass(caseId);
      state.cases = state.cases.map((c) => (c.id === updated.id ? updated : c));
    } catch (err) {
      state.notice = err instanceof ApiError ? err.message : String(err);
    }
    render();
  }

  async function advance(message?: string): Promise<void> {
    const current = activeCase();
    if (!current) return;
    try {
      const updated = await client.advanceTestCase(current.id, message);
      state.cases = state.cases.map((c) => (c.id === updated.id ? updated : c));
    } catch (err) {
      state.notice = err instanceof ApiError ? err.message : String(err);
    }
    render();
  }

  async function publish(): Promise<void> {
    if (!state.bot) return;
    try {
      const result = await client.publish(state.bot.id);
      state.bot = result.bot;
      state.publishDialog = { kind: "published", shareUrl: result.share_url };
    } catch (err) {
      if (err instanceof ApiError && err.code === "gate_blocked" && err.details) {
        state.publishDialog = {
          kind: "blocked",
          reasons: err.details.reasons,
          unpassedCaseIds: err.details.unpassed_case_ids,
        };
      } else {
        state.notice = err instanceof ApiError ? err.message : String(err);
      }
    }
    render();
  }

  // ---- rendering -----------------------------------------------------------

  function render(): void {
    renderHeader();
    renderNotice();
    renderPromptPane();
    renderChatPane();
    renderDialog();
  }

  function renderHeader(): void {
    if (!state.bot) {
      title.textContent = "promptdesk";
      statusBadge.textContent = "";
      publishButton.disabled = true;
      return;
    }
    title.textContent = state.bot.title;
    statusBadge.textContent = state.bot.status;
    statusBadge.className = `bot-status bot-status-${state.bot.status}`;
    publishButton.disabled = state.bot.status !== "draft";
    publishButton.onclick = () => void publish();
  }

  function renderNotice(): void {
    noticeHost.innerHTML = "";
    if (state.notice) {
      const note = el("div", "notice", state.notice);
      note.dataset.testid = "notice";
      noticeHost.appendChild(note);
    }
  }

  function renderPromptPane(): void {
    promptPane.innerHTML = "";
    promptPane.appendChild(el("h2", "", "System prompt"));
    renderRunBanner();
    renderDiffPanel();

    const promptText = el("pre", "prompt-text", state.bot?.current_prompt ?? "");
    promptText.dataset.testid = "prompt-text";
    promptPane.appendChild(promptText);
  }

  function renderRunBanner(): void {
    if (!state.runBanner) return;
    const banner = el("div", `run-banner run-banner-${state.runBanner.phase}`);
    banner.dataset.testid = "run-banner";
    banner.dataset.phase = state.runBanner.phase;
    const label: Record<RunPhase, string> = {
      analyzing: "Analyzing your correction…",
      proposing: "Proposing a prompt update…",
      verifying: "Verifying against passed test cases…",
      ready: "A prompt update is ready.",
      errored: "The pipeline failed.",
    };
    banner.appendChild(el("span", "run-banner-label", label[state.runBanner.phase]));

    if (state.runBanner.phase === "ready" && state.pendingRun) {
      const review = el("button", "review-button", "Update prompt");
      review.dataset.testid = "update-prompt";
      review.onclick = () => {
        state.diffOpen = true;
        render();
      };
      banner.appendChild(review);
    }
    if (state.runBanner.phase === "errored") {
      banner.appendChild(
        el("span", "run-banner-error", state.runBanner.errorDetail ?? "unknown error"),
      );
      const retry = state.runBanner.retry;
      if (retry) {
        const retryButton = el("button", "retry-button", "Retry");
        retryButton.dataset.testid = "retry-run";
        retryButton.onclick = () => void submitEdit(retry.caseId, retry.turnIndex, retry.text);
        banner.appendChild(retryButton);
      }
    }
    promptPane.appendChild(banner);
  }

  function renderDiffPanel(): void {
    // Pending diff is shown only for a ready, undecided run.
    if (!state.diffOpen || !state.pendingRun?.proposed) return;
    const run = state.pendingRun;
    const panel = el("div", "diff-panel");
    panel.dataset.testid = "diff-panel";

    panel.appendChild(el("p", "intent-summary", run.inferred_intent));
    panel.appendChild(renderDiff(run.proposed!.diff));

    if (run.regression_report) {
      const list = el("ul", "verdict-list");
      for (const entry of run.regression_report.evaluated_cases) {
        const item = el(
          "li",
          `verdict verdict-${entry.verdict}`,
          `${entry.test_case_id}: ${entry.verdict}`,
        );
        item.dataset.caseId = entry.test_case_id;
        list.appendChild(item);
      }
      panel.appendChild(list);
    }

    const apply = el("button", "apply-button", "Apply");
    apply.dataset.testid = "apply-update";
    apply.onclick = () => void decide("apply");
    const discard = el("button", "discard-button", "Discard");
    discard.dataset.testid = "discard-update";
    discard.onclick = () => void decide("discard");
    panel.append(apply, discard);
    promptPane.appendChild(panel);
  }

  function renderChatPane(): void {
    chatPane.innerHTML = "";
    chatPane.appendChild(el("h2", "", "Test cases"));
    renderCaseTabs();
    renderTranscript();
    renderCaseControls();
  }

  function renderCaseTabs(): void {
    const tabs = el("div", "case-tabs");
    tabs.dataset.testid = "case-tabs";
    for (const testCase of state.cases) {
      const profile = state.profiles.find((p) => p.id === testCase.profile_id);
      const tab = el("button", "case-tab");
      tab.dataset.caseId = testCase.id;
      if (testCase.id === state.activeCaseId) tab.classList.add("case-tab-active");
      tab.appendChild(el("span", "case-tab-name", profile?.name ?? testCase.profile_id));
      tab.appendChild(el("span", `case-badge case-badge-${testCase.status}`, testCase.status));
      tab.onclick = () => {
        state.activeCaseId = testCase.id;
        state.editingTurn = null;
        render();
      };
      tabs.appendChild(tab);
    }

    const starter = el("div", "case-starter");
    const picker = el("select", "profile-picker");
    picker.dataset.testid = "profile-picker";
    for (const profile of state.profiles) {
      const option = el("option", "", profile.name);
      option.value = profile.id;
      picker.appendChild(option);
    }
    const startButton = el("button", "start-case", "New test case");
    startButton.dataset.testid = "start-case";
    startButton.onclick = () => void startCase(picker.value);
    starter.append(picker, startButton);
    tabs.appendChild(starter);
    chatPane.appendChild(tabs);
  }

  function renderTranscript(): void {
    const current = activeCase();
    const transcript = el("div", "transcript");
    transcript.dataset.testid = "transcript";
    if (!current) {
      transcript.appendChild(el("p", "transcript-empty", "Start a test case to begin."));
      chatPane.appendChild(transcript);
      return;
    }
    current.transcript.forEach((turn, index) => {
      const bubble = el("div", `bubble bubble-${turn.role}`);
      bubble.dataset.turnIndex = String(index);
      if (state.editingTurn === index) {
        bubble.appendChild(renderInlineEditor(current.id, index, turn.text));
      } else {
        bubble.appendChild(el("p", "bubble-text", turn.text));
        if (turn.role === "bot") {
          bubble.classList.add("bubble-editable");
          bubble.title = "Click to edit this reply";
          bubble.onclick = () => {
            if (undecidedRun()) return; // one correction at a time
            state.editingTurn = index;
            state.draftText = turn.text;
            render();
          };
        }
      }
      transcript.appendChild(bubble);
    });
    chatPane.appendChild(transcript);
  }

  function renderInlineEditor(caseId: string, turnIndex: number, original: string): HTMLElement {
    const editor = el("div", "inline-editor");
    editor.dataset.testid = "inline-editor";
    const textarea = el("textarea", "inline-editor-text");
    textarea.value = state.draftText;
    textarea.oninput = () => {
      state.draftText = textarea.value;
    };
    const error = el("p", "inline-editor-error");
    error.dataset.testid = "edit-error";
    error.hidden = true;
    const save = el("button", "inline-editor-save", "Submit correction");
    save.dataset.testid = "submit-correction";
    save.onclick = () => {
      if (textarea.value === original) {
        // No request leaves the page for a no-change submission.
        error.textContent = "Edit the reply before submitting.";
        error.hidden = false;
        return;
      }
      void submitEdit(caseId, turnIndex, textarea.value);
    };
    const cancel = el("button", "inline-editor-cancel", "Cancel");
    cancel.onclick = () => {
      state.editingTurn = null;
      render();
    };
    editor.append(textarea, error, save, cancel);
    return editor;
  }

  function renderCaseControls(): void {
    const current = activeCase();
    if (!current) return;
    const controls = el("div", "case-controls");

    const nextTurn = el("button", "advance-button", "Next scripted turn");
    nextTurn.dataset.testid = "advance";
    nextTurn.onclick = () => void advance();

    const input = el("input", "student-input");
    input.dataset.testid = "student-input";
    input.placeholder = "Say something as the student…";
    const send = el("button", "send-button", "Send");
    send.dataset.testid = "send-student";
    send.onclick = () => {
      if (input.value.trim()) void advance(input.value);
    };

    const pass = el("button", "mark-pass-button", "Mark pass");
    pass.dataset.testid = "mark-pass";
    pass.disabled = !(
      (current.status === "awaiting_review" || current.status === "regressed") &&
      current.transcript.length > 0 &&
      current.transcript[current.transcript.length - 1]!.role === "bot"
    );
    pass.onclick = () => void markPass(current.id);

    controls.append(nextTurn, input, send, pass);
    chatPane.appendChild(controls);
  }

  function renderDialog(): void {
    dialogHost.innerHTML = "";
    if (!state.publishDialog) return;
    const overlay = el("div", "dialog-overlay");
    const dialog = el("div", "publish-dialog");
    dialog.dataset.testid = "publish-dialog";

    if (state.publishDialog.kind === "blocked") {
      dialog.dataset.outcome = "blocked";
      dialog.appendChild(el("h3", "", "Publication is blocked"));
      const reasons = el("ul", "blocked-reasons");
      reasons.dataset.testid = "blocked-reasons";
      for (const reason of state.publishDialog.reasons) {
        reasons.appendChild(el("li", "blocked-reason", reason));
      }
      dialog.appendChild(reasons);
      const links = el("div", "blocked-links");
      for (const caseId of state.publishDialog.unpassedCaseIds) {
        const link = el("button", "focus-case", caseId);
        link.dataset.caseId = caseId;
        link.onclick = () => {
          state.activeCaseId = caseId;
          state.publishDialog = null;
          render();
        };
        links.appendChild(link);
      }
      dialog.appendChild(links);
    } else {
      dialog.dataset.outcome = "published";
      dialog.appendChild(el("h3", "", "Your bot is live"));
      const shareUrl = state.publishDialog.shareUrl;
      const link = el("a", "share-link", shareUrl);
      link.dataset.testid = "share-link";
      link.href = `#${shareUrl}`;
      const copy = el("button", "copy-button", "Copy link");
      copy.dataset.testid = "copy-share";
      copy.onclick = () => void copyText(shareUrl);
      dialog.append(link, copy);
    }

    const close = el("button", "dialog-close", "Close");
    close.dataset.testid = "close-dialog";
    close.onclick = () => {
      state.publishDialog = null;
      render();
    };
    dialog.appendChild(close);
    overlay.appendChild(dialog);
    dialogHost.appendChild(overlay);
  }

  void refresh();
  return { refresh, state };
}
