// Wire types for the promptdesk HTTP API. These mirror the JSON the
// backend serves; the UI renders them and never recomputes verdicts,
// gate reasons, or diffs.

export type HunkKind = "keep" | "delete" | "insert";

export interface Hunk {
  kind: HunkKind;
  lines: string[];
}

export interface TrackedDiff {
  hunks: Hunk[];
  old_ends_with_newline: boolean;
  new_ends_with_newline: boolean;
}

export type CaseStatus = "unrun" | "awaiting_review" | "passed" | "regressed" | "failed";
export type RunStatus = "running" | "awaiting_teacher" | "applied" | "discarded" | "errored";

export interface Turn {
  role: "student" | "bot";
  text: string;
  produced_by_version: string | null;
}

export interface TestCase {
  id: string;
  bot_id: string;
  profile_id: string;
  transcript: Turn[];
  status: CaseStatus;
  updated_at: string;
}

export interface Bot {
  id: string;
  title: string;
  description: string;
  model_choice: string;
  status: "draft" | "published";
  share_token: string | null;
  current_version: string;
  current_prompt: string;
}

export interface StudentProfile {
  id: string;
  name: string;
  description: string;
  opening_message: string;
  scripted_followups: string[];
  builtin: boolean;
}

export interface CaseVerdict {
  test_case_id: string;
  verdict: "pass" | "regression" | "error";
  rationale: string;
  replayed_response: string;
}

export interface RegressionReport {
  evaluated_cases: CaseVerdict[];
  prompt_version: string;
}

export interface ProposedUpdate {
  version_id: string;
  full_text: string;
  diff: TrackedDiff;
}

export interface PipelineRun {
  id: string;
  correction_id: string;
  inferred_intent: string;
  behavioral_rule: string;
  proposed_version: string | null;
  regression_report: RegressionReport | null;
  status: RunStatus;
  error_detail: string | null;
  proposed?: ProposedUpdate;
}

export interface DecisionResult {
  bot: Bot;
  run: PipelineRun;
  cases: TestCase[];
  warnings: string[];
}

export interface GateDetails {
  reasons: string[];
  unpassed_case_ids: string[];
}

export interface ApiErrorBody {
  code:
    | "validation"
    | "state"
    | "not_found"
    | "gate_blocked"
    | "busy"
    | "provider"
    | "internal";
  message: string;
  details?: GateDetails & Record<string, unknown>;
}

export type RunPhase = "analyzing" | "proposing" | "verifying" | "ready" | "errored";
