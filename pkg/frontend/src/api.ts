// Typed client over the documented promptdesk endpoints. Every call maps
// to exactly one endpoint; errors carry the server's {code, message,
// details} body.

import type {
  ApiErrorBody,
  Bot,
  DecisionResult,
  PipelineRun,
  StudentProfile,
  TestCase,
} from "./types";

export class ApiError extends Error {
  readonly code: ApiErrorBody["code"];
  readonly details?: ApiErrorBody["details"];

  constructor(body: ApiErrorBody, readonly status: number) {
    super(body.message);
    this.code = body.code;
    this.details = body.details;
  }
}

async function parseError(response: Response): Promise<never> {
  let body: ApiErrorBody;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    body = { code: "internal", message: `HTTP ${response.status}` };
  }
  throw new ApiError(body, response.status);
}

export class Client {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      await parseError(response);
    }
    return (await response.json()) as T;
  }

  listBots(): Promise<{ bots: Bot[] }> {
    return this.request("GET", "/bots");
  }

  getBot(botId: string): Promise<Bot> {
    return this.request("GET", `/bots/${botId}`);
  }

  createBot(title: string, description: string, modelChoice: string): Promise<Bot> {
    return this.request("POST", "/bots", {
      title,
      description,
      model_choice: modelChoice,
    });
  }

  listProfiles(): Promise<{ profiles: StudentProfile[] }> {
    return this.request("GET", "/profiles");
  }

  listTestCases(botId: string): Promise<{ cases: TestCase[] }> {
    return this.request("GET", `/bots/${botId}/test-cases`);
  }

  startTestCase(botId: string, profileId: string): Promise<TestCase> {
    return this.request("POST", `/bots/${botId}/test-cases`, { profile_id: profileId });
  }

  getTestCase(caseId: string): Promise<TestCase> {
    return this.request("GET", `/test-cases/${caseId}`);
  }

  advanceTestCase(caseId: string, message?: string): Promise<TestCase> {
    return this.request("POST", `/test-cases/${caseId}/turns`, {
      message: message ?? null,
    });
  }

  submitCorrection(
    caseId: string,
    turnIndex: number,
    correctedText: string,
  ): Promise<{ run_id: string }> {
    return this.request("POST", `/test-cases/${caseId}/corrections`, {
      turn_index: turnIndex,
      corrected_text: correctedText,
    });
  }

  getRun(runId: string): Promise<PipelineRun> {
    return this.request("GET", `/runs/${runId}`);
  }

  decideRun(runId: string, decision: "apply" | "discard"): Promise<DecisionResult> {
    return this.request("POST", `/runs/${runId}/decision`, { decision });
  }

  markPass(caseId: string): Promise<TestCase> {
    return this.request("POST", `/test-cases/${caseId}/mark-pass`);
  }

  publish(botId: string): Promise<{ share_url: string; bot: Bot }> {
    return this.request("POST", `/bots/${botId}/publish`);
  }

  shareCard(token: string): Promise<{ title: string; description: string }> {
    return this.request("GET", `/share/${token}`);
  }

  shareMessage(
    token: string,
    message: string,
    sessionId?: string,
  ): Promise<{ reply: string; session_id: string }> {
    return this.request("POST", `/share/${token}/messages`, {
      message,
      session_id: sessionId ?? null,
    });
  }
}
