// Run polling: 1 s interval, capped at 120 s. The 202-then-poll contract
// is the only way the UI observes pipeline progress.

import type { Client } from "./api";
import type { PipelineRun, RunPhase } from "./types";

export const POLL_INTERVAL_MS = 1000;
export const POLL_CAP_MS = 120_000;

export class PollCancelled extends Error {
  constructor() {
    super("polling cancelled");
  }
}

export interface PollHandle {
  done: Promise<PipelineRun>;
  cancel(): void;
}

export function pollRun(
  client: Client,
  runId: string,
  onTick?: (run: PipelineRun, elapsedMs: number) => void,
  intervalMs: number = POLL_INTERVAL_MS,
  capMs: number = POLL_CAP_MS,
): PollHandle {
  let timer: ReturnType<typeof setTimeout> | undefined;
  let cancelled = false;
  let rejectDone: ((err: Error) => void) | undefined;
  const startedAt = Date.now();

  const done = new Promise<PipelineRun>((resolve, reject) => {
    rejectDone = reject;
    const tick = async () => {
      if (cancelled) return;
      let run: PipelineRun;
      try {
        run = await client.getRun(runId);
      } catch (err) {
        reject(err as Error);
        return;
      }
      if (cancelled) return;
      const elapsed = Date.now() - startedAt;
      onTick?.(run, elapsed);
      if (run.status !== "running") {
        resolve(run);
        return;
      }
      if (elapsed >= capMs) {
        reject(new Error(`run ${runId} still running after ${capMs / 1000}s`));
        return;
      }
      timer = setTimeout(tick, intervalMs);
    };
    void tick();
  });

  return {
    done,
    cancel() {
      cancelled = true;
      if (timer !== undefined) {
        clearTimeout(timer);
      }
      rejectDone?.(new PollCancelled());
    },
  };
}

// The backend records a run in one shot, so intermediate pipeline steps are
// presented as a time-based progression while the run is in flight.
export function phaseFor(run: PipelineRun, elapsedMs: number): RunPhase {
  if (run.status === "errored") return "errored";
  if (run.status !== "running") return "ready";
  if (elapsedMs < 1500) return "analyzing";
  if (elapsedMs < 3000) return "proposing";
  return "verifying";
}
