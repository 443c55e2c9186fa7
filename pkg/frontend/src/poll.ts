/**
 * Poll a propagation run until it reaches a terminal state, reporting
 * progress as frames become available.
 */

import { ApiError, RunSummary } from "./api";

/** The slice of ApiClient that polling needs (test seam). */
export interface RunFetcher {
  getRun(id: string, runId: string): Promise<RunSummary>;
}

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  /**
   * Called whenever more frames have finished since the last call; the
   * reported count never decreases.
   */
  onProgress?: (framesDone: number, run: RunSummary) => void;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

/**
 * Resolve with the final summary once the run is done; reject with an
 * ApiError carrying the run's error code if it fails, or with a timeout
 * error if it exceeds `timeoutMs`.
 */
export async function pollRun(
  client: RunFetcher,
  sequenceId: string,
  runId: string,
  options: PollOptions = {},
): Promise<RunSummary> {
  const interval = options.intervalMs ?? 250;
  const deadline = Date.now() + (options.timeoutMs ?? 120_000);
  let reported = -1;
  for (;;) {
    const run = await client.getRun(sequenceId, runId);
    if (run.frames_done.length > reported) {
      reported = run.frames_done.length;
      options.onProgress?.(reported, run);
    }
    if (run.status === "done") return run;
    if (run.status === "error") {
      const err = run.error ?? { code: "propagation_failed", message: "run failed" };
      throw new ApiError(err.code, err.message, 0);
    }
    if (Date.now() >= deadline) {
      throw new Error(`run ${runId} still ${run.status} after ${options.timeoutMs}ms`);
    }
    await sleep(interval);
  }
}
