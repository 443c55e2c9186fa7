/**
 * Typed client for the segmentation service. Every interaction with the
 * backend goes through this module; nothing else touches the network.
 */

export interface RunSummary {
  run_id: string;
  status: "running" | "done" | "error";
  from: number;
  direction: "forward" | "backward" | "both";
  frames_done: number[];
  events: { frame: number; prototypes: number }[];
  error: { code: string; message: string } | null;
}

export interface SequenceSummary {
  id: string;
  frame_count: number;
  dims: [number, number];
  status: "idle" | "running" | "done" | "error";
  annotations: number[];
  ground_truth_frames: number[];
  runs: RunSummary[];
}

export interface FrameScore {
  frame: number;
  j: number;
  f: number;
  jf: number;
}

export interface Report {
  mean: { j: number; f: number; jf: number };
  std: { j: number; f: number; jf: number };
  evaluated: number;
  run: string;
  frames: FrameScore[];
}

export interface PropagateRequest {
  from: number;
  direction?: "forward" | "backward" | "both";
  config?: Record<string, string | number>;
}

/** Receipt from sequence creation; fetch the summary for the rest. */
export interface CreateReceipt {
  id: string;
  frame_count: number;
  dims: [number, number];
}

/** A non-2xx response; `code` is the service's machine-readable string. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

function toBase64(bytes: Uint8Array): string {
  let binary = "";
  const STEP = 0x8000; // String.fromCharCode argument limit
  for (let i = 0; i < bytes.length; i += STEP) {
    binary += String.fromCharCode(...bytes.subarray(i, i + STEP));
  }
  return btoa(binary);
}

export class ApiClient {
  private readonly base: string;

  constructor(baseUrl: string) {
    this.base = baseUrl.replace(/\/$/, "");
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) {
      let code = "http_error";
      let message = `${response.status} ${response.statusText}`;
      try {
        const body = await response.json();
        if (typeof body.code === "string") code = body.code;
        if (typeof body.message === "string") message = body.message;
      } catch {
        // non-JSON error body; keep the status-line message
      }
      throw new ApiError(code, message, response.status);
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    return (await this.request(path, init)).json() as Promise<T>;
  }

  private async bytes(path: string): Promise<Uint8Array> {
    return new Uint8Array(await (await this.request(path)).arrayBuffer());
  }

  listSequences(): Promise<{ sequences: SequenceSummary[] }> {
    return this.json("/sequences");
  }

  getSequence(id: string): Promise<SequenceSummary> {
    return this.json(`/sequences/${id}`);
  }

  /** Ingest a sequence folder readable by the server. */
  createFromPath(path: string): Promise<CreateReceipt> {
    return this.json("/sequences", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ path }),
    });
  }

  /** Raw PNG bytes of one frame. */
  getFrame(id: string, frame: number): Promise<Uint8Array> {
    return this.bytes(`/sequences/${id}/frames/${frame}`);
  }

  /** Upload an annotation as an indexed PNG (base64 inside JSON). */
  async putAnnotation(id: string, frame: number, png: Uint8Array): Promise<void> {
    await this.request(`/sequences/${id}/annotations/${frame}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ mask: toBase64(png) }),
    });
  }

  getAnnotation(id: string, frame: number): Promise<Uint8Array> {
    return this.bytes(`/sequences/${id}/annotations/${frame}`);
  }

  propagate(id: string, body: PropagateRequest): Promise<{ run_id: string }> {
    return this.json(`/sequences/${id}/propagate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getRun(id: string, runId: string): Promise<RunSummary> {
    return this.json(`/sequences/${id}/runs/${runId}`);
  }

  /** Predicted mask PNG; `run` defaults to the newest run per frame. */
  getMask(id: string, frame: number, run = "latest"): Promise<Uint8Array> {
    return this.bytes(`/sequences/${id}/masks/${frame}?run=${encodeURIComponent(run)}`);
  }

  getReport(id: string, run = "latest"): Promise<Report> {
    return this.json(`/sequences/${id}/report?run=${encodeURIComponent(run)}`);
  }
}
