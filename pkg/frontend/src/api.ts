import type { JobStatus, NextAction, SessionSummary, SessionView, Verdict } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.error === "string") detail = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(
    private base = "",
    private fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  imageUrl(imageId: string): string {
    return `${this.base}/api/images/${imageId}`;
  }

  async listSessions(): Promise<SessionSummary[]> {
    return parseOrThrow(await this.fetchImpl(`${this.base}/api/sessions`));
  }

  async getSession(id: string): Promise<SessionView> {
    return parseOrThrow(await this.fetchImpl(`${this.base}/api/sessions/${id}`));
  }

  async createSession(image: File, targetPrompt: string, sourcePrompt?: string): Promise<SessionView> {
    const form = new FormData();
    form.append("image", image);
    form.append("target_prompt", targetPrompt);
    if (sourcePrompt) form.append("source_prompt", sourcePrompt);
    return parseOrThrow(await this.fetchImpl(`${this.base}/api/sessions`, { method: "POST", body: form }));
  }

  async postVerdict(sessionId: string, verdict: Verdict): Promise<NextAction | { done: true }> {
    return parseOrThrow(
      await this.fetchImpl(`${this.base}/api/sessions/${sessionId}/verdict`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(verdict),
      }),
    );
  }

  async postSweep(sessionId: string, action: NextAction): Promise<{ job_id: string }> {
    // forward the recommended action untouched: strategy decisions live server-side
    return parseOrThrow(
      await this.fetchImpl(`${this.base}/api/sessions/${sessionId}/sweeps`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(action),
      }),
    );
  }

  async getJob(jobId: string): Promise<JobStatus> {
    return parseOrThrow(await this.fetchImpl(`${this.base}/api/jobs/${jobId}`));
  }
}
