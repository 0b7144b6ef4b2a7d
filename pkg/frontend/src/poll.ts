import type { JobStatus } from "./types.js";

const TERMINAL = new Set(["done", "failed"]);

/** Poll one job at a fixed cadence until it reaches a terminal state.
 *
 * Polling can be paused (form submissions must not interleave with background
 * refreshes) and resumed; pausing while a request is in flight discards its
 * tick.
 */
export class JobPoller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private paused = false;

  constructor(
    private fetchStatus: (jobId: string) => Promise<JobStatus>,
    private intervalMs = 1000,
  ) {}

  start(jobId: string, onTick: (status: JobStatus) => void, onDone: (status: JobStatus) => void): void {
    this.stop();
    const tick = async () => {
      if (this.paused) return;
      let status: JobStatus;
      try {
        status = await this.fetchStatus(jobId);
      } catch {
        return; // transient fetch failure; next tick retries
      }
      if (this.paused) return;
      if (TERMINAL.has(status.state)) {
        this.stop();
        onDone(status);
      } else {
        onTick(status);
      }
    };
    this.timer = setInterval(tick, this.intervalMs);
    void tick();
  }

  pause(): void {
    this.paused = true;
  }

  resume(): void {
    this.paused = false;
  }

  get active(): boolean {
    return this.timer !== null;
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
