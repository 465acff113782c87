// Job progress tracking: poll /api/jobs/{id}, optionally upgraded to the
// event stream. Progress shown to the UI is monotone even if responses
// arrive out of order.

import { JobRecord, StudioApi } from "./api.js";

export interface JobWatchOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (rec: JobRecord) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class JobWatcher {
  progress = 0;
  last: JobRecord | null = null;

  constructor(
    private api: StudioApi,
    private jobId: string,
  ) {}

  ingest(rec: JobRecord): JobRecord {
    this.progress = Math.max(this.progress, rec.progress);
    this.last = { ...rec, progress: this.progress };
    return this.last;
  }

  get terminal(): boolean {
    return this.last !== null && (this.last.state === "done" || this.last.state === "failed");
  }

  async wait(opts: JobWatchOptions = {}): Promise<JobRecord> {
    const interval = opts.intervalMs ?? 500;
    const timeout = opts.timeoutMs ?? 60 * 60 * 1000;
    const sleep = opts.sleep ?? defaultSleep;
    const deadline = Date.now() + timeout;
    for (;;) {
      const rec = this.ingest(await this.api.getJob(this.jobId));
      opts.onUpdate?.(rec);
      if (this.terminal) return rec;
      if (Date.now() >= deadline) throw new Error(`job ${this.jobId} timed out`);
      await sleep(interval);
    }
  }

  // Event-stream upgrade; falls back to polling if EventSource is missing
  // or errors out before the job finishes.
  watch(opts: JobWatchOptions = {}): Promise<JobRecord> {
    const ES = (globalThis as { EventSource?: typeof EventSource }).EventSource;
    if (!ES) return this.wait(opts);
    return new Promise((resolve, reject) => {
      const source = new ES(this.api.eventStreamUrl(this.jobId));
      source.onmessage = (ev) => {
        const rec = this.ingest(JSON.parse(ev.data) as JobRecord);
        opts.onUpdate?.(rec);
        if (this.terminal) {
          source.close();
          resolve(rec);
        }
      };
      source.onerror = () => {
        source.close();
        if (this.terminal && this.last) {
          resolve(this.last);
        } else {
          this.wait(opts).then(resolve, reject);
        }
      };
    });
  }
}
