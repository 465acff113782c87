// Typed client for the service API. `fetch` is injectable so tests run
// without a server.

import { StrokePayload } from "./strokes.js";

export type Fetch = typeof fetch;

export interface ImageMeta {
  id: string;
  channels: number;
  height: number;
  width: number;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobRecord {
  id: string;
  kind: "train" | "sample";
  state: JobState;
  progress: number;
  message: string;
  artifacts: string[];
  timings: Record<string, number>;
  created_at: number;
}

export interface CheckpointMeta {
  id: string;
  T: number;
  channels: number;
  parameters: number;
  meta: Record<string, unknown>;
}

export interface TrainStart {
  job_id: string;
  checkpoint_id: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export class StudioApi {
  constructor(
    private base: string = "",
    private doFetch: Fetch = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.doFetch(this.base + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep statusText
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  async uploadImage(blob: Blob, name = "upload.png"): Promise<ImageMeta> {
    const form = new FormData();
    form.append("file", blob, name);
    return this.json<ImageMeta>("/api/images", { method: "POST", body: form });
  }

  imageUrl(imageId: string): string {
    return `${this.base}/api/images/${imageId}`;
  }

  async listJobs(): Promise<JobRecord[]> {
    return this.json<JobRecord[]>("/api/jobs");
  }

  async getJob(jobId: string): Promise<JobRecord> {
    return this.json<JobRecord>(`/api/jobs/${jobId}`);
  }

  artifactUrl(jobId: string, name: string): string {
    return `${this.base}/api/jobs/${jobId}/artifacts/${name}`;
  }

  eventStreamUrl(jobId: string): string {
    return `${this.base}/api/jobs/${jobId}/events`;
  }

  async listCheckpoints(): Promise<CheckpointMeta[]> {
    return this.json<CheckpointMeta[]>("/api/checkpoints");
  }

  async startTrain(imageId: string, config: Record<string, unknown> = {}): Promise<TrainStart> {
    return this.json<TrainStart>("/api/train", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_id: imageId, config }),
    });
  }

  async startSample(req: {
    checkpointId: string;
    imageId: string;
    maskId?: string;
    maskStrokes?: StrokePayload;
    n?: number;
    seed?: number;
  }): Promise<{ job_id: string }> {
    return this.json<{ job_id: string }>("/api/sample", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        checkpoint_id: req.checkpointId,
        image_id: req.imageId,
        mask_id: req.maskId ?? null,
        mask_strokes: req.maskStrokes ?? null,
        n: req.n ?? 1,
        seed: req.seed ?? 0,
      }),
    });
  }
}
