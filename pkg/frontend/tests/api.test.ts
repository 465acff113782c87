import { describe, expect, it } from "vitest";
import { ApiError, StudioApi } from "../src/api.js";

type Call = { url: string; init?: RequestInit };

function fakeFetch(status: number, body: unknown) {
  const calls: Call[] = [];
  const fn = (async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return {
      ok: status >= 200 && status < 300,
      status,
      statusText: `status ${status}`,
      json: async () => body,
    } as Response;
  }) as typeof fetch;
  return { fn, calls };
}

describe("StudioApi", () => {
  it("startTrain posts image id and config to /api/train", async () => {
    const { fn, calls } = fakeFetch(200, { job_id: "j1", checkpoint_id: "c1" });
    const api = new StudioApi("", fn);
    const out = await api.startTrain("img1", { iterations: 100 });
    expect(out).toEqual({ job_id: "j1", checkpoint_id: "c1" });
    expect(calls[0].url).toBe("/api/train");
    expect(JSON.parse(calls[0].init!.body as string)).toEqual({
      image_id: "img1",
      config: { iterations: 100 },
    });
  });

  it("startSample ships stroke payloads verbatim", async () => {
    const { fn, calls } = fakeFetch(200, { job_id: "j2" });
    const api = new StudioApi("", fn);
    const strokes = { width: 64, height: 64, strokes: [{ points: [[1, 2]] as [number, number][], width: 9 }] };
    await api.startSample({ checkpointId: "c1", imageId: "i1", maskStrokes: strokes, n: 4, seed: 7 });
    const body = JSON.parse(calls[0].init!.body as string);
    expect(body).toEqual({
      checkpoint_id: "c1",
      image_id: "i1",
      mask_id: null,
      mask_strokes: strokes,
      n: 4,
      seed: 7,
    });
  });

  it("uploadImage sends multipart form data", async () => {
    const { fn, calls } = fakeFetch(200, { id: "i9", channels: 3, height: 8, width: 8 });
    const api = new StudioApi("", fn);
    const meta = await api.uploadImage(new Blob([new Uint8Array([1, 2, 3])]), "x.png");
    expect(meta.id).toBe("i9");
    expect(calls[0].init!.body).toBeInstanceOf(FormData);
    const form = calls[0].init!.body as FormData;
    expect((form.get("file") as File).name).toBe("x.png");
  });

  it("surfaces server error detail with status", async () => {
    const { fn } = fakeFetch(409, { detail: "a training job is already running" });
    const api = new StudioApi("", fn);
    const err = await api.startTrain("img1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.message).toContain("already running");
  });

  it("falls back to statusText when the error body is not JSON", async () => {
    const fn = (async () => ({
      ok: false,
      status: 500,
      statusText: "Internal Server Error",
      json: async () => {
        throw new Error("not json");
      },
    })) as unknown as typeof fetch;
    const api = new StudioApi("", fn);
    const err = await api.listJobs().catch((e) => e);
    expect(err.message).toBe("Internal Server Error");
  });

  it("builds artifact and image urls against the base", () => {
    const api = new StudioApi("http://host:1234");
    expect(api.artifactUrl("j1", "sample_000.png")).toBe("http://host:1234/api/jobs/j1/artifacts/sample_000.png");
    expect(api.imageUrl("i1")).toBe("http://host:1234/api/images/i1");
    expect(api.eventStreamUrl("j1")).toBe("http://host:1234/api/jobs/j1/events");
  });
});
