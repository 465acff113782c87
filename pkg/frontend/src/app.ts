// Studio shell: wires the mask editor, training, and the sample grid to the
// DOM. All pixels come from the server; the canvas only displays them and
// overlays the locally edited mask.

import { ApiError, ImageMeta, JobRecord, StudioApi } from "./api.js";
import { JobWatcher } from "./jobs.js";
import { MaskEditor } from "./maskEditor.js";

const MAX_SIDE = 1024;

interface StudioState {
  image: ImageMeta | null;
  checkpointId: string | null;
  trainJobId: string | null;
  sampleJobId: string | null;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class StudioApp {
  private api = new StudioApi();
  private state: StudioState = { image: null, checkpointId: null, trainJobId: null, sampleJobId: null };
  private editor: MaskEditor | null = null;
  private baseImage: HTMLImageElement | null = null;
  private painting = false;
  private canvas = el<HTMLCanvasElement>("mask-canvas");
  private ctx = this.canvas.getContext("2d")!;

  start(): void {
    el<HTMLInputElement>("upload").addEventListener("change", (e) => this.onUpload(e));
    el<HTMLButtonElement>("train").addEventListener("click", () => this.onTrain());
    el<HTMLButtonElement>("sample").addEventListener("click", () => this.onSample());
    el<HTMLButtonElement>("undo").addEventListener("click", () => this.onUndo());
    el<HTMLButtonElement>("clear").addEventListener("click", () => this.onClear());
    el<HTMLButtonElement>("export-mask").addEventListener("click", () => this.exportMask());
    el<HTMLInputElement>("import-mask").addEventListener("change", (e) => this.importMask(e));
    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    window.addEventListener("pointerup", () => this.onPointerUp());
    this.restoreFromHash();
  }

  private setStatus(text: string, isError = false): void {
    const node = el<HTMLDivElement>("status");
    node.textContent = text;
    node.classList.toggle("error", isError);
  }

  private setProgress(fraction: number): void {
    el<HTMLProgressElement>("progress").value = fraction;
  }

  private brush(): { width: number; erase: boolean } {
    return {
      width: Number(el<HTMLInputElement>("brush-width").value),
      erase: el<HTMLInputElement>("erase-mode").checked,
    };
  }

  private async onUpload(e: Event): Promise<void> {
    const input = e.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    try {
      const meta = await this.api.uploadImage(file, file.name);
      if (meta.height > MAX_SIDE || meta.width > MAX_SIDE) {
        this.setStatus(`image ${meta.width}x${meta.height} exceeds ${MAX_SIDE}px limit`, true);
        return;
      }
      await this.setWorkingImage(meta);
      this.setStatus(`loaded ${meta.width}x${meta.height}, ${meta.channels} channels`);
    } catch (err) {
      this.reportError(err);
    }
  }

  private async setWorkingImage(meta: ImageMeta): Promise<void> {
    this.state.image = meta;
    this.state.checkpointId = null;
    this.editor = new MaskEditor(meta.width, meta.height);
    this.canvas.width = meta.width;
    this.canvas.height = meta.height;
    this.baseImage = await this.loadImage(this.api.imageUrl(meta.id));
    this.redraw();
    this.syncHash();
  }

  private loadImage(url: string): Promise<HTMLImageElement> {
    return new Promise((resolve, reject) => {
      const img = new Image();
      img.onload = () => resolve(img);
      img.onerror = () => reject(new Error(`failed to load ${url}`));
      img.src = url;
    });
  }

  private redraw(): void {
    if (!this.baseImage || !this.editor) return;
    const { width, height } = this.canvas;
    this.ctx.drawImage(this.baseImage, 0, 0, width, height);
    const pixels = this.editor.pixels();
    const overlay = this.ctx.getImageData(0, 0, width, height);
    for (let i = 0; i < pixels.length; i++) {
      if (pixels[i]) {
        overlay.data[i * 4] = Math.min(255, overlay.data[i * 4] + 140);
        overlay.data[i * 4 + 3] = 255;
      }
    }
    this.ctx.putImageData(overlay, 0, 0);
    el<HTMLSpanElement>("hole-frac").textContent = `${(this.editor.holeFraction() * 100).toFixed(1)}% hole`;
  }

  private canvasPoint(e: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const x = ((e.clientX - rect.left) / rect.width) * this.canvas.width;
    const y = ((e.clientY - rect.top) / rect.height) * this.canvas.height;
    return [x, y];
  }

  private onPointerDown(e: PointerEvent): void {
    if (!this.editor) return;
    const { width, erase } = this.brush();
    const [x, y] = this.canvasPoint(e);
    this.editor.apply({ mode: erase ? "erase" : "paint", stroke: { points: [[x, y]], width } });
    this.painting = true;
    this.redraw();
  }

  private onPointerMove(e: PointerEvent): void {
    if (!this.painting || !this.editor) return;
    const { width, erase } = this.brush();
    // extend the mask continuously: replace the last op with a longer stroke
    this.editor.undo();
    const [x, y] = this.canvasPoint(e);
    const pts = this.currentStroke ?? [];
    pts.push([x, y]);
    this.currentStroke = pts;
    this.editor.apply({ mode: erase ? "erase" : "paint", stroke: { points: pts.slice(), width } });
    this.redraw();
  }

  private currentStroke: [number, number][] | null = null;

  private onPointerUp(): void {
    this.painting = false;
    this.currentStroke = null;
  }

  private onUndo(): void {
    if (this.editor?.undo()) this.redraw();
  }

  private onClear(): void {
    this.editor?.clear();
    this.redraw();
  }

  private exportMask(): void {
    if (!this.editor) return;
    const off = document.createElement("canvas");
    off.width = this.editor.width;
    off.height = this.editor.height;
    const ctx = off.getContext("2d")!;
    const img = ctx.createImageData(off.width, off.height);
    const pixels = this.editor.pixels();
    for (let i = 0; i < pixels.length; i++) {
      const v = pixels[i] ? 255 : 0;
      img.data.set([v, v, v, 255], i * 4);
    }
    ctx.putImageData(img, 0, 0);
    const a = document.createElement("a");
    a.href = off.toDataURL("image/png");
    a.download = "mask.png";
    a.click();
  }

  private async importMask(e: Event): Promise<void> {
    const input = e.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file || !this.editor) return;
    const img = await this.loadImage(URL.createObjectURL(file));
    if (img.width !== this.editor.width || img.height !== this.editor.height) {
      this.setStatus(`mask ${img.width}x${img.height} does not match image`, true);
      return;
    }
    const off = document.createElement("canvas");
    off.width = img.width;
    off.height = img.height;
    const ctx = off.getContext("2d")!;
    ctx.drawImage(img, 0, 0);
    const data = ctx.getImageData(0, 0, img.width, img.height).data;
    const pixels = new Uint8Array(img.width * img.height);
    for (let i = 0; i < pixels.length; i++) pixels[i] = data[i * 4] > 127 ? 1 : 0;
    this.editor.importPixels(pixels);
    this.redraw();
  }

  private async onTrain(): Promise<void> {
    if (!this.state.image) {
      this.setStatus("upload an image first", true);
      return;
    }
    const iters = Number(el<HTMLInputElement>("train-iters").value);
    try {
      const started = await this.api.startTrain(this.state.image.id, { iterations: iters });
      this.state.trainJobId = started.job_id;
      this.state.checkpointId = started.checkpoint_id;
      this.syncHash();
      this.setStatus("training...");
      const rec = await new JobWatcher(this.api, started.job_id).watch({
        onUpdate: (r) => {
          this.setProgress(r.progress);
          this.setStatus(r.message);
        },
      });
      if (rec.state === "failed") {
        this.setStatus(`training failed: ${rec.message}`, true);
        this.state.checkpointId = null;
      } else {
        this.setStatus("training complete");
      }
    } catch (err) {
      this.reportError(err);
    }
  }

  private async maskReference(): Promise<{ maskId?: string; maskStrokes?: ReturnType<MaskEditor["toStrokePayload"]> }> {
    if (!this.editor) return {};
    const payload = this.editor.toStrokePayload();
    if (payload) return { maskStrokes: payload };
    // erases or imports: ship the rasterized mask as a PNG upload
    const blob = await new Promise<Blob>((resolve, reject) => {
      const off = document.createElement("canvas");
      off.width = this.editor!.width;
      off.height = this.editor!.height;
      const ctx = off.getContext("2d")!;
      const img = ctx.createImageData(off.width, off.height);
      const pixels = this.editor!.pixels();
      for (let i = 0; i < pixels.length; i++) {
        const v = pixels[i] ? 255 : 0;
        img.data.set([v, v, v, 255], i * 4);
      }
      ctx.putImageData(img, 0, 0);
      off.toBlob((b) => (b ? resolve(b) : reject(new Error("mask encode failed"))), "image/png");
    });
    const meta = await this.api.uploadImage(blob, "mask.png");
    return { maskId: meta.id };
  }

  private async onSample(): Promise<void> {
    const { image, checkpointId } = this.state;
    if (!image || !checkpointId) {
      this.setStatus("train a checkpoint first", true);
      return;
    }
    const n = Number(el<HTMLInputElement>("sample-n").value);
    const seed = Number(el<HTMLInputElement>("sample-seed").value);
    try {
      const mask = await this.maskReference();
      const started = await this.api.startSample({
        checkpointId,
        imageId: image.id,
        maskId: mask.maskId,
        maskStrokes: mask.maskStrokes ?? undefined,
        n,
        seed,
      });
      this.state.sampleJobId = started.job_id;
      this.syncHash();
      this.setStatus("sampling...");
      const rec = await new JobWatcher(this.api, started.job_id).watch({
        onUpdate: (r) => {
          this.setProgress(r.progress);
          this.renderGrid(r);
        },
      });
      if (rec.state === "failed") {
        this.setStatus(`sampling failed: ${rec.message}`, true);
      } else {
        this.setStatus(`done: ${rec.artifacts.length - 1} samples`);
        this.renderGrid(rec);
      }
    } catch (err) {
      this.reportError(err);
    }
  }

  private renderGrid(rec: JobRecord): void {
    const grid = el<HTMLDivElement>("grid");
    grid.innerHTML = "";
    for (const name of rec.artifacts) {
      if (!name.endsWith(".png")) continue;
      const tile = document.createElement("div");
      tile.className = "tile";
      const img = document.createElement("img");
      img.src = this.api.artifactUrl(rec.id, name);
      img.title = "click to zoom";
      img.addEventListener("click", () => img.classList.toggle("zoomed"));
      const pick = document.createElement("button");
      pick.textContent = "continue from this";
      pick.addEventListener("click", () => this.pickAndContinue(rec.id, name));
      tile.append(img, pick);
      grid.append(tile);
    }
  }

  // The chosen sample becomes the new working image; the mask resets so the
  // next round can target a different region.
  private async pickAndContinue(jobId: string, name: string): Promise<void> {
    try {
      const resp = await fetch(this.api.artifactUrl(jobId, name));
      const blob = await resp.blob();
      const meta = await this.api.uploadImage(blob, name);
      await this.setWorkingImage(meta);
      this.setStatus(`continuing from ${name} (new image ${meta.id})`);
    } catch (err) {
      this.reportError(err);
    }
  }

  private reportError(err: unknown): void {
    if (err instanceof ApiError) {
      this.setStatus(`server error ${err.status}: ${err.message}`, true);
    } else {
      this.setStatus(String(err), true);
    }
  }

  private syncHash(): void {
    const parts: string[] = [];
    if (this.state.image) parts.push(`img=${this.state.image.id}`);
    if (this.state.checkpointId) parts.push(`ckpt=${this.state.checkpointId}`);
    if (this.state.trainJobId) parts.push(`train=${this.state.trainJobId}`);
    if (this.state.sampleJobId) parts.push(`sample=${this.state.sampleJobId}`);
    window.location.hash = parts.join("&");
  }

  private async restoreFromHash(): Promise<void> {
    const params = new URLSearchParams(window.location.hash.slice(1));
    const sampleJob = params.get("sample");
    const imageId = params.get("img");
    this.state.checkpointId = params.get("ckpt");
    this.state.trainJobId = params.get("train");
    if (imageId) {
      try {
        // image metadata is not stored client-side; probe via the PNG itself
        const img = await this.loadImage(this.api.imageUrl(imageId));
        await this.setWorkingImage({ id: imageId, channels: 3, height: img.height, width: img.width });
      } catch {
        this.setStatus(`image ${imageId} from URL no longer on server`, true);
      }
    }
    if (sampleJob) {
      try {
        const rec = await this.api.getJob(sampleJob);
        this.state.sampleJobId = sampleJob;
        this.renderGrid(rec);
      } catch {
        // stale job id in URL; ignore
      }
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("mask-canvas")) {
  new StudioApp().start();
}
