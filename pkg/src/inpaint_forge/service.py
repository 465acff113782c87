"""HTTP service: training jobs, sampling jobs, artifacts, progress events.

State lives entirely in the workdir (plain files + one manifest per job), so a
restarted server re-indexes everything from disk. One training job runs at a
time; sampling jobs go through a small semaphore. The studio UI consumes this
API exclusively.

Workdir layout:
    images/<id>.png           uploaded images and masks
    checkpoints/<id>.ckpt     training outputs
    jobs/<id>/manifest.json   job record
    jobs/<id>/artifacts/      result images and run metadata
"""

from __future__ import annotations

import io
import json
import os
import threading
import time
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException, UploadFile
from fastapi.responses import FileResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import checkpoint as ckpt_mod
from .image_data import apply_mask, load_image, load_mask, save_image
from .mask_gen import rasterize_strokes
from .model import DenoiserModel, ModelConfig, count_parameters
from .sampler import inpaint
from .trainer import TrainConfig, TrainerError, train

SAMPLE_QUEUE_DEPTH = 2
_STATES = ("queued", "running", "done", "failed")


class JobRecord(BaseModel):
    id: str
    kind: str  # train | sample
    state: str = "queued"
    progress: float = 0.0
    message: str = ""
    artifacts: list[str] = []
    timings: dict = {}
    created_at: float = 0.0


class TrainRequest(BaseModel):
    image_id: str
    test_mask_id: str | None = None
    config: dict = {}


class StrokePayload(BaseModel):
    width: int
    height: int
    strokes: list[dict]  # {"points": [[x, y], ...], "width": w}


class SampleJobRequest(BaseModel):
    checkpoint_id: str
    image_id: str
    mask_id: str | None = None
    mask_strokes: StrokePayload | None = None
    n: int = 1
    seed: int = 0


class JobManager:
    """In-memory job table mirrored to per-job manifest files."""

    def __init__(self, workdir):
        self.workdir = workdir
        self.lock = threading.Lock()
        self.jobs: dict[str, JobRecord] = {}
        self.train_lock = threading.Lock()
        self.sample_slots = threading.Semaphore(SAMPLE_QUEUE_DEPTH)
        self.stop_event = threading.Event()
        self.threads: list[threading.Thread] = []
        self._reindex()

    def _job_dir(self, job_id):
        return os.path.join(self.workdir, "jobs", job_id)

    def _reindex(self):
        jobs_dir = os.path.join(self.workdir, "jobs")
        if not os.path.isdir(jobs_dir):
            return
        for job_id in sorted(os.listdir(jobs_dir)):
            manifest = os.path.join(jobs_dir, job_id, "manifest.json")
            if not os.path.isfile(manifest):
                continue
            with open(manifest) as f:
                rec = JobRecord(**json.load(f))
            if rec.state in ("queued", "running"):
                rec.state = "failed"
                rec.message = "interrupted by server restart"
            self.jobs[rec.id] = rec

    def create(self, kind) -> JobRecord:
        rec = JobRecord(id=uuid.uuid4().hex[:12], kind=kind, created_at=time.time())
        with self.lock:
            self.jobs[rec.id] = rec
        os.makedirs(os.path.join(self._job_dir(rec.id), "artifacts"), exist_ok=True)
        self._persist(rec)
        return rec

    def update(self, job_id, **fields):
        with self.lock:
            rec = self.jobs[job_id]
            if "progress" in fields:
                fields["progress"] = max(rec.progress, float(fields["progress"]))
            if "state" in fields:
                new = fields["state"]
                order = {s: i for i, s in enumerate(_STATES)}
                if order[new] < order[rec.state]:
                    raise ValueError(f"illegal state transition {rec.state} -> {new}")
            for k, v in fields.items():
                setattr(rec, k, v)
            snapshot = rec.model_copy()
        self._persist(snapshot)
        return snapshot

    def _persist(self, rec: JobRecord):
        path = os.path.join(self._job_dir(rec.id), "manifest.json")
        tmp = path + ".tmp"
        with open(tmp, "w") as f:
            json.dump(rec.model_dump(), f, indent=1)
        os.replace(tmp, path)

    def get(self, job_id) -> JobRecord:
        with self.lock:
            rec = self.jobs.get(job_id)
        if rec is None:
            raise HTTPException(404, f"unknown job {job_id}")
        return rec.model_copy()

    def spawn(self, target):
        th = threading.Thread(target=target, daemon=True)
        self.threads.append(th)
        th.start()

    def shutdown(self):
        self.stop_event.set()
        for th in self.threads:
            th.join(timeout=60)


def default_workdir():
    return os.environ.get("INPAINT_FORGE_WORKDIR", os.path.join(os.getcwd(), "forge_workdir"))


def create_app(workdir=None, static_dir=None) -> FastAPI:
    workdir = workdir or default_workdir()
    for sub in ("images", "checkpoints", "jobs"):
        os.makedirs(os.path.join(workdir, sub), exist_ok=True)
    app = FastAPI(title="inpaint-forge")
    manager = JobManager(workdir)
    app.state.workdir = workdir
    app.state.manager = manager

    def image_path(image_id):
        p = os.path.join(workdir, "images", f"{image_id}.png")
        if not os.path.isfile(p):
            raise HTTPException(404, f"unknown image {image_id}")
        return p

    def checkpoint_path(ckpt_id):
        p = os.path.join(workdir, "checkpoints", f"{ckpt_id}.ckpt")
        if not os.path.isfile(p):
            raise HTTPException(404, f"unknown checkpoint {ckpt_id}")
        return p

    @app.post("/api/images")
    async def upload_image(file: UploadFile):
        data = await file.read()
        image_id = uuid.uuid4().hex[:12]
        path = os.path.join(workdir, "images", f"{image_id}.png")
        with open(path, "wb") as f:
            f.write(data)
        try:
            img = load_image(path)
        except Exception as e:
            os.remove(path)
            raise HTTPException(422, f"not a readable PNG: {e}")
        return {"id": image_id, "channels": img.channels, "height": img.height, "width": img.width}

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        return FileResponse(image_path(image_id), media_type="image/png")

    @app.get("/api/jobs")
    def list_jobs():
        with manager.lock:
            return [r.model_dump() for r in manager.jobs.values()]

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return manager.get(job_id).model_dump()

    @app.get("/api/jobs/{job_id}/events")
    def job_events(job_id: str):
        manager.get(job_id)

        def stream():
            last = None
            while True:
                rec = manager.get(job_id).model_dump()
                if rec != last:
                    yield f"data: {json.dumps(rec)}\n\n"
                    last = rec
                if rec["state"] in ("done", "failed"):
                    return
                time.sleep(0.2)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/jobs/{job_id}/artifacts/{name}")
    def get_artifact(job_id: str, name: str):
        manager.get(job_id)
        path = os.path.join(workdir, "jobs", job_id, "artifacts", os.path.basename(name))
        if not os.path.isfile(path):
            raise HTTPException(404, f"no artifact {name} for job {job_id}")
        return FileResponse(path)

    @app.get("/api/checkpoints")
    def list_checkpoints():
        out = []
        ckpt_dir = os.path.join(workdir, "checkpoints")
        for fn in sorted(os.listdir(ckpt_dir)):
            if not fn.endswith(".ckpt"):
                continue
            try:
                header = ckpt_mod.read_header(os.path.join(ckpt_dir, fn))
            except ckpt_mod.CheckpointError:
                continue
            mcfg = header["model"]
            params = header.get("meta", {}).get("parameters")
            if params is None:
                params = count_parameters(DenoiserModel(ModelConfig(
                    image_channels=mcfg["image_channels"], widths=tuple(mcfg["widths"]),
                    time_dim=mcfg["time_dim"], time_hidden=mcfg["time_hidden"])))
            out.append(
                {
                    "id": fn[: -len(".ckpt")],
                    "T": header["schedule"]["T"],
                    "channels": mcfg["image_channels"],
                    "parameters": params,
                    "meta": header.get("meta", {}),
                }
            )
        return out

    @app.post("/api/train")
    def start_train(req: TrainRequest):
        img = load_image(image_path(req.image_id))
        test_mask = None
        if req.test_mask_id:
            test_mask = load_mask(image_path(req.test_mask_id))
            if (test_mask.height, test_mask.width) != (img.height, img.width):
                raise HTTPException(422, "test mask size does not match image")
        allowed = {f.name for f in TrainConfig.__dataclass_fields__.values()}
        bad = set(req.config) - allowed
        if bad:
            raise HTTPException(422, f"unknown config fields: {sorted(bad)}")
        crop = req.config.get("crop", min(256, img.height, img.width))
        mode = req.config.get("mode", "dual_mask" if crop >= min(img.height, img.width) else "subregion")
        try:
            cfg = TrainConfig(**{**req.config, "crop": crop, "mode": mode})
        except TrainerError as e:
            raise HTTPException(422, str(e))
        if crop > min(img.height, img.width):
            raise HTTPException(422, f"crop {crop} exceeds image {img.height}x{img.width}")
        if not manager.train_lock.acquire(blocking=False):
            raise HTTPException(409, "a training job is already running")
        rec = manager.create("train")
        ckpt_id = uuid.uuid4().hex[:12]
        out_path = os.path.join(workdir, "checkpoints", f"{ckpt_id}.ckpt")

        def run():
            try:
                manager.update(rec.id, state="running", message="training")
                start = time.time()

                def sink(e):
                    manager.update(
                        rec.id,
                        progress=(e["iteration"] + 1) / e["iterations"],
                        message=f"iter {e['iteration']}: loss {e['loss']:.4f} (lr {e['lr']:g})",
                    )

                train(
                    [img], cfg, test_mask=test_mask, progress_sink=sink, out_path=out_path,
                    should_stop=manager.stop_event.is_set,
                )
                manager.update(
                    rec.id,
                    state="done",
                    progress=1.0,
                    message="training complete",
                    artifacts=[],
                    timings={"wall_s": time.time() - start},
                )
                manager.update(rec.id, message=f"checkpoint {ckpt_id}")
            except Exception as e:  # surfaced through the job record
                manager.update(rec.id, state="failed", message=str(e))
            finally:
                manager.train_lock.release()

        manager.spawn(run)
        return {"job_id": rec.id, "checkpoint_id": ckpt_id}

    @app.post("/api/sample")
    def start_sample(req: SampleJobRequest):
        ckpt_path = checkpoint_path(req.checkpoint_id)
        img = load_image(image_path(req.image_id))
        if req.mask_id:
            mask = load_mask(image_path(req.mask_id))
        elif req.mask_strokes is not None:
            p = req.mask_strokes
            mask = rasterize_strokes(p.strokes, p.height, p.width)
        else:
            raise HTTPException(422, "need mask_id or mask_strokes")
        if (mask.height, mask.width) != (img.height, img.width):
            raise HTTPException(422, "mask size does not match image")
        try:
            model, sched, _ = ckpt_mod.load_checkpoint(ckpt_path, expect_channels=img.channels)
        except ckpt_mod.CheckpointError as e:
            raise HTTPException(422, str(e))
        rec = manager.create("sample")
        y = apply_mask(img, mask)

        def run():
            with manager.sample_slots:
                try:
                    manager.update(rec.id, state="running", message="sampling")
                    start = time.time()
                    art_dir = os.path.join(workdir, "jobs", rec.id, "artifacts")
                    names = []
                    for i in range(req.n):
                        out = inpaint(model, sched, y, mask, seed=req.seed + i)
                        name = f"sample_{i:03d}.png"
                        save_image(out, os.path.join(art_dir, name))
                        names.append(name)
                        manager.update(rec.id, progress=(i + 1) / req.n, artifacts=list(names))
                    manifest = {
                        "seed": req.seed, "n": req.n, "T": sched.T,
                        "wall_s": time.time() - start,
                    }
                    with open(os.path.join(art_dir, "run.json"), "w") as f:
                        json.dump(manifest, f, indent=1)
                    manager.update(
                        rec.id, state="done", progress=1.0,
                        message="sampling complete",
                        artifacts=names + ["run.json"],
                        timings={"wall_s": manifest["wall_s"]},
                    )
                except Exception as e:
                    manager.update(rec.id, state="failed", message=str(e))

        manager.spawn(run)
        return {"job_id": rec.id}

    @app.on_event("shutdown")
    def _shutdown():
        manager.shutdown()

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="studio")

    return app


def serve(port=8765, workdir=None, static_dir=None):
    """Run the service with uvicorn (blocking)."""
    import uvicorn

    app = create_app(workdir=workdir, static_dir=static_dir)
    uvicorn.run(app, host="127.0.0.1", port=port)
