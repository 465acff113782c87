"""Versioned checkpoint format with named tensors and an integrity checksum.

Layout (all integers little-endian):

    bytes 0..7    magic b"IFCKPT\\x00\\x01" (last byte = format version)
    bytes 8..15   u64 header length N
    bytes 16..    N bytes of UTF-8 JSON header
    remainder     tensor payload, raw little-endian values

Header fields: format_version, schedule {T, beta_start, beta_end},
model {image_channels, widths, time_dim, time_hidden}, meta (free-form
training metadata), tensors [{name, dtype, shape, offset, nbytes}] and
payload_sha256. Tensors are stored in state-dict order; `offset` indexes into
the payload. Loading re-verifies the SHA-256 of the payload, so a flipped
byte surfaces as a checksum error instead of silent weight corruption.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
import torch

from .model import DenoiserModel, ModelConfig
from .schedule import NoiseSchedule, build_schedule

MAGIC = b"IFCKPT\x00\x01"
FORMAT_VERSION = 1

_DTYPES = {"float32": np.float32, "float64": np.float64, "int64": np.int64}


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(model: DenoiserModel, sched: NoiseSchedule, meta: dict, path):
    """Write model weights + schedule params + free-form metadata to `path`."""
    state = model.state_dict()
    entries = []
    chunks = []
    offset = 0
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy()
        dtype = str(arr.dtype)
        if dtype not in _DTYPES:
            raise CheckpointError(f"unsupported tensor dtype {dtype} for {name}")
        raw = np.ascontiguousarray(arr).astype(arr.dtype, copy=False).tobytes()
        entries.append(
            {
                "name": name,
                "dtype": dtype,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    cfg = model.config
    header = {
        "format_version": FORMAT_VERSION,
        "schedule": {
            "T": sched.T,
            "beta_start": sched.beta_start,
            "beta_end": sched.beta_end,
        },
        "model": {
            "image_channels": cfg.image_channels,
            "widths": list(cfg.widths),
            "time_dim": cfg.time_dim,
            "time_hidden": cfg.time_hidden,
        },
        "meta": meta,
        "tensors": entries,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)


def read_header(path) -> dict:
    """Parse and validate the header without loading tensor data."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if len(magic) < 8 or magic[:6] != MAGIC[:6]:
            raise CheckpointError(f"{path}: not a checkpoint file")
        if magic != MAGIC:
            raise CheckpointError(
                f"{path}: unsupported checkpoint format version {magic[7]}"
            )
        (hlen,) = struct.unpack("<Q", f.read(8))
        header_bytes = f.read(hlen)
        if len(header_bytes) != hlen:
            raise CheckpointError(f"{path}: truncated header")
    return json.loads(header_bytes.decode("utf-8"))


def load_checkpoint(path, expect_channels: int | None = None):
    """Load (model, schedule, meta); verifies payload checksum.

    expect_channels, when given, turns a channel-count mismatch into an
    explicit error before any weights are touched.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 16 or blob[:6] != MAGIC[:6]:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: unsupported checkpoint format version {blob[7]}")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + hlen].decode("utf-8"))
    payload = blob[16 + hlen :]
    total = sum(e["nbytes"] for e in header["tensors"])
    if len(payload) != total:
        raise CheckpointError(f"{path}: truncated payload ({len(payload)} of {total} bytes)")
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointError(f"{path}: payload checksum mismatch")

    mcfg = header["model"]
    if expect_channels is not None and mcfg["image_channels"] != expect_channels:
        raise CheckpointError(
            f"{path}: checkpoint has {mcfg['image_channels']} image channels, "
            f"job needs {expect_channels}"
        )
    config = ModelConfig(
        image_channels=mcfg["image_channels"],
        widths=tuple(mcfg["widths"]),
        time_dim=mcfg["time_dim"],
        time_hidden=mcfg["time_hidden"],
    )
    model = DenoiserModel(config)
    state = {}
    for e in header["tensors"]:
        arr = np.frombuffer(
            payload, dtype=_DTYPES[e["dtype"]], count=e["nbytes"] // np.dtype(e["dtype"]).itemsize,
            offset=e["offset"],
        ).reshape(e["shape"])
        state[e["name"]] = torch.from_numpy(arr.copy())
    model.load_state_dict(state)
    model.eval()
    s = header["schedule"]
    sched = build_schedule(s["T"], s["beta_start"], s["beta_end"])
    return model, sched, header.get("meta", {})
