"""Single-image training loop.

Every iteration draws fresh crops, synthetic masks, uniform timesteps and
Gaussian noise, then takes one optimizer step on the masked clean-image
prediction loss. Two data tactics:

- subregion: crops are drawn uniformly among positions that do not touch the
  test mask (the model never sees pixels it will be asked to invent);
- dual_mask: for images too small to crop around the test mask, inputs are
  masked by the union of training and test masks, and test-mask pixels carry
  zero loss weight.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
import torch

from .checkpoint import save_checkpoint
from .image_data import ImageTensor, Mask
from .mask_gen import BrushConfig, generate_training_mask
from .model import DenoiserModel, ModelConfig, count_parameters
from .schedule import NoiseSchedule, build_schedule

class TrainerError(RuntimeError):
    pass


class TrainingDiverged(TrainerError):
    def __init__(self, iteration, lr, loss_tail):
        self.iteration = iteration
        self.lr = lr
        self.loss_tail = loss_tail
        super().__init__(
            f"non-finite loss at iteration {iteration} (lr={lr:g}); "
            f"recent losses: {loss_tail}"
        )


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 15000
    lr_initial: float = 1e-4
    lr_after: float = 1e-5
    lr_drop_at: int = 10000
    crop: int = 256
    batch: int = 8
    seed: int = 0
    mode: str = "subregion"  # or "dual_mask"
    T: int = 1000
    rect_mask_prob: float = 0.2
    loss_reduction: str = "mean"  # or "sum", the un-normalized objective
    device: str = "cpu"
    brush: BrushConfig | None = None

    def __post_init__(self):
        if self.lr_drop_at >= self.iterations and self.iterations > 0:
            object.__setattr__(self, "lr_drop_at", self.iterations)
        if self.mode not in ("subregion", "dual_mask"):
            raise TrainerError(f"unknown mode {self.mode!r}")
        if self.loss_reduction not in ("mean", "sum"):
            raise TrainerError(f"unknown loss_reduction {self.loss_reduction!r}")


def learning_rate(cfg: TrainConfig, iteration: int) -> float:
    return cfg.lr_initial if iteration < cfg.lr_drop_at else cfg.lr_after


@dataclass
class TrainBatch:
    x0: np.ndarray  # (B, C, H, W)
    mask: np.ndarray  # (B, H, W), masks the network input
    loss_weight: np.ndarray  # (B, H, W), zero on test-mask pixels
    t: np.ndarray  # (B,) int64, uniform on [1, T]
    eps: np.ndarray  # (B, C, H, W), standard normal


def _crop_positions(src_h, src_w, crop):
    if crop > src_h or crop > src_w:
        raise TrainerError(f"crop {crop} exceeds source {src_h}x{src_w}")
    return src_h - crop, src_w - crop


def _clean_positions(tm, crop):
    """(ys, xs) of all crop origins whose window misses the test mask entirely."""
    h, w = tm.shape
    ii = np.zeros((h + 1, w + 1))
    ii[1:, 1:] = tm.cumsum(0).cumsum(1)
    ry, rx = h - crop, w - crop
    sums = (
        ii[crop : crop + ry + 1, crop : crop + rx + 1]
        - ii[crop : crop + ry + 1, : rx + 1]
        - ii[: ry + 1, crop : crop + rx + 1]
        + ii[: ry + 1, : rx + 1]
    )
    return np.nonzero(sums == 0)


def _sample_crop(img, test_mask, cfg, rng, clean_pos=None):
    """One crop + its test-mask restriction. Returns (x0, test_crop)."""
    c, h, w = img.shape
    ry, rx = _crop_positions(h, w, cfg.crop)
    tm = test_mask.data if test_mask is not None else None
    if cfg.mode == "subregion" and tm is not None and clean_pos is not None:
        ys, xs = clean_pos
        if len(ys) > 0:
            k = int(rng.integers(0, len(ys)))
            y, x = int(ys[k]), int(xs[k])
            return img[:, y : y + cfg.crop, x : x + cfg.crop], None
        # no crop avoids the test mask; fall back to the dual-mask tactic
    y = int(rng.integers(0, ry + 1))
    x = int(rng.integers(0, rx + 1))
    test_crop = tm[y : y + cfg.crop, x : x + cfg.crop] if tm is not None else None
    return img[:, y : y + cfg.crop, x : x + cfg.crop], test_crop


def sample_batch(sources, cfg: TrainConfig, rng, test_mask: Mask | None = None) -> TrainBatch:
    """Draw one training batch of crops, masks, timesteps and noise."""
    arrays = [s.data if isinstance(s, ImageTensor) else s for s in sources]
    brush = cfg.brush or BrushConfig(target_size=cfg.crop)
    if brush.target_size != cfg.crop:
        brush = replace(brush, target_size=cfg.crop)
    clean_pos = None
    if cfg.mode == "subregion" and test_mask is not None and len(arrays) == 1:
        clean_pos = _clean_positions(test_mask.data, cfg.crop)
    x0s, masks, weights = [], [], []
    for _ in range(cfg.batch):
        img = arrays[int(rng.integers(0, len(arrays)))]
        x0, test_crop = _sample_crop(img, test_mask, cfg, rng, clean_pos=clean_pos)
        train_mask = generate_training_mask(
            brush, int(rng.integers(0, 2**63 - 1)), rect_prob=cfg.rect_mask_prob
        ).data
        if test_crop is not None:
            input_mask = np.maximum(train_mask, test_crop)
            weight = train_mask * (1.0 - test_crop)
            # the test hole is truly unknown: keep its x0 values out of the
            # forward diffusion so they can never influence a gradient
            x0 = x0 * (1.0 - test_crop)[None]
        else:
            input_mask = train_mask
            weight = train_mask
        x0s.append(x0)
        masks.append(input_mask)
        weights.append(weight)
    x0 = np.stack(x0s).astype(np.float32)
    t = rng.integers(1, cfg.T + 1, size=cfg.batch).astype(np.int64)
    eps = rng.standard_normal(x0.shape).astype(np.float32)
    return TrainBatch(
        x0=x0,
        mask=np.stack(masks).astype(np.float32),
        loss_weight=np.stack(weights).astype(np.float32),
        t=t,
        eps=eps,
    )


def batch_loss(model, batch: TrainBatch, sched: NoiseSchedule, reduction="mean", device="cpu"):
    """Masked squared error between x0 and the model's prediction.

    y = x0 * (1 - mask); x_t from the closed-form forward kernel at each
    sample's timestep; error weighted by loss_weight (zero on test pixels).
    """
    dtype = next(model.parameters()).dtype
    x0 = torch.as_tensor(batch.x0, device=device, dtype=dtype)
    mask = torch.as_tensor(batch.mask, device=device, dtype=dtype)
    weight = torch.as_tensor(batch.loss_weight, device=device, dtype=dtype)
    eps = torch.as_tensor(batch.eps, device=device, dtype=dtype)
    t = torch.as_tensor(batch.t, device=device)

    # pixels masked from the input but carrying no loss are test-hole pixels;
    # their x0 values are unknown at deploy time and must never reach the model
    test_region = mask * (weight == 0)
    x0_in = x0 * (1.0 - test_region)[:, None, :, :]

    ab = torch.as_tensor(sched.alpha_bar.copy(), device=device, dtype=dtype)[t]
    x_t = torch.sqrt(ab)[:, None, None, None] * x0_in + torch.sqrt(1 - ab)[:, None, None, None] * eps
    y = x0_in * (1.0 - mask)[:, None, :, :]
    pred = model(x_t, y, mask, t)
    sq = ((x0 - pred) ** 2 * weight[:, None, :, :]).sum(dim=(1, 2, 3))
    if reduction == "sum":
        return sq.mean()
    denom = weight.sum(dim=(1, 2)) * x0.shape[1]
    per_sample = torch.where(denom > 0, sq / denom.clamp(min=1.0), torch.zeros_like(sq))
    return per_sample.mean()


def train(
    sources,
    cfg: TrainConfig,
    test_mask: Mask | None = None,
    progress_sink=None,
    out_path=None,
    model: DenoiserModel | None = None,
    should_stop=None,
):
    """Run the full loop; returns (model, schedule, history of losses).

    progress_sink, if given, is called with a dict per logged iteration.
    Writes a checkpoint to out_path when provided. should_stop is polled each
    iteration; when it returns True the loop exits early but still checkpoints.
    """
    if not sources:
        raise TrainerError("no source images")
    channels = sources[0].channels if isinstance(sources[0], ImageTensor) else sources[0].shape[0]
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    sched = build_schedule(cfg.T)
    if model is None:
        model = DenoiserModel(ModelConfig(image_channels=channels))
    model.to(cfg.device).train()
    optim = torch.optim.Adam(model.parameters(), lr=cfg.lr_initial)

    losses = []
    ema = None
    start = time.time()
    stopped_early = False
    for it in range(cfg.iterations):
        if should_stop is not None and should_stop():
            stopped_early = True
            break
        lr = learning_rate(cfg, it)
        for group in optim.param_groups:
            group["lr"] = lr
        batch = sample_batch(sources, cfg, rng, test_mask=test_mask)
        optim.zero_grad()
        loss = batch_loss(model, batch, sched, reduction=cfg.loss_reduction, device=cfg.device)
        value = float(loss.detach())
        if not np.isfinite(value):
            raise TrainingDiverged(it, lr, [f"{v:.6g}" for v in losses[-10:]])
        loss.backward()
        optim.step()
        losses.append(value)
        ema = value if ema is None else 0.99 * ema + 0.01 * value
        if progress_sink is not None and (it % 50 == 0 or it == cfg.iterations - 1):
            progress_sink(
                {
                    "iteration": it,
                    "iterations": cfg.iterations,
                    "loss": value,
                    "loss_ema": ema,
                    "lr": lr,
                    "elapsed_s": time.time() - start,
                }
            )
    model.eval()
    if out_path is not None:
        meta = {
            "iterations": cfg.iterations,
            "completed_iterations": len(losses),
            "stopped_early": stopped_early,
            "parameters": count_parameters(model),
            "seed": cfg.seed,
            "mode": cfg.mode,
            "crop": cfg.crop,
            "batch": cfg.batch,
            "final_loss_ema": ema,
            "wall_time_s": time.time() - start,
        }
        save_checkpoint(model, sched, meta, out_path)
    return model, sched, losses
