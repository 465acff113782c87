"""Conditional reverse-diffusion sampling for inpainting.

Starts from pure noise and walks the reverse chain, conditioning the denoiser
on the masked observation and mask at every step. Known pixels are composited
back at the end (the model is already conditioned on them throughout), so the
output agrees with the input bit-for-bit outside the hole.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .image_data import ImageTensor, Mask, assert_same_shape
from .schedule import NoiseSchedule, posterior_coefficients


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class SampleRequest:
    checkpoint: str
    image: str
    mask: str
    num_samples: int = 1
    seed: int = 0
    composite: bool = True
    clamp: bool = True

    def __post_init__(self):
        if self.num_samples < 1:
            raise SamplerError("num_samples must be >= 1")


def _pad_to_multiple(x, mult):
    """Reflect-pad the last two dims up to the next multiple of mult."""
    h, w = x.shape[-2:]
    ph = (-h) % mult
    pw = (-w) % mult
    if ph == 0 and pw == 0:
        return x, (0, 0)
    return F.pad(x, (0, pw, 0, ph), mode="reflect"), (ph, pw)


def inpaint(
    model,
    sched: NoiseSchedule,
    y: ImageTensor,
    m: Mask,
    seed: int = 0,
    clamp: bool = True,
    composite: bool = True,
    replace_each_step: bool = False,
    device: str = "cpu",
    progress=None,
) -> ImageTensor:
    """One sample: x_T ~ N(0, I), T reverse steps, then composite known pixels.

    `model` is any callable (x_t, y, mask, t) -> predicted clean image;
    normally a DenoiserModel. Deterministic for a fixed seed.
    """
    assert_same_shape(y, m)
    if hasattr(model, "config") and model.config.image_channels != y.channels:
        raise SamplerError(
            f"model expects {model.config.image_channels} channels, image has {y.channels}"
        )
    mult = model.config.size_multiple if hasattr(model, "config") else 8
    dtype = torch.float32
    y_t = torch.as_tensor(y.data.copy(), dtype=dtype, device=device)[None]
    m_t = torch.as_tensor(m.data.copy(), dtype=dtype, device=device)[None, None]
    y_pad, (ph, pw) = _pad_to_multiple(y_t, mult)
    m_pad, _ = _pad_to_multiple(m_t, mult)

    gen = torch.Generator(device=device).manual_seed(seed)
    x = torch.randn(y_pad.shape, generator=gen, device=device, dtype=dtype)
    with torch.no_grad():
        for t in range(sched.T, 0, -1):
            x0_hat = model(x, y_pad, m_pad, t)
            if clamp:
                x0_hat = x0_hat.clamp(-1.0, 1.0)
            if not torch.isfinite(x0_hat).all():
                raise SamplerError(f"non-finite prediction at step t={t}")
            noise = torch.randn(x.shape, generator=gen, device=device, dtype=dtype)
            c_x0, c_xt, sigma = posterior_coefficients(sched, t)
            x = c_x0 * x0_hat + c_xt * x + sigma * noise
            if replace_each_step and t > 1:
                # ablation: force known pixels onto the diffusion trajectory
                ab = float(sched.alpha_bar[t - 1])
                known = np.sqrt(ab) * y_pad + np.sqrt(1.0 - ab) * torch.randn(
                    x.shape, generator=gen, device=device, dtype=dtype
                )
                x = x * m_pad + known * (1.0 - m_pad)
            if not torch.isfinite(x).all():
                raise SamplerError(f"non-finite state after step t={t}")

    h, w = y.height, y.width
    out = x[0, :, :h, :w].cpu().numpy().astype(np.float32)
    if composite:
        hole = m.data[None, :, :]
        out = y.data * (1.0 - hole) + out * hole
    return ImageTensor(out)


def inpaint_batch(
    model,
    sched: NoiseSchedule,
    y: ImageTensor,
    m: Mask,
    num_samples: int,
    seed: int = 0,
    clamp: bool = True,
    composite: bool = True,
    device: str = "cpu",
    progress_sink=None,
):
    """num_samples independent draws with seeds seed, seed+1, ..."""
    out = []
    for i in range(num_samples):
        img = inpaint(
            model, sched, y, m, seed=seed + i, clamp=clamp, composite=composite, device=device
        )
        out.append(img)
        if progress_sink is not None:
            progress_sink({"sample": i + 1, "num_samples": num_samples})
    return out


def inpaint_svbrdf(model, sched, maps, m: Mask, seed: int = 0, device: str = "cpu", **kw):
    """Joint inpainting of the 10-channel map stack under one shared mask."""
    from .image_data import MapStack, apply_mask, stack_maps, unstack_maps

    assert isinstance(maps, MapStack)
    stacked = stack_maps(maps)
    y = apply_mask(stacked, m)
    result = inpaint(model, sched, y, m, seed=seed, device=device, **kw)
    return unstack_maps(result)
