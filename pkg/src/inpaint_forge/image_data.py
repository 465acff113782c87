"""Pixel data model: images, binary masks, crops, and SVBRDF map stacks.

Conventions used project-wide:
- images are float32 arrays of shape (C, H, W) with values in [-1, 1]
- masks are float32 arrays of shape (H, W) with values in {0, 1}, 1 = hole
- SVBRDF stacking order is fixed: diffuse(3), normals(3), roughness(1),
  specular(3) -> 10 channels
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from PIL import Image

SVBRDF_MAP_NAMES = ("diffuse", "normals", "roughness", "specular")
SVBRDF_MAP_CHANNELS = {"diffuse": 3, "normals": 3, "roughness": 1, "specular": 3}
SVBRDF_CHANNELS = 10

MAX_CHANNELS = 16


class ImageDataError(ValueError):
    pass


@dataclass(frozen=True)
class ImageTensor:
    """Multi-channel image, float32 (C, H, W), nominal value range [-1, 1]."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3:
            raise ImageDataError(f"expected (C, H, W) array, got shape {d.shape}")
        if not (1 <= d.shape[0] <= MAX_CHANNELS):
            raise ImageDataError(f"channel count {d.shape[0]} outside [1, {MAX_CHANNELS}]")
        if not np.all(np.isfinite(d)):
            raise ImageDataError("image contains non-finite values")
        if d.dtype != np.float32:
            object.__setattr__(self, "data", d.astype(np.float32))
        self.data.setflags(write=False)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class Mask:
    """Binary hole mask, float32 (H, W); 1 = hole (unknown), 0 = known."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 2:
            raise ImageDataError(f"expected (H, W) array, got shape {d.shape}")
        if d.dtype != np.float32:
            d = d.astype(np.float32)
            object.__setattr__(self, "data", d)
        if not np.all((d == 0.0) | (d == 1.0)):
            raise ImageDataError("mask values must be exactly 0 or 1")
        self.data.setflags(write=False)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def hole_fraction(self):
        return float(self.data.mean())


@dataclass(frozen=True)
class MapStack:
    """The four SVBRDF maps of one material, each an ImageTensor."""

    diffuse: ImageTensor
    normals: ImageTensor
    roughness: ImageTensor
    specular: ImageTensor

    def __post_init__(self):
        shapes = set()
        for name in SVBRDF_MAP_NAMES:
            m = getattr(self, name)
            if m.channels != SVBRDF_MAP_CHANNELS[name]:
                raise ImageDataError(
                    f"{name} map must have {SVBRDF_MAP_CHANNELS[name]} channels, got {m.channels}"
                )
            shapes.add((m.height, m.width))
        if len(shapes) > 1:
            raise ImageDataError(f"SVBRDF maps disagree on size: {sorted(shapes)}")


def assert_same_shape(a, b):
    """Raise if two images/masks disagree on spatial size."""
    ah, aw = a.data.shape[-2:]
    bh, bw = b.data.shape[-2:]
    if (ah, aw) != (bh, bw):
        raise ImageDataError(f"spatial shape mismatch: {(ah, aw)} vs {(bh, bw)}")


def _png_array(path):
    """Read a PNG as (H, W, C) float64 in [0, maxval], plus maxval."""
    img = Image.open(path)
    if img.mode in ("1", "P"):
        img = img.convert("L")
    if img.mode in ("RGBA", "LA"):
        warnings.warn(f"{path}: alpha channel dropped")
        img = img.convert(img.mode[:-1])
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        maxval = 255.0
    elif arr.dtype in (np.uint16, np.int32):  # PIL mode I;16 loads as int32 sometimes
        maxval = 65535.0
    else:
        raise ImageDataError(f"{path}: unsupported sample type {arr.dtype}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float64), maxval


def load_image(path) -> ImageTensor:
    """Load a PNG (8- or 16-bit) into [-1, 1]. Alpha is dropped with a warning."""
    arr, maxval = _png_array(path)
    data = (2.0 * arr / maxval - 1.0).transpose(2, 0, 1)
    return ImageTensor(data.astype(np.float32))


def save_image(img: ImageTensor, path, bitdepth: int = 8):
    """Write an ImageTensor as PNG, mapping [-1, 1] back to integer levels."""
    if bitdepth == 8:
        maxval, dtype = 255, np.uint8
    elif bitdepth == 16:
        maxval, dtype = 65535, np.uint16
    else:
        raise ImageDataError(f"unsupported bit depth {bitdepth}")
    arr = (img.data.astype(np.float64) + 1.0) / 2.0 * maxval
    arr = np.clip(np.rint(arr), 0, maxval).astype(dtype)
    arr = arr.transpose(1, 2, 0)
    if arr.shape[2] == 1:
        pil = Image.fromarray(arr[:, :, 0])
    elif arr.shape[2] == 3:
        if dtype == np.uint16:
            raise ImageDataError("16-bit RGB PNG output not supported by the PNG writer")
        pil = Image.fromarray(arr)
    else:
        raise ImageDataError(f"cannot write {arr.shape[2]}-channel PNG")
    pil.save(path)


def load_mask(path, threshold: float = 0.5) -> Mask:
    """Load a PNG as a binary mask: luminance > threshold*maxval -> hole (1)."""
    arr, maxval = _png_array(path)
    lum = arr.mean(axis=2)
    return Mask((lum > threshold * maxval).astype(np.float32))


def save_mask(m: Mask, path):
    Image.fromarray((m.data * 255).astype(np.uint8)).save(path)


def crop(img: ImageTensor, x: int, y: int, size: int) -> ImageTensor:
    """Extract a size x size sub-image with top-left corner at column x, row y."""
    if x < 0 or y < 0 or y + size > img.height or x + size > img.width:
        raise ImageDataError(
            f"crop ({x}, {y}, {size}) outside image {img.height}x{img.width}"
        )
    return ImageTensor(img.data[:, y : y + size, x : x + size].copy())


def crop_mask(m: Mask, x: int, y: int, size: int) -> Mask:
    if x < 0 or y < 0 or y + size > m.height or x + size > m.width:
        raise ImageDataError(f"crop ({x}, {y}, {size}) outside mask {m.height}x{m.width}")
    return Mask(m.data[y : y + size, x : x + size].copy())


def apply_mask(x0: ImageTensor, m: Mask) -> ImageTensor:
    """Masked observation y = x0 * (1 - m): zeros in the hole, x0 elsewhere."""
    assert_same_shape(x0, m)
    return ImageTensor(x0.data * (1.0 - m.data)[None, :, :])


def stack_maps(maps: MapStack) -> ImageTensor:
    """Concatenate the four maps into one 10-channel tensor (fixed order)."""
    parts = [getattr(maps, name).data for name in SVBRDF_MAP_NAMES]
    return ImageTensor(np.concatenate(parts, axis=0))


def unstack_maps(t: ImageTensor) -> MapStack:
    """Split a 10-channel tensor back into the four named maps."""
    if t.channels != SVBRDF_CHANNELS:
        raise ImageDataError(f"expected {SVBRDF_CHANNELS} channels, got {t.channels}")
    out = {}
    c = 0
    for name in SVBRDF_MAP_NAMES:
        n = SVBRDF_MAP_CHANNELS[name]
        out[name] = ImageTensor(t.data[c : c + n].copy())
        c += n
    stack = MapStack(**out)
    _check_normals(stack.normals)
    return stack


def _check_normals(normals: ImageTensor, tol: float = 0.05):
    # decoded normals ((v+1)/2 remapped to [-1,1] vectors) should be near unit norm
    vec = normals.data.astype(np.float64)
    norms = np.sqrt((vec**2).sum(axis=0))
    dev = float(np.abs(norms - 1.0).mean())
    if dev > tol:
        warnings.warn(f"normal map deviates from unit norm (mean |n|-1 = {dev:.3f})")


def load_map_stack(directory) -> MapStack:
    """Load `<dir>/{diffuse,normals,roughness,specular}.png` as a MapStack."""
    import os

    maps = {}
    for name in SVBRDF_MAP_NAMES:
        img = load_image(os.path.join(directory, f"{name}.png"))
        want = SVBRDF_MAP_CHANNELS[name]
        if img.channels != want:
            if name == "roughness" and img.channels == 3:
                img = ImageTensor(img.data.mean(axis=0, keepdims=True))
            else:
                raise ImageDataError(
                    f"{name}.png: expected {want} channels, got {img.channels}"
                )
        maps[name] = img
    return MapStack(**maps)


def save_map_stack(maps: MapStack, directory):
    import os

    os.makedirs(directory, exist_ok=True)
    for name in SVBRDF_MAP_NAMES:
        save_image(getattr(maps, name), os.path.join(directory, f"{name}.png"))
