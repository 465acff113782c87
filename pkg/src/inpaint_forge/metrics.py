"""Evaluation metrics: PSNR, SSIM, MSE, binary cross-entropy, plus a harness
that scores (prediction, ground-truth, mask) triples into a report.

All metrics interpret pixel values in [0, 1]; inputs in the project's [-1, 1]
convention are remapped internally. An optional region mask restricts PSNR,
MSE and BCE to hole pixels.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .image_data import ImageTensor, Mask, assert_same_shape

PSNR_INF = float("inf")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class MetricsError(ValueError):
    pass


def _unit(img: ImageTensor) -> np.ndarray:
    return (img.data.astype(np.float64) + 1.0) / 2.0


def _region_weights(img: ImageTensor, region: Mask | None) -> np.ndarray:
    if region is None:
        return np.ones(img.data.shape[1:], dtype=np.float64)
    assert_same_shape(img, region)
    w = region.data.astype(np.float64)
    if w.sum() == 0:
        raise MetricsError("empty evaluation region")
    return w


def mse(a: ImageTensor, b: ImageTensor, region: Mask | None = None) -> float:
    """Mean squared error in [0, 1] pixel space, optionally over a region."""
    assert_same_shape(a, b)
    w = _region_weights(a, region)
    diff2 = (_unit(a) - _unit(b)) ** 2
    return float((diff2 * w[None]).sum() / (w.sum() * a.channels))


def psnr(a: ImageTensor, b: ImageTensor, region: Mask | None = None) -> float:
    """10 log10(1 / MSE) in dB; +inf when the images agree exactly."""
    err = mse(a, b, region)
    if err == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(1.0 / err)


def bce(pred: ImageTensor, target: ImageTensor, region: Mask | None = None) -> float:
    """Binary cross-entropy of pred against target, both mapped to [0, 1].

    Predictions are clamped to [eps, 1-eps]; suited to binary modalities such
    as line drawings. Not symmetric in its arguments.
    """
    assert_same_shape(pred, target)
    w = _region_weights(pred, region)
    eps = 1e-7
    p = np.clip(_unit(pred), eps, 1.0 - eps)
    t = _unit(target)
    ce = -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))
    return float((ce * w[None]).sum() / (w.sum() * pred.channels))


def _gaussian_kernel(size, sigma):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(r**2) / (2.0 * sigma**2))
    k /= k.sum()
    return np.outer(k, k)


def ssim(a: ImageTensor, b: ImageTensor) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), dynamic range 1.

    Multi-channel images are converted to grayscale by channel mean. The mean
    is taken over valid window positions only.
    """
    assert_same_shape(a, b)
    x = _unit(a).mean(axis=0)
    y = _unit(b).mean(axis=0)
    if min(x.shape) < SSIM_WINDOW:
        raise MetricsError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    k = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = convolve2d(x, k, mode="valid")
    mu_y = convolve2d(y, k, mode="valid")
    xx = convolve2d(x * x, k, mode="valid") - mu_x**2
    yy = convolve2d(y * y, k, mode="valid") - mu_y**2
    xy = convolve2d(x * y, k, mode="valid") - mu_x * mu_y
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float((num / den).mean())


@dataclass
class EvalRow:
    name: str
    psnr: float
    ssim: float
    mse: float
    bce: float
    psnr_hole: float
    mse_hole: float
    bce_hole: float
    hole_fraction: float
    lpips: float | None = None  # reserved for externally computed values


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    METRICS = ("psnr", "ssim", "mse", "bce", "psnr_hole", "mse_hole", "bce_hole")

    def aggregates(self):
        out = {}
        for name in self.METRICS:
            vals = np.array([getattr(r, name) for r in self.rows], dtype=np.float64)
            finite = vals[np.isfinite(vals)]
            out[name] = {
                "mean": float(finite.mean()) if finite.size else float("nan"),
                "std": float(finite.std()) if finite.size else float("nan"),
            }
        return out

    def write_csv(self, path):
        fields = [
            "name", "psnr", "ssim", "mse", "bce",
            "psnr_hole", "mse_hole", "bce_hole", "hole_fraction", "lpips",
        ]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(fields)
            for r in self.rows:
                w.writerow([getattr(r, k) if getattr(r, k) is not None else "" for k in fields])


def evaluate_pair(name, pred: ImageTensor, gt: ImageTensor, hole: Mask | None) -> EvalRow:
    """Score one prediction against ground truth, full-image and hole-only."""
    row = EvalRow(
        name=name,
        psnr=psnr(pred, gt),
        ssim=ssim(pred, gt),
        mse=mse(pred, gt),
        bce=bce(pred, gt),
        psnr_hole=psnr(pred, gt, hole) if hole is not None else float("nan"),
        mse_hole=mse(pred, gt, hole) if hole is not None else float("nan"),
        bce_hole=bce(pred, gt, hole) if hole is not None else float("nan"),
        hole_fraction=hole.hole_fraction if hole is not None else 0.0,
    )
    return row


def evaluate_many(triples) -> EvalReport:
    """triples: iterable of (name, pred, gt, hole-or-None)."""
    report = EvalReport()
    for name, pred, gt, hole in triples:
        report.rows.append(evaluate_pair(name, pred, gt, hole))
    return report
