"""Lightweight single-image diffusion inpainting.

Train a small conditional denoiser on one image (or a handful), then sample
diverse completions of a user-provided hole. Also handles joint inpainting of
multi-channel SVBRDF material maps.
"""

__version__ = "0.1.0"
