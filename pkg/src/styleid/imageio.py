"""PNG reading/writing and ingestion resizing."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def as_image(x, shape=None) -> np.ndarray:
    img = np.asarray(x, dtype=np.float64)
    if img.ndim != 3:
        raise InvalidArgumentError(f"image must be H x W x C, got shape {img.shape}")
    if shape is not None and img.shape != tuple(shape):
        raise InvalidArgumentError(f"image shape {img.shape} does not match {tuple(shape)}")
    if not np.all(np.isfinite(img)):
        raise InvalidArgumentError("image contains non-finite values")
    return img


def to_uint8(img) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, img) -> None:
    arr = to_uint8(img)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    PILImage.fromarray(arr).save(path, format="PNG")


def load_image(path, size: tuple[int, int] | None = None, channels: int = 3) -> np.ndarray:
    """Read an image into ``[0, 1]`` floats.

    With ``size=(H, W)`` the image is center-cropped to the target aspect and
    resized bilinearly; both adjustments are logged.
    """
    path = Path(path)
    with PILImage.open(path) as im:
        im = im.convert("L" if channels == 1 else "RGB")
        if size is not None:
            im = _fit(im, size, path)
        arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _fit(im, size, path):
    H, W = size
    w, h = im.size
    if w * H != h * W:
        # crop to the target aspect ratio around the center
        if w * H > h * W:
            new_w = h * W // H
            left = (w - new_w) // 2
            box = (left, 0, left + new_w, h)
        else:
            new_h = w * H // W
            top = (h - new_h) // 2
            box = (0, top, w, top + new_h)
        log.info("center-cropping %s from %dx%d to %dx%d", path, w, h, box[2] - box[0], box[3] - box[1])
        im = im.crop(box)
    if im.size != (W, H):
        log.info("resizing %s from %dx%d to %dx%d (bilinear)", path, *im.size, W, H)
        im = im.resize((W, H), PILImage.BILINEAR)
    return im


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
