"""Raster helpers: resizing, downsampling for the encoder, PNG round trips."""
from __future__ import annotations

import io

import numpy as np
from PIL import Image


def resize(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    if pixels.shape[1] == width and pixels.shape[0] == height:
        return pixels
    im = Image.fromarray(np.ascontiguousarray(pixels))
    return np.asarray(im.resize((width, height), Image.BILINEAR))


def fit_within(pixels: np.ndarray, side: int) -> np.ndarray:
    """Downsample so the longest side is at most ``side``, keeping aspect."""
    h, w = pixels.shape[:2]
    longest = max(w, h)
    if longest <= side:
        return pixels
    scale = side / longest
    nw = max(1, min(side, int(w * scale)))
    nh = max(1, min(side, int(h * scale)))
    return resize(pixels, nw, nh)


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels)).save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"))


def crop(pixels: np.ndarray, x: int, y: int, w: int, h: int) -> np.ndarray:
    return pixels[y:y + h, x:x + w]
