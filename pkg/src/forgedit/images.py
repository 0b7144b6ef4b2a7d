"""Image values and their lossless PNG persistence.

In-memory images are float32 arrays of shape (H, W, 3) in model space
[-1, 1]. On disk they are 8-bit RGB PNGs; the conversion is
``value / 127.5 - 1`` and its inverse, with clamping, so a PNG round trip
is bit-exact for any image that originated from 8-bit data.
"""
from __future__ import annotations

import hashlib
import io

import numpy as np
from PIL import Image

from .errors import ContractError

ImageTensor = np.ndarray


def validate_image(image: np.ndarray) -> np.ndarray:
    if not isinstance(image, np.ndarray) or image.ndim != 3 or image.shape[2] != 3:
        raise ContractError(f"image must be an (H, W, 3) array, got {getattr(image, 'shape', None)}")
    h, w = image.shape[:2]
    if h < 8 or w < 8 or h % 4 != 0 or w % 4 != 0:
        raise ContractError(f"image sides must be >= 8 and divisible by 4, got {h}x{w}")
    if not np.all(np.isfinite(image)):
        raise ContractError("image contains non-finite values")
    return np.ascontiguousarray(image, dtype=np.float32)


def to_model_space(pixels: np.ndarray) -> ImageTensor:
    """8-bit RGB -> float32 in [-1, 1]."""
    return (pixels.astype(np.float32) / 127.5 - 1.0).clip(-1.0, 1.0)


def to_uint8(image: ImageTensor) -> np.ndarray:
    """float32 in [-1, 1] -> 8-bit RGB, clamped and rounded."""
    levels = (np.clip(image, -1.0, 1.0) + 1.0) * 127.5
    return np.clip(np.rint(levels), 0, 255).astype(np.uint8)


def encode_png(image: ImageTensor) -> bytes:
    image = validate_image(image)
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(payload: bytes) -> ImageTensor:
    try:
        with Image.open(io.BytesIO(payload)) as im:
            pixels = np.asarray(im.convert("RGB"))
    except Exception as exc:
        raise ContractError(f"payload is not a decodable image: {exc}") from exc
    return validate_image(to_model_space(pixels))


def image_digest(image: ImageTensor) -> str:
    """Digest of the canonical PNG encoding; keys captioner stubs and artifacts."""
    return hashlib.sha256(encode_png(image)).hexdigest()
