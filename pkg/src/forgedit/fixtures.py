"""Deterministic toy images for cases, tests, and demos."""
from __future__ import annotations

import numpy as np

from .errors import ContractError


def polar_bear_image() -> np.ndarray:
    """A 16x16 stand-in for 'a polar bear on the ice field': white blob on ice
    under a dark sky. Pure constants, so its PNG digest never changes."""
    img = np.zeros((16, 16, 3), dtype=np.float32)
    img[:7] = np.array([-0.35, -0.15, 0.30], dtype=np.float32)  # sky
    img[7:] = np.array([0.55, 0.70, 0.85], dtype=np.float32)  # ice field
    yy, xx = np.mgrid[0:16, 0:16]
    body = ((yy - 10.0) ** 2 / 8.0 + (xx - 7.0) ** 2 / 14.0) <= 1.0
    head = ((yy - 6.5) ** 2 + (xx - 11.0) ** 2) <= 2.8
    img[body | head] = np.array([0.92, 0.92, 0.85], dtype=np.float32)
    return np.clip(img, -1.0, 1.0)


def smooth_pattern() -> np.ndarray:
    """Fixed smooth 16x16 pattern used as the synthetic finetune target."""
    yy, xx = np.mgrid[0:16, 0:16] / 15.0
    img = np.stack([np.sin(4.0 * yy), np.cos(3.0 * xx), 2.0 * yy * xx - 1.0], axis=-1)
    return np.clip(img.astype(np.float32), -1.0, 1.0)


def noise_image(seed: int, size: int = 16) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, (size, size, 3)).astype(np.float32)


BUILTIN_IMAGES = {
    "polar_bear": polar_bear_image,
    "smooth_pattern": smooth_pattern,
}


def builtin_image(name: str) -> np.ndarray:
    try:
        return BUILTIN_IMAGES[name]()
    except KeyError:
        raise ContractError(f"unknown builtin image {name!r}; have {sorted(BUILTIN_IMAGES)}") from None
