from __future__ import annotations

import numpy as np
import pytest

from forgedit.errors import ContractError
from forgedit.images import (
    decode_png,
    encode_png,
    image_digest,
    to_model_space,
    to_uint8,
    validate_image,
)


def test_png_round_trip_is_pixel_identical_for_random_images():
    # oracle: any image born from 8-bit data survives encode/decode bit-exactly
    rng = np.random.default_rng(0)
    for _ in range(20):
        pixels = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        image = to_model_space(pixels)
        again = decode_png(encode_png(image))
        assert np.array_equal(image, again)


def test_model_space_conversion_is_inverse_of_uint8():
    levels = np.arange(256, dtype=np.uint8).reshape(16, 16)[..., None].repeat(3, axis=-1)
    assert np.array_equal(to_uint8(to_model_space(levels)), levels)


def test_model_space_range():
    pixels = np.array([[[0, 127, 255]] * 8] * 8, dtype=np.uint8)
    image = to_model_space(pixels)
    assert image.min() >= -1.0 and image.max() <= 1.0
    assert image[0, 0, 0] == -1.0
    assert image[0, 0, 2] == 1.0


def test_to_uint8_clamps_out_of_range():
    image = np.full((8, 8, 3), 5.0, dtype=np.float32)
    assert to_uint8(image).max() == 255
    image = np.full((8, 8, 3), -5.0, dtype=np.float32)
    assert to_uint8(image).min() == 0


@pytest.mark.parametrize(
    "shape",
    [(7, 8, 3), (8, 7, 3), (10, 8, 3), (8, 8, 4), (8, 8)],
)
def test_validate_rejects_bad_shapes(shape):
    with pytest.raises(ContractError):
        validate_image(np.zeros(shape, dtype=np.float32))


def test_validate_rejects_non_finite():
    image = np.zeros((8, 8, 3), dtype=np.float32)
    image[0, 0, 0] = np.nan
    with pytest.raises(ContractError):
        validate_image(image)


def test_decode_rejects_garbage():
    with pytest.raises(ContractError):
        decode_png(b"definitely not a png")


def test_digest_is_stable_per_content():
    rng = np.random.default_rng(1)
    image = to_model_space(rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
    assert image_digest(image) == image_digest(image.copy())
    other = image.copy()
    other[0, 0, 0] = -other[0, 0, 0] if other[0, 0, 0] != 0 else 1.0
    assert image_digest(other) != image_digest(image)
