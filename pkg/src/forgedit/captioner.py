"""Source-prompt acquisition: remote captioning endpoint client plus a
deterministic stub for tests and offline runs.

The remote wire contract is the simplest possible: POST the PNG bytes, get
back ``{"caption": "..."}``. Any caption server can be plugged in behind it.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import CaptionerUnavailableError, ContractError
from .images import encode_png, image_digest
from .sessions import Prompt, PromptOrigin

ENV_CAPTION_URL = "FORGEDIT_CAPTION_URL"
FALLBACK_CAPTION = "an image"


@dataclass(frozen=True)
class CaptionerConfig:
    mode: str = "stub"  # "stub" | "remote"
    endpoint_url: str | None = None
    timeout: float = 10.0
    stub_table: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("stub", "remote"):
            raise ContractError(f"unknown captioner mode {self.mode!r}")
        if self.timeout <= 0:
            raise ContractError("captioner timeout must be positive")
        if self.mode == "remote" and not self.resolved_url():
            raise ContractError("remote captioner requires endpoint_url or FORGEDIT_CAPTION_URL")

    def resolved_url(self) -> str | None:
        return os.environ.get(ENV_CAPTION_URL) or self.endpoint_url


def generate_source_prompt(image: np.ndarray, config: CaptionerConfig) -> Prompt:
    """Caption the input image. Stub mode is pure; remote mode never blocks
    longer than the configured timeout."""
    if config.mode == "stub":
        caption = config.stub_table.get(image_digest(image), FALLBACK_CAPTION)
        return Prompt(text=caption, origin=PromptOrigin.CAPTIONER)

    url = config.resolved_url()
    try:
        response = requests.post(
            url,
            data=encode_png(image),
            headers={"Content-Type": "image/png"},
            timeout=config.timeout,
        )
        response.raise_for_status()
        caption = response.json().get("caption", "")
    except requests.RequestException as exc:
        raise CaptionerUnavailableError(f"captioning endpoint {url} failed: {exc}") from exc
    except ValueError as exc:
        raise CaptionerUnavailableError(f"captioning endpoint {url} returned malformed JSON") from exc
    if not caption or not caption.strip():
        raise CaptionerUnavailableError(f"captioning endpoint {url} returned an empty caption")
    return Prompt(text=caption, origin=PromptOrigin.CAPTIONER)
