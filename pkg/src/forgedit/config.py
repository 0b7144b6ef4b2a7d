"""Environment wiring shared by the CLI and the HTTP service.

Recognized variables:

    FORGEDIT_STORE_DIR    root of the artifact store (default ./forgedit-store)
    FORGEDIT_BACKEND      "toy" (default) or "remote"
    FORGEDIT_REMOTE_URL   base URL for the remote backend adapter
    FORGEDIT_CAPTION_URL  switches the captioner to remote mode
"""
from __future__ import annotations

import os
from pathlib import Path

from .backend import BackendSpec, ToyBackend
from .captioner import ENV_CAPTION_URL, CaptionerConfig
from .errors import ConfigurationError

ENV_STORE_DIR = "FORGEDIT_STORE_DIR"
ENV_BACKEND = "FORGEDIT_BACKEND"
ENV_REMOTE_URL = "FORGEDIT_REMOTE_URL"

DEFAULT_STORE_DIR = "forgedit-store"


def resolve_store_dir(explicit: str | None = None) -> Path:
    return Path(explicit or os.environ.get(ENV_STORE_DIR) or DEFAULT_STORE_DIR)


def build_backend(name: str | None = None, seed: int = 0):
    choice = (name or os.environ.get(ENV_BACKEND) or "toy").lower()
    if choice == "toy":
        return ToyBackend(BackendSpec(seed=seed))
    if choice == "remote":
        from .remote import RemoteBackend

        url = os.environ.get(ENV_REMOTE_URL)
        if not url:
            raise ConfigurationError(f"remote backend requires {ENV_REMOTE_URL}")
        return RemoteBackend(url)
    raise ConfigurationError(f"unknown backend {choice!r}; expected 'toy' or 'remote'")


def build_captioner(stub_table: dict[str, str] | None = None) -> CaptionerConfig:
    if os.environ.get(ENV_CAPTION_URL):
        return CaptionerConfig(mode="remote")
    return CaptionerConfig(mode="stub", stub_table=stub_table or {})
