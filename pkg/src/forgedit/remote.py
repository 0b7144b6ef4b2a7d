"""Adapter backend that delegates to an external latent-diffusion runtime.

Config-gated (FORGEDIT_BACKEND=remote + FORGEDIT_REMOTE_URL) and excluded
from the test suite: it exists so the same workflow can drive a real model
server. Checkpoints upload once, content-addressed; evaluations reference
them by id. Tensors travel as base64 little-endian float32 with a shape.
"""
from __future__ import annotations

import base64
import hashlib

import numpy as np
import requests

from .backend import BackendSpec
from .checkpoints import snapshot_to_bytes
from .errors import ConfigurationError, ContractError
from .params import ParameterRole, ParameterSnapshot, classify_parameter


def _encode_tensor(array: np.ndarray) -> dict:
    data = np.ascontiguousarray(array, dtype="<f4")
    return {"data": base64.b64encode(data.tobytes()).decode("ascii"), "shape": list(data.shape)}


def _decode_tensor(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    return np.frombuffer(raw, dtype="<f4").reshape(payload["shape"]).copy()


class RemoteBackend:
    def __init__(self, base_url: str, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._known_checkpoints: set[str] = set()
        info = self._post("spec", {})
        self.spec = BackendSpec(
            image_size=int(info["image_size"]),
            embed_tokens=int(info["embed_tokens"]),
            embed_dim=int(info["embed_dim"]),
            timesteps=int(info["timesteps"]),
        )
        self.alpha_bars = np.asarray(info["alpha_bars"], dtype=np.float64)
        self._roles: dict[str, ParameterRole] = {
            name: classify_parameter(name) for name in info["parameter_names"]
        }

    def _post(self, route: str, payload: dict) -> dict:
        try:
            response = requests.post(f"{self.base_url}/{route}", json=payload, timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise ConfigurationError(f"remote backend call {route} failed: {exc}") from exc

    def _ensure_checkpoint(self, params: ParameterSnapshot) -> str:
        payload = snapshot_to_bytes(params)
        checkpoint_id = hashlib.sha256(payload).hexdigest()
        if checkpoint_id not in self._known_checkpoints:
            self._post(
                "checkpoints",
                {"checkpoint_id": checkpoint_id, "data": base64.b64encode(payload).decode("ascii")},
            )
            self._known_checkpoints.add(checkpoint_id)
        return checkpoint_id

    # ----------------------------------------------------- backend interface

    def pretrained(self) -> ParameterSnapshot:
        info = self._post("pretrained", {})
        entries = {name: _decode_tensor(tensor) for name, tensor in info["parameters"].items()}
        return ParameterSnapshot(entries)

    def parameter_roles(self) -> dict[str, ParameterRole]:
        return dict(self._roles)

    def check_image(self, image: np.ndarray) -> np.ndarray:
        image = np.ascontiguousarray(image)
        expected = (self.spec.image_size, self.spec.image_size, 3)
        if image.shape != expected:
            raise ContractError(f"image shape {image.shape} does not match backend spec {expected}")
        return image

    def encode_text(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ContractError("cannot encode an empty prompt")
        return _decode_tensor(self._post("encode_text", {"text": text}))

    def null_embedding(self) -> np.ndarray:
        return _decode_tensor(self._post("null_embedding", {}))

    def predict_noise(self, params, noisy_image, timestep, embedding) -> np.ndarray:
        result = self._post(
            "predict_noise",
            {
                "checkpoint": self._ensure_checkpoint(params),
                "image": _encode_tensor(noisy_image),
                "timestep": int(timestep),
                "embedding": _encode_tensor(embedding),
            },
        )
        return _decode_tensor(result["noise"])

    def loss_and_gradients_for_noise(self, params, embedding, image, noise, timestep):
        result = self._post(
            "loss_and_gradients",
            {
                "checkpoint": self._ensure_checkpoint(params),
                "embedding": _encode_tensor(embedding),
                "image": _encode_tensor(image),
                "noise": _encode_tensor(noise),
                "timestep": int(timestep),
            },
        )
        grads = {name: _decode_tensor(tensor) for name, tensor in result["param_grads"].items()}
        return float(result["loss"]), grads, _decode_tensor(result["embedding_grad"])

    def loss_and_gradients(self, params, embedding, image, noise_seed, timestep):
        noise = np.random.default_rng(noise_seed).standard_normal(image.shape).astype(np.float32)
        return self.loss_and_gradients_for_noise(params, embedding, image, noise, timestep)

    def loss_for_noise(self, params, embedding, image, noise, timestep) -> float:
        result = self._post(
            "loss",
            {
                "checkpoint": self._ensure_checkpoint(params),
                "embedding": _encode_tensor(embedding),
                "image": _encode_tensor(image),
                "noise": _encode_tensor(noise),
                "timestep": int(timestep),
            },
        )
        return float(result["loss"])
