"""Deterministic generative sampling with classifier-free guidance.

A fixed seed draws the initial noise; the trajectory then steps through a
decimated subset of the training timesteps using the deterministic DDIM
update. The unconditional branch uses the backend's empty-prompt embedding,
so ``guidance_scale=1`` reproduces the plain conditional trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, SamplingError
from .params import ParameterSnapshot

DEFAULT_SAMPLE_STEPS = 10
DEFAULT_GUIDANCE = 7.5


@dataclass(frozen=True)
class SamplerSettings:
    seed: int = 0
    steps: int = DEFAULT_SAMPLE_STEPS
    guidance_scale: float = DEFAULT_GUIDANCE

    def to_json(self) -> dict:
        return {"seed": self.seed, "steps": self.steps, "guidance_scale": self.guidance_scale}

    @classmethod
    def from_json(cls, data: dict) -> "SamplerSettings":
        return cls(
            seed=int(data.get("seed", 0)),
            steps=int(data.get("steps", DEFAULT_SAMPLE_STEPS)),
            guidance_scale=float(data.get("guidance_scale", DEFAULT_GUIDANCE)),
        )


def sample(
    params: ParameterSnapshot,
    embedding: np.ndarray,
    settings: SamplerSettings,
    backend,
) -> np.ndarray:
    """Generate one image from noise under the given embedding. Deterministic."""
    if settings.steps < 1:
        raise ContractError(f"sampler needs at least 1 step, got {settings.steps}")
    size = backend.spec.image_size
    rng = np.random.default_rng(settings.seed)
    x = rng.standard_normal((size, size, 3)).astype(np.float32)
    null_embedding = backend.null_embedding()

    total = backend.spec.timesteps
    schedule = [int(t) for t in np.linspace(total - 1, 0, settings.steps)]
    for i, t in enumerate(schedule):
        eps_cond = backend.predict_noise(params, x, t, embedding)
        if settings.guidance_scale == 1.0:
            eps = eps_cond
        else:
            eps_uncond = backend.predict_noise(params, x, t, null_embedding)
            eps = eps_uncond + settings.guidance_scale * (eps_cond - eps_uncond)
        abar = backend.alpha_bars[t]
        abar_next = backend.alpha_bars[schedule[i + 1]] if i + 1 < len(schedule) else 1.0
        x0_hat = (x - math.sqrt(1.0 - abar) * eps) / math.sqrt(abar)
        x = (math.sqrt(abar_next) * x0_hat + math.sqrt(1.0 - abar_next) * eps).astype(np.float32)
        if not np.all(np.isfinite(x)):
            raise SamplingError(f"non-finite sample state at timestep {t}")
    return np.clip(x, -1.0, 1.0)
