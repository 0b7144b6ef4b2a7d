"""One-shot joint vision-language optimization.

The source-prompt embedding and the UNet parameters are optimized together,
in the same gradient step, to reconstruct the input image under random
forward noising. One fixed hyper-parameter set is used for every image; the
pretrained snapshot is never mutated (the forgetting merge needs it intact).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AbortedFinetuneError, ContractError, NumericalError
from .params import ParameterSnapshot

DEFAULT_PROBE_COUNT = 16


@dataclass(frozen=True)
class FinetuneConfig:
    """Global per-deployment settings; sessions may not override them."""

    steps: int = 200
    embedding_lr: float = 1e-2
    unet_lr: float = 1e-3
    timestep_sampling: str = "uniform"
    seed: int = 7
    max_grad_norm: float = 1.0
    wall_clock_budget: float | None = None

    def __post_init__(self):
        if self.steps <= 0:
            raise ContractError(f"steps must be positive, got {self.steps}")
        if self.embedding_lr <= 0 or self.unet_lr <= 0:
            raise ContractError("learning rates must be positive")
        if self.timestep_sampling != "uniform":
            raise ContractError(f"unsupported timestep sampling {self.timestep_sampling!r}")


@dataclass
class FinetuneResult:
    optimized_embedding: np.ndarray
    finetuned_params: ParameterSnapshot
    loss_curve: list[tuple[int, float]] = field(default_factory=list)
    elapsed: float = 0.0
    budget_exceeded: bool = False


def _clip_gradients(
    param_grads: dict[str, np.ndarray], emb_grad: np.ndarray, max_norm: float
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    total_sq = float(np.sum(emb_grad.astype(np.float64) ** 2))
    for grad in param_grads.values():
        total_sq += float(np.sum(grad.astype(np.float64) ** 2))
    total = math.sqrt(total_sq)
    if total <= max_norm:
        return param_grads, emb_grad
    scale = max_norm / total
    return {name: grad * scale for name, grad in param_grads.items()}, emb_grad * scale


def finetune(image: np.ndarray, source_prompt_text: str, config: FinetuneConfig, backend) -> FinetuneResult:
    """Optimize (e_opt, UNet) jointly to reconstruct ``image``.

    Deterministic given ``config.seed``. Raises AbortedFinetuneError with the
    partial loss curve if any step produces a non-finite loss.
    """
    image = backend.check_image(np.asarray(image, dtype=np.float32))
    embedding = backend.encode_text(source_prompt_text).copy()
    params = backend.pretrained()
    rng = np.random.default_rng(config.seed)
    curve: list[tuple[int, float]] = []
    started = time.monotonic()
    budget_exceeded = False

    for step in range(config.steps):
        timestep = int(rng.integers(backend.spec.timesteps))
        noise = rng.standard_normal(image.shape).astype(np.float32)
        try:
            loss, param_grads, emb_grad = backend.loss_and_gradients_for_noise(
                params, embedding, image, noise, timestep
            )
        except NumericalError as exc:
            raise AbortedFinetuneError(f"finetune aborted at step {step}: {exc}", curve) from exc
        curve.append((step, loss))
        param_grads, emb_grad = _clip_gradients(param_grads, emb_grad, config.max_grad_norm)
        params = ParameterSnapshot(
            {name: params[name] - config.unet_lr * param_grads[name] for name in params.names()},
            dict(params.roles),
        )
        embedding = embedding - config.embedding_lr * emb_grad
        if config.wall_clock_budget is not None and time.monotonic() - started > config.wall_clock_budget:
            budget_exceeded = step + 1 < config.steps
            break

    return FinetuneResult(
        optimized_embedding=embedding,
        finetuned_params=params,
        loss_curve=curve,
        elapsed=time.monotonic() - started,
        budget_exceeded=budget_exceeded,
    )


def reconstruction_error(
    params: ParameterSnapshot,
    embedding: np.ndarray,
    image: np.ndarray,
    backend,
    probe_seed: int,
    probes: int = DEFAULT_PROBE_COUNT,
) -> float:
    """Average denoising MSE over a fixed probe set of (noise, timestep) pairs.

    The overfitting diagnostic: a model that memorized the image scores low
    with its optimized embedding.
    """
    image = backend.check_image(np.asarray(image, dtype=np.float32))
    rng = np.random.default_rng(probe_seed)
    total = 0.0
    for _ in range(probes):
        timestep = int(rng.integers(backend.spec.timesteps))
        noise = rng.standard_normal(image.shape).astype(np.float32)
        total += backend.loss_for_noise(params, embedding, image, noise, timestep)
    return total / probes
