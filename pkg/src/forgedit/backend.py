"""The diffusion-model abstraction and its desk-scale reference implementation.

The toy backend is a tiny UNet-shaped denoiser over 16x16 RGB images with a
frozen hashed-vocabulary text encoder. It exists to exercise every structure
the editing workflow manipulates: tagged encoder/middle/decoder parameters,
self- and cross-attention sublayers in every block, a linear noise schedule,
and exact gradients for joint image/text optimization. Everything runs
deterministically on CPU; parameters live in numpy snapshots and are lifted
into torch only while evaluating.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ContractError, NumericalError
from .params import ParameterRole, ParameterSnapshot, classify_parameter


@dataclass(frozen=True)
class BackendSpec:
    """Deterministic construction recipe for a toy backend."""

    image_size: int = 16
    embed_tokens: int = 8
    embed_dim: int = 16
    vocab_size: int = 256
    timesteps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    seed: int = 0


def _sinusoidal_rows(rows: int, dim: int) -> np.ndarray:
    pos = np.arange(rows, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (idx // 2)) / dim)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(np.float32)


def _time_features(timestep: int, total: int, dim: int = 8) -> np.ndarray:
    tau = timestep / max(total - 1, 1)
    freqs = [1.0, 2.0, 4.0, 8.0]
    feats = [f(2.0 * math.pi * fq * tau) for fq in freqs for f in (math.sin, math.cos)]
    return np.asarray(feats[:dim], dtype=np.float32)


def _token_bucket(token: str, vocab_size: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % vocab_size


class ToyBackend:
    """CPU reference backend: deterministic denoiser, text encoder, gradients."""

    # (in_channels, out_channels) per encoder block; decoder mirrors with skips
    ENCODER_CHANNELS = ((3, 16), (16, 32))
    MIDDLE_CHANNELS = 32
    DECODER_CHANNELS = ((32 + 16, 16), (16 + 3, 16))
    TIME_DIM = 8

    def __init__(self, spec: BackendSpec = BackendSpec()):
        self.spec = spec
        betas = np.linspace(spec.beta_start, spec.beta_end, spec.timesteps, dtype=np.float64)
        self.betas = betas
        self.alpha_bars = np.cumprod(1.0 - betas)
        rng = np.random.default_rng(spec.seed)
        # token rows plus one dedicated padding row
        self._embedding_table = rng.standard_normal((spec.vocab_size + 1, spec.embed_dim)).astype(np.float32)
        self._positional = _sinusoidal_rows(spec.embed_tokens, spec.embed_dim)
        self._pretrained = ParameterSnapshot(self._init_parameters(rng))
        self._shapes = {name: self._pretrained[name].shape for name in self._pretrained.names()}

    # ------------------------------------------------------------------ setup

    def _init_parameters(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        def conv(out_ch: int, in_ch: int) -> np.ndarray:
            std = 1.0 / math.sqrt(in_ch * 9)
            return rng.standard_normal((out_ch, in_ch, 3, 3)).astype(np.float32) * std

        def square(rows: int, cols: int) -> np.ndarray:
            std = 1.0 / math.sqrt(rows)
            return rng.standard_normal((rows, cols)).astype(np.float32) * std

        params: dict[str, np.ndarray] = {}

        def block(prefix: str, in_ch: int, out_ch: int) -> None:
            params[f"{prefix}.conv.weight"] = conv(out_ch, in_ch)
            params[f"{prefix}.conv.bias"] = np.zeros(out_ch, dtype=np.float32)
            params[f"{prefix}.temb.weight"] = square(self.TIME_DIM, out_ch) * 0.5
            params[f"{prefix}.temb.bias"] = np.zeros(out_ch, dtype=np.float32)
            for leaf in ("q", "k", "v", "o"):
                params[f"{prefix}.selfattn.{leaf}"] = square(out_ch, out_ch)
            emb_dim = self.spec.embed_dim
            params[f"{prefix}.crossattn.q"] = square(out_ch, out_ch)
            params[f"{prefix}.crossattn.k"] = square(emb_dim, out_ch)
            params[f"{prefix}.crossattn.v"] = square(emb_dim, out_ch)
            params[f"{prefix}.crossattn.o"] = square(out_ch, out_ch)

        for i, (in_ch, out_ch) in enumerate(self.ENCODER_CHANNELS):
            block(f"encoder.{i}", in_ch, out_ch)
        block("middle", self.MIDDLE_CHANNELS, self.MIDDLE_CHANNELS)
        for i, (in_ch, out_ch) in enumerate(self.DECODER_CHANNELS):
            block(f"decoder.{i}", in_ch, out_ch)
        params["decoder.out.conv.weight"] = conv(3, self.DECODER_CHANNELS[-1][1])
        params["decoder.out.conv.bias"] = np.zeros(3, dtype=np.float32)
        return params

    # ------------------------------------------------------------- interfaces

    def pretrained(self) -> ParameterSnapshot:
        return self._pretrained.copy()

    def parameter_roles(self) -> dict[str, ParameterRole]:
        return {name: classify_parameter(name) for name in self._pretrained.names()}

    def encode_text(self, text: str) -> np.ndarray:
        """Deterministic (tokens x dim) embedding; unknown tokens hash into the vocabulary."""
        if not text or not text.strip():
            raise ContractError("cannot encode an empty prompt")
        buckets = [_token_bucket(tok, self.spec.vocab_size) for tok in text.split()]
        return self._embed_buckets(buckets)

    def null_embedding(self) -> np.ndarray:
        """Embedding of zero tokens; the unconditional branch of guided sampling."""
        return self._embed_buckets([])

    def _embed_buckets(self, buckets: list[int]) -> np.ndarray:
        length = self.spec.embed_tokens
        pad_row = self.spec.vocab_size
        ids = (buckets[:length] + [pad_row] * max(0, length - len(buckets)))[:length]
        return self._embedding_table[ids] + self._positional

    # --------------------------------------------------------------- denoiser

    def _check_params(self, params: ParameterSnapshot) -> None:
        if set(params.entries) != set(self._shapes):
            raise ContractError("parameter snapshot does not match this backend's names")
        for name, shape in self._shapes.items():
            if params[name].shape != shape:
                raise ContractError(f"parameter {name} has shape {params[name].shape}, expected {shape}")

    def _check_embedding(self, embedding: np.ndarray) -> None:
        expected = (self.spec.embed_tokens, self.spec.embed_dim)
        if embedding.shape != expected:
            raise ContractError(f"embedding shape {embedding.shape} != {expected}")

    def _check_timestep(self, timestep: int) -> None:
        if not 0 <= int(timestep) < self.spec.timesteps:
            raise ContractError(f"timestep {timestep} outside [0, {self.spec.timesteps})")

    @staticmethod
    def _attention(seq: torch.Tensor, kv: torch.Tensor, p: dict[str, torch.Tensor], prefix: str) -> torch.Tensor:
        q = seq @ p[f"{prefix}.q"]
        k = kv @ p[f"{prefix}.k"]
        v = kv @ p[f"{prefix}.v"]
        scores = q @ k.T / math.sqrt(q.shape[-1])
        return torch.softmax(scores, dim=-1) @ v @ p[f"{prefix}.o"]

    def _block(
        self,
        p: dict[str, torch.Tensor],
        prefix: str,
        h: torch.Tensor,
        temb: torch.Tensor,
        emb: torch.Tensor,
        stride: int,
    ) -> torch.Tensor:
        h = F.conv2d(h.unsqueeze(0), p[f"{prefix}.conv.weight"], p[f"{prefix}.conv.bias"], stride=stride, padding=1)[0]
        h = F.silu(h)
        h = h + (temb @ p[f"{prefix}.temb.weight"] + p[f"{prefix}.temb.bias"])[:, None, None]
        channels, height, width = h.shape
        seq = h.reshape(channels, height * width).T
        seq = seq + self._attention(seq, seq, p, f"{prefix}.selfattn")
        seq = seq + self._attention(seq, emb, p, f"{prefix}.crossattn")
        return seq.T.reshape(channels, height, width)

    def _forward(
        self,
        p: dict[str, torch.Tensor],
        x: torch.Tensor,
        timestep: int,
        emb: torch.Tensor,
    ) -> torch.Tensor:
        temb = torch.as_tensor(_time_features(timestep, self.spec.timesteps, self.TIME_DIM), dtype=x.dtype)
        skips = [x]
        h = x
        for i in range(len(self.ENCODER_CHANNELS)):
            h = self._block(p, f"encoder.{i}", h, temb, emb, stride=2)
            skips.append(h)
        h = self._block(p, "middle", h, temb, emb, stride=1)
        for i in range(len(self.DECODER_CHANNELS)):
            h = F.interpolate(h.unsqueeze(0), scale_factor=2, mode="nearest")[0]
            h = torch.cat([h, skips[-(i + 2)]], dim=0)
            h = self._block(p, f"decoder.{i}", h, temb, emb, stride=1)
        return F.conv2d(h.unsqueeze(0), p["decoder.out.conv.weight"], p["decoder.out.conv.bias"], padding=1)[0]

    @staticmethod
    def _lift(params: ParameterSnapshot, requires_grad: bool = False) -> dict[str, torch.Tensor]:
        lifted = {}
        for name in params.names():
            t = torch.from_numpy(np.ascontiguousarray(params[name]))
            if requires_grad:
                t = t.clone().requires_grad_(True)
            lifted[name] = t
        return lifted

    def _compute_dtype(self, params: ParameterSnapshot) -> torch.dtype:
        first = params[next(iter(params.names()))]
        return torch.float64 if first.dtype == np.float64 else torch.float32

    def check_image(self, image: np.ndarray) -> np.ndarray:
        image = np.ascontiguousarray(image)
        expected = (self.spec.image_size, self.spec.image_size, 3)
        if image.shape != expected:
            raise ContractError(f"image shape {image.shape} does not match backend spec {expected}")
        if not np.all(np.isfinite(image)):
            raise ContractError("image contains non-finite values")
        return image

    def predict_noise(
        self,
        params: ParameterSnapshot,
        noisy_image: np.ndarray,
        timestep: int,
        embedding: np.ndarray,
    ) -> np.ndarray:
        """Denoiser evaluation: the noise estimate for x_t under the prompt embedding."""
        self._check_params(params)
        self._check_embedding(embedding)
        self._check_timestep(timestep)
        image = self.check_image(noisy_image)
        dtype = self._compute_dtype(params)
        with torch.no_grad():
            x = torch.from_numpy(image).to(dtype).permute(2, 0, 1)
            emb = torch.from_numpy(np.ascontiguousarray(embedding)).to(dtype)
            out = self._forward(self._lift(params), x, int(timestep), emb)
        return out.permute(1, 2, 0).numpy().astype(np.float32)

    # -------------------------------------------------------------- noising

    def add_noise(self, image: np.ndarray, noise: np.ndarray, timestep: int) -> np.ndarray:
        """Standard forward noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
        self._check_timestep(timestep)
        abar = self.alpha_bars[int(timestep)]
        return (math.sqrt(abar) * image + math.sqrt(1.0 - abar) * noise).astype(image.dtype)

    def sample_noise(self, seed: int) -> np.ndarray:
        size = self.spec.image_size
        return np.random.default_rng(seed).standard_normal((size, size, 3)).astype(np.float32)

    # -------------------------------------------------------------- gradients

    def loss_and_gradients(
        self,
        params: ParameterSnapshot,
        embedding: np.ndarray,
        image: np.ndarray,
        noise_seed: int,
        timestep: int,
    ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
        noise = np.random.default_rng(noise_seed).standard_normal(image.shape).astype(image.dtype)
        return self.loss_and_gradients_for_noise(params, embedding, image, noise, timestep)

    def loss_and_gradients_for_noise(
        self,
        params: ParameterSnapshot,
        embedding: np.ndarray,
        image: np.ndarray,
        noise: np.ndarray,
        timestep: int,
    ) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
        """MSE between predicted and true noise, with exact gradients for both
        the parameters and the prompt embedding. Dtype follows the snapshot, so
        float64 snapshots yield float64 gradients."""
        self._check_params(params)
        self._check_embedding(embedding)
        self._check_timestep(timestep)
        dtype = self._compute_dtype(params)
        lifted = self._lift(params, requires_grad=True)
        emb = torch.from_numpy(np.ascontiguousarray(embedding)).to(dtype).clone().requires_grad_(True)
        x_t = self.add_noise(self.check_image(image), noise, timestep)
        x = torch.from_numpy(np.ascontiguousarray(x_t)).to(dtype).permute(2, 0, 1)
        target = torch.from_numpy(np.ascontiguousarray(noise)).to(dtype).permute(2, 0, 1)
        prediction = self._forward(lifted, x, int(timestep), emb)
        loss = torch.mean((prediction - target) ** 2)
        if not torch.isfinite(loss):
            raise NumericalError(f"non-finite loss at timestep {timestep}")
        grads = torch.autograd.grad(loss, [emb] + [lifted[name] for name in params.names()])
        emb_grad = grads[0].numpy()
        param_grads = {name: grad.numpy() for name, grad in zip(params.names(), grads[1:])}
        for name, grad in param_grads.items():
            if not np.all(np.isfinite(grad)):
                raise NumericalError(f"non-finite gradient for {name}")
        if not np.all(np.isfinite(emb_grad)):
            raise NumericalError("non-finite embedding gradient")
        return float(loss.item()), param_grads, emb_grad

    def loss_for_noise(
        self,
        params: ParameterSnapshot,
        embedding: np.ndarray,
        image: np.ndarray,
        noise: np.ndarray,
        timestep: int,
    ) -> float:
        """Loss only, no gradient bookkeeping; the finite-difference oracle's probe."""
        self._check_params(params)
        self._check_embedding(embedding)
        self._check_timestep(timestep)
        dtype = self._compute_dtype(params)
        emb = torch.from_numpy(np.ascontiguousarray(embedding)).to(dtype)
        x_t = self.add_noise(self.check_image(image), noise, timestep)
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(x_t)).to(dtype).permute(2, 0, 1)
            target = torch.from_numpy(np.ascontiguousarray(noise)).to(dtype).permute(2, 0, 1)
            prediction = self._forward(self._lift(params), x, int(timestep), emb)
            return float(torch.mean((prediction - target) ** 2).item())
