"""Embedding arithmetic for the editing stage.

Vector subtraction walks from the optimized source embedding toward the
target embedding (``e + gamma * (t - e)``); vector projection decomposes the
target into its component along the source and the orthogonal residual, then
recombines them with explicit coefficients. Both operate entrywise over the
full token-by-dimension matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateReferenceError

DEFAULT_GAMMA_LO = 0.8
DEFAULT_GAMMA_HI = 1.6
DEFAULT_GAMMA_COUNT = 8

_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class GammaGrid:
    """Ordered edit-strength values for one sweep."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise ContractError("gamma grid must be non-empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ContractError("gamma grid contains non-finite values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ContractError("gamma grid must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def from_values(cls, values) -> "GammaGrid":
        return cls(tuple(float(v) for v in values))


@dataclass(frozen=True)
class ProjectionCoefficients:
    """Weights on the source direction (alpha) and the orthogonal residual (beta)."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ContractError("projection coefficients must be finite")


def gamma_grid(
    lo: float = DEFAULT_GAMMA_LO,
    hi: float = DEFAULT_GAMMA_HI,
    n: int = DEFAULT_GAMMA_COUNT,
) -> GammaGrid:
    """n evenly spaced values including both endpoints."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise ContractError(f"gamma range requires lo < hi, got [{lo}, {hi}]")
    if n < 2:
        raise ContractError(f"gamma grid needs at least 2 values, got {n}")
    return GammaGrid(tuple(float(v) for v in np.linspace(lo, hi, n)))


def _check_shapes(e_opt: np.ndarray, e_tgt: np.ndarray) -> None:
    if e_opt.shape != e_tgt.shape:
        raise ContractError(f"embedding shapes differ: {e_opt.shape} vs {e_tgt.shape}")


def vector_subtract(e_opt: np.ndarray, e_tgt: np.ndarray, gamma: float) -> np.ndarray:
    """Affine move from e_opt toward e_tgt: gamma=0 is e_opt, gamma=1 is e_tgt.

    Computed in float64 so the endpoint identities hold to rounding error.
    """
    _check_shapes(e_opt, e_tgt)
    if not math.isfinite(gamma):
        raise ContractError(f"gamma must be finite, got {gamma}")
    o = e_opt.astype(np.float64)
    t = e_tgt.astype(np.float64)
    return o + gamma * (t - o)


def vector_project(
    e_opt: np.ndarray,
    e_tgt: np.ndarray,
    coeffs: ProjectionCoefficients,
    per_token: bool = False,
) -> np.ndarray:
    """Recombine e_tgt's components along and orthogonal to e_opt.

    The decomposition flattens the whole matrix into one vector unless
    ``per_token`` asks for a row-wise variant.
    """
    _check_shapes(e_opt, e_tgt)
    o = e_opt.astype(np.float64)
    t = e_tgt.astype(np.float64)
    if per_token:
        sq = np.sum(o**2, axis=-1, keepdims=True)
        if np.any(sq <= _NORM_FLOOR**2):
            raise DegenerateReferenceError("a token row of e_opt is numerically zero")
        coef = np.sum(t * o, axis=-1, keepdims=True) / sq
    else:
        sq = float(np.dot(o.ravel(), o.ravel()))
        if sq <= _NORM_FLOOR**2:
            raise DegenerateReferenceError("e_opt is numerically zero; nothing to project onto")
        coef = float(np.dot(t.ravel(), o.ravel())) / sq
    e_par = coef * o
    e_orth = t - e_par
    return coeffs.alpha * o + coeffs.beta * e_orth


def orthogonal_residual(e_opt: np.ndarray, e_tgt: np.ndarray, per_token: bool = False) -> np.ndarray:
    """The component of e_tgt orthogonal to e_opt (projection with alpha=0, beta=1)."""
    return vector_project(e_opt, e_tgt, ProjectionCoefficients(0.0, 1.0), per_token=per_token)
