"""Parameter-role-aware checkpoint merging ("forgetting" strategies).

A strategy decides, per role cell, whether the sampled model keeps the
finetuned value or reverts ("forgets") to the original pretrained value.
Merging is pure selection; no tensor is ever blended.

The built-in strategies:

* ``none`` keeps every finetuned parameter.
* ``encoderattn`` (structure edits) keeps finetuned encoder attention and the
  whole finetuned decoder, reverting encoder non-attention parameters.
* ``decoderattn`` (appearance edits) is the mirror: finetuned decoder
  attention, reverted decoder non-attention, whole encoder kept finetuned.

The middle block keeps finetuned values under both defaults.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .checkpoints import snapshot_from_bytes, snapshot_to_bytes
from .errors import ContractError
from .params import ALL_ROLES, Kind, ParameterRole, ParameterSnapshot, Region, check_compatible


class Keep(str, Enum):
    ORIGINAL = "original"
    FINETUNED = "finetuned"


class StrategyKind(str, Enum):
    NONE = "none"
    ENCODER_ATTN = "encoderattn"
    DECODER_ATTN = "decoderattn"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ForgettingStrategy:
    kind: StrategyKind
    custom_rule: tuple[tuple[ParameterRole, Keep], ...] | None = None

    @classmethod
    def none(cls) -> "ForgettingStrategy":
        return cls(StrategyKind.NONE)

    @classmethod
    def encoder_attn(cls) -> "ForgettingStrategy":
        return cls(StrategyKind.ENCODER_ATTN)

    @classmethod
    def decoder_attn(cls) -> "ForgettingStrategy":
        return cls(StrategyKind.DECODER_ATTN)

    @classmethod
    def custom(cls, rule: dict[ParameterRole, Keep] | None) -> "ForgettingStrategy":
        items = tuple(sorted(rule.items(), key=lambda kv: kv[0].key)) if rule is not None else None
        return cls(StrategyKind.CUSTOM, items)

    @property
    def wire_name(self) -> str:
        return self.kind.value


def decision_table(strategy: ForgettingStrategy) -> dict[ParameterRole, Keep]:
    """Total map role -> keep-decision for the given strategy."""
    if strategy.kind is StrategyKind.CUSTOM:
        if strategy.custom_rule is None:
            raise ContractError("custom strategy requires a rule covering all six role cells")
        rule = dict(strategy.custom_rule)
        missing = [role.key for role in ALL_ROLES if role not in rule]
        if missing:
            raise ContractError(f"custom rule is missing role cells: {missing}")
        return {role: rule[role] for role in ALL_ROLES}

    table = {role: Keep.FINETUNED for role in ALL_ROLES}
    if strategy.kind is StrategyKind.ENCODER_ATTN:
        table[ParameterRole(Region.ENCODER, Kind.OTHER)] = Keep.ORIGINAL
    elif strategy.kind is StrategyKind.DECODER_ATTN:
        table[ParameterRole(Region.DECODER, Kind.OTHER)] = Keep.ORIGINAL
    return table


def apply_strategy(
    original: ParameterSnapshot,
    finetuned: ParameterSnapshot,
    strategy: ForgettingStrategy,
) -> ParameterSnapshot:
    """Select, per parameter, the original or finetuned tensor. Never blends."""
    check_compatible(original, finetuned)
    table = decision_table(strategy)
    merged: dict[str, np.ndarray] = {}
    for name in original.names():
        source = original if table[original.role(name)] is Keep.ORIGINAL else finetuned
        merged[name] = source[name].copy()
    return ParameterSnapshot(merged, dict(original.roles))


def diff_checkpoints(original: ParameterSnapshot, finetuned: ParameterSnapshot) -> dict[str, float]:
    """Per-parameter max absolute difference; diagnostic for what finetuning touched."""
    check_compatible(original, finetuned)
    return {
        name: float(np.max(np.abs(original[name] - finetuned[name]))) if original[name].size else 0.0
        for name in original.names()
    }


def merge_checkpoint_files(original_payload: bytes, finetuned_payload: bytes, strategy: ForgettingStrategy) -> bytes:
    """File-level surgery: merge two serialized checkpoints without a backend."""
    original = snapshot_from_bytes(original_payload)
    finetuned = snapshot_from_bytes(finetuned_payload)
    return snapshot_to_bytes(apply_strategy(original, finetuned, strategy))


def _rule_from_json(raw: dict) -> dict[ParameterRole, Keep]:
    rule: dict[ParameterRole, Keep] = {}
    for key, value in raw.items():
        try:
            rule[ParameterRole.from_key(key)] = Keep(value)
        except ValueError as exc:
            raise ContractError(f"bad custom rule entry {key!r}: {value!r}") from exc
    return rule


def strategy_to_wire(strategy: ForgettingStrategy) -> str | dict:
    if strategy.kind is StrategyKind.CUSTOM:
        if strategy.custom_rule is None:
            return {"kind": "custom", "rule": None}
        return {"kind": "custom", "rule": {role.key: keep.value for role, keep in strategy.custom_rule}}
    return strategy.kind.value


def strategy_from_wire(value) -> ForgettingStrategy:
    """Accept the lowercase token or {"kind": "custom", "rule": {...}}."""
    if isinstance(value, str):
        name = value.strip().lower()
        if name.startswith("custom:"):
            path = Path(name.split(":", 1)[1])
            try:
                raw = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ContractError(f"cannot read custom rule file {path}: {exc}") from exc
            return ForgettingStrategy.custom(_rule_from_json(raw))
        try:
            kind = StrategyKind(name)
        except ValueError as exc:
            raise ContractError(f"unknown strategy name {value!r}") from exc
        if kind is StrategyKind.CUSTOM:
            return ForgettingStrategy.custom(None)
        return ForgettingStrategy(kind)
    if isinstance(value, dict):
        if value.get("kind") != "custom":
            raise ContractError(f"strategy objects must have kind 'custom', got {value.get('kind')!r}")
        rule = value.get("rule")
        return ForgettingStrategy.custom(_rule_from_json(rule) if rule is not None else None)
    raise ContractError(f"cannot parse strategy from {value!r}")
