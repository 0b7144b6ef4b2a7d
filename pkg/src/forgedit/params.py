"""Named parameter collections with per-parameter role tags.

Roles are decidable from parameter names alone so that checkpoint surgery
works on serialized files: the leading segment names the UNet region
(``encoder`` / ``middle`` / ``decoder``) and a ``selfattn`` or ``crossattn``
segment anywhere in the name marks an attention parameter.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, ContractError


class Region(str, Enum):
    ENCODER = "encoder"
    MIDDLE = "middle"
    DECODER = "decoder"


class Kind(str, Enum):
    ATTENTION = "attention"
    OTHER = "other"


@dataclass(frozen=True)
class ParameterRole:
    region: Region
    kind: Kind

    @property
    def key(self) -> str:
        """Stable wire token, e.g. ``encoder.attention``."""
        return f"{self.region.value}.{self.kind.value}"

    @classmethod
    def from_key(cls, key: str) -> "ParameterRole":
        try:
            region, kind = key.split(".")
            return cls(Region(region), Kind(kind))
        except ValueError as exc:
            raise ContractError(f"malformed role key {key!r}") from exc


ALL_ROLES: tuple[ParameterRole, ...] = tuple(
    ParameterRole(region, kind) for region in Region for kind in Kind
)

_ATTENTION_SEGMENTS = {"selfattn", "crossattn"}


def classify_parameter(name: str) -> ParameterRole:
    """Derive the role of a parameter from its dotted name; fail fast otherwise."""
    segments = name.split(".")
    try:
        region = Region(segments[0])
    except (ValueError, IndexError):
        raise ConfigurationError(f"parameter name {name!r} has no encoder/middle/decoder prefix")
    kind = Kind.ATTENTION if _ATTENTION_SEGMENTS.intersection(segments) else Kind.OTHER
    return ParameterRole(region, kind)


class ParameterSnapshot:
    """Immutable-by-convention ordered map of parameter name -> float32 array.

    Two snapshots of one backend always share the same name/shape sets, which
    is what makes selection-based merging well defined.
    """

    def __init__(self, entries: dict[str, np.ndarray], roles: dict[str, ParameterRole] | None = None):
        if roles is None:
            roles = {name: classify_parameter(name) for name in entries}
        missing = set(entries) - set(roles)
        if missing:
            raise ContractError(f"roles missing for parameters: {sorted(missing)}")
        # float32 at rest; float64 is tolerated so gradient oracles can run
        # the same code path at higher precision
        self.entries: dict[str, np.ndarray] = {}
        for name, value in entries.items():
            arr = np.ascontiguousarray(value)
            if arr.dtype not in (np.float32, np.float64):
                arr = arr.astype(np.float32)
            self.entries[name] = arr
        self.roles: dict[str, ParameterRole] = {name: roles[name] for name in entries}

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def names(self) -> list[str]:
        return list(self.entries)

    def role(self, name: str) -> ParameterRole:
        return self.roles[name]

    def copy(self) -> "ParameterSnapshot":
        return ParameterSnapshot(
            {name: value.copy() for name, value in self.entries.items()},
            dict(self.roles),
        )

    def role_histogram(self) -> dict[ParameterRole, int]:
        counts: dict[ParameterRole, int] = {role: 0 for role in ALL_ROLES}
        for role in self.roles.values():
            counts[role] += 1
        return counts


def check_compatible(a: ParameterSnapshot, b: ParameterSnapshot) -> None:
    """Raise unless the snapshots share names, shapes, and role assignments."""
    if set(a.entries) != set(b.entries):
        only_a = sorted(set(a.entries) - set(b.entries))[:3]
        only_b = sorted(set(b.entries) - set(a.entries))[:3]
        raise ContractError(f"snapshot name sets differ (e.g. {only_a} vs {only_b})")
    for name in a.entries:
        if a.entries[name].shape != b.entries[name].shape:
            raise ContractError(
                f"shape mismatch for {name}: {a.entries[name].shape} vs {b.entries[name].shape}"
            )
        if a.roles[name] != b.roles[name]:
            raise ContractError(f"role mismatch for {name}")
