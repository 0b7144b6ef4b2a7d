"""Domain types for one image's editing lifecycle and their JSON forms.

Sessions are plain JSON documents (schema_version 1) so a store is
inspectable and diff-able. Wire naming: verdict kinds and workflow states are
capitalized tokens ("Overfit", "AwaitingVerdict"), strategies are the
lowercase tokens ("encoderattn"), and fields are snake_case.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .algebra import GammaGrid
from .errors import ContractError, StateError
from .forgetting import ForgettingStrategy, strategy_from_wire, strategy_to_wire
from .sampling import SamplerSettings

SCHEMA_VERSION = 1


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class PromptOrigin(str, Enum):
    CAPTIONER = "captioner"
    USER = "user"


@dataclass(frozen=True)
class Prompt:
    text: str
    origin: PromptOrigin

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ContractError("prompt text must be non-empty after trimming")

    def to_json(self) -> dict:
        return {"text": self.text, "origin": self.origin.value}

    @classmethod
    def from_json(cls, data: dict) -> "Prompt":
        return cls(text=data["text"], origin=PromptOrigin(data["origin"]))


class EditIntention(str, Enum):
    STRUCTURE = "Structure"
    APPEARANCE = "Appearance"


class VerdictKind(str, Enum):
    SUCCESS = "Success"
    OVERFIT = "Overfit"
    UNDERFIT = "Underfit"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    chosen_image: int | None = None
    intention: EditIntention | None = None
    sweep_id: str | None = None  # defaults to the latest sweep

    def __post_init__(self):
        if self.kind is VerdictKind.SUCCESS and self.chosen_image is None:
            raise ContractError("Success verdict requires chosen_image")
        if self.kind is VerdictKind.OVERFIT and self.intention is None:
            raise ContractError("Overfit verdict requires an edit intention")

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "chosen_image": self.chosen_image,
            "intention": self.intention.value if self.intention else None,
            "sweep_id": self.sweep_id,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Verdict":
        try:
            kind = VerdictKind(data["kind"])
        except (KeyError, ValueError) as exc:
            raise ContractError(f"bad verdict kind {data.get('kind')!r}") from exc
        intention = data.get("intention")
        return cls(
            kind=kind,
            chosen_image=data.get("chosen_image"),
            intention=EditIntention(intention) if intention else None,
            sweep_id=data.get("sweep_id"),
        )


class EditMode(str, Enum):
    SUBTRACTION = "Subtraction"
    PROJECTION = "Projection"


@dataclass(frozen=True)
class NextAction:
    """What the workflow recommends running next."""

    mode: EditMode
    strategy: ForgettingStrategy
    grid: GammaGrid
    needs_manual: bool = False

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "strategy": strategy_to_wire(self.strategy),
            "grid": list(self.grid.values),
            "needs_manual": self.needs_manual,
        }

    @classmethod
    def from_json(cls, data: dict) -> "NextAction":
        return cls(
            mode=EditMode(data["mode"]),
            strategy=strategy_from_wire(data["strategy"]),
            grid=GammaGrid.from_values(data["grid"]),
            needs_manual=bool(data.get("needs_manual", False)),
        )


class StateName(str, Enum):
    CREATED = "Created"
    FINETUNING = "Finetuning"
    AWAITING_VERDICT = "AwaitingVerdict"
    DONE = "Done"
    FAILED = "Failed"


# Created -> Finetuning -> AwaitingVerdict -> {AwaitingVerdict, Done, Failed};
# aborts may fail a session from any non-terminal state.
_TRANSITIONS: dict[StateName, set[StateName]] = {
    StateName.CREATED: {StateName.FINETUNING, StateName.FAILED},
    StateName.FINETUNING: {StateName.AWAITING_VERDICT, StateName.FAILED},
    StateName.AWAITING_VERDICT: {StateName.AWAITING_VERDICT, StateName.DONE, StateName.FAILED},
    StateName.DONE: set(),
    StateName.FAILED: set(),
}


def check_transition(current: StateName, new: StateName) -> None:
    if new not in _TRANSITIONS[current]:
        raise StateError(f"illegal transition {current.value} -> {new.value}")


@dataclass(frozen=True)
class WorkflowState:
    value: StateName
    last_recommendation: NextAction | None = None

    def to_json(self) -> dict:
        return {
            "value": self.value.value,
            "last_recommendation": self.last_recommendation.to_json() if self.last_recommendation else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "WorkflowState":
        rec = data.get("last_recommendation")
        return cls(
            value=StateName(data["value"]),
            last_recommendation=NextAction.from_json(rec) if rec else None,
        )


@dataclass(frozen=True)
class SweepResult:
    """One batch of edited images indexed by edit strength. Immutable once written."""

    id: str
    mode: EditMode
    strategy: ForgettingStrategy
    grid: tuple[float, ...]
    image_ids: tuple[str | None, ...]  # None marks a failed slot
    errors: tuple[str | None, ...]
    sampler: SamplerSettings
    elapsed: float

    def __post_init__(self):
        if len(self.image_ids) != len(self.grid) or len(self.errors) != len(self.grid):
            raise ContractError("sweep image/error count must equal grid length")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "mode": self.mode.value,
            "strategy": strategy_to_wire(self.strategy),
            "grid": list(self.grid),
            "images": list(self.image_ids),
            "errors": list(self.errors),
            "sampler": self.sampler.to_json(),
            "elapsed": self.elapsed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SweepResult":
        return cls(
            id=data["id"],
            mode=EditMode(data["mode"]),
            strategy=strategy_from_wire(data["strategy"]),
            grid=tuple(float(v) for v in data["grid"]),
            image_ids=tuple(data["images"]),
            errors=tuple(data.get("errors") or [None] * len(data["images"])),
            sampler=SamplerSettings.from_json(data["sampler"]),
            elapsed=float(data.get("elapsed", 0.0)),
        )


@dataclass
class EditSession:
    """Persisted record of one image's editing lifecycle."""

    id: str
    input_image: str  # artifact id
    source_prompt: Prompt
    target_prompt: Prompt
    original_checkpoint: str | None = None
    finetuned_checkpoint: str | None = None
    optimized_embedding: str | None = None
    sweeps: list[SweepResult] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    state: WorkflowState = field(default_factory=lambda: WorkflowState(StateName.CREATED))
    sampler_seed: int = 0
    final_choice: dict | None = None  # {"sweep_id": str, "image_index": int}
    created_at: str = field(default_factory=utc_now)
    updated_at: str = field(default_factory=utc_now)

    def advance(self, new_state: StateName, recommendation: NextAction | None = None) -> None:
        check_transition(self.state.value, new_state)
        keep = recommendation if recommendation is not None else self.state.last_recommendation
        self.state = WorkflowState(new_state, keep)
        self.updated_at = utc_now()

    def latest_sweep(self) -> SweepResult | None:
        return self.sweeps[-1] if self.sweeps else None

    def find_sweep(self, sweep_id: str) -> SweepResult | None:
        return next((s for s in self.sweeps if s.id == sweep_id), None)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "input_image": self.input_image,
            "source_prompt": self.source_prompt.to_json(),
            "target_prompt": self.target_prompt.to_json(),
            "checkpoints": {
                "original": self.original_checkpoint,
                "finetuned": self.finetuned_checkpoint,
            },
            "optimized_embedding": self.optimized_embedding,
            "sweeps": [s.to_json() for s in self.sweeps],
            "verdicts": [v.to_json() for v in self.verdicts],
            "state": self.state.to_json(),
            "sampler_seed": self.sampler_seed,
            "final_choice": self.final_choice,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EditSession":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ContractError(f"unsupported session schema_version {version!r}")
        checkpoints = data.get("checkpoints") or {}
        return cls(
            id=data["id"],
            input_image=data["input_image"],
            source_prompt=Prompt.from_json(data["source_prompt"]),
            target_prompt=Prompt.from_json(data["target_prompt"]),
            original_checkpoint=checkpoints.get("original"),
            finetuned_checkpoint=checkpoints.get("finetuned"),
            optimized_embedding=data.get("optimized_embedding"),
            sweeps=[SweepResult.from_json(s) for s in data.get("sweeps", [])],
            verdicts=[Verdict.from_json(v) for v in data.get("verdicts", [])],
            state=WorkflowState.from_json(data["state"]),
            sampler_seed=int(data.get("sampler_seed", 0)),
            final_choice=data.get("final_choice"),
            created_at=data["created_at"],
            updated_at=data["updated_at"],
        )


__all__ = [
    "EditIntention",
    "EditMode",
    "EditSession",
    "NextAction",
    "Prompt",
    "PromptOrigin",
    "StateName",
    "SweepResult",
    "Verdict",
    "VerdictKind",
    "WorkflowState",
    "check_transition",
]
