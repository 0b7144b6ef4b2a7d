"""Forgedit workbench: one-shot joint finetuning, embedding-arithmetic
sweeps, and parameter-role-aware forgetting merges for text-guided image
editing, orchestrated by a human-in-the-loop workflow."""

from .algebra import GammaGrid, ProjectionCoefficients, gamma_grid, vector_project, vector_subtract
from .backend import BackendSpec, ToyBackend
from .captioner import CaptionerConfig, generate_source_prompt
from .finetune import FinetuneConfig, FinetuneResult, finetune, reconstruction_error
from .forgetting import (
    ForgettingStrategy,
    Keep,
    StrategyKind,
    apply_strategy,
    decision_table,
    diff_checkpoints,
)
from .params import Kind, ParameterRole, ParameterSnapshot, Region, classify_parameter
from .pipeline import Pipeline, default_action, manifest_for_session, replay_session
from .sampling import SamplerSettings, sample
from .sessions import (
    EditIntention,
    EditMode,
    EditSession,
    NextAction,
    Prompt,
    PromptOrigin,
    StateName,
    SweepResult,
    Verdict,
    VerdictKind,
    WorkflowState,
)
from .store import ArtifactStore

__version__ = "0.1.0"

__all__ = [
    "ArtifactStore",
    "BackendSpec",
    "CaptionerConfig",
    "EditIntention",
    "EditMode",
    "EditSession",
    "FinetuneConfig",
    "FinetuneResult",
    "ForgettingStrategy",
    "GammaGrid",
    "Keep",
    "Kind",
    "NextAction",
    "ParameterRole",
    "ParameterSnapshot",
    "Pipeline",
    "ProjectionCoefficients",
    "Prompt",
    "PromptOrigin",
    "Region",
    "SamplerSettings",
    "StateName",
    "StrategyKind",
    "SweepResult",
    "ToyBackend",
    "Verdict",
    "VerdictKind",
    "WorkflowState",
    "apply_strategy",
    "classify_parameter",
    "decision_table",
    "default_action",
    "diff_checkpoints",
    "finetune",
    "gamma_grid",
    "generate_source_prompt",
    "manifest_for_session",
    "reconstruction_error",
    "replay_session",
    "sample",
    "vector_project",
    "vector_subtract",
]
