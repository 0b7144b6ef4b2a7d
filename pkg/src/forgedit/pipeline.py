"""Workflow orchestration: finetune once, sweep, judge, repeat until success.

The decision loop: a fresh session gets one joint finetune and a default
subtraction sweep (strategy ``none``, eight gammas from 0.8 to 1.6). The
operator then judges the sweep. Overfit verdicts route to a default
forgetting strategy chosen by edit intention (structure -> ``encoderattn``,
appearance -> ``decoderattn``), falling back to the alternate default and
finally to a manual custom rule. Underfit verdicts switch to vector
projection, carrying the last sweep's strategy. Success ends the session.
"""
from __future__ import annotations

import time
import uuid

import numpy as np

from . import algebra
from .backend import ToyBackend
from .captioner import CaptionerConfig, generate_source_prompt
from .checkpoints import (
    embedding_from_bytes,
    embedding_to_bytes,
    snapshot_from_bytes,
    snapshot_to_bytes,
)
from .errors import ContractError, ForgeditError, StateError
from .finetune import FinetuneConfig, finetune
from .forgetting import ForgettingStrategy, StrategyKind, apply_strategy
from .images import decode_png, encode_png
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
)
from .store import ArtifactStore


def default_action() -> NextAction:
    return NextAction(
        mode=EditMode.SUBTRACTION,
        strategy=ForgettingStrategy.none(),
        grid=algebra.gamma_grid(),
    )


def _new_session_id() -> str:
    return uuid.uuid4().hex[:12]


class _SnapshotCache:
    """Tiny FIFO cache for deserialized checkpoints; sound because artifact
    ids are content-addressed and snapshots are never mutated in place."""

    def __init__(self, capacity: int = 8):
        self.capacity = capacity
        self._entries: dict[str, object] = {}

    def get_or_load(self, store: ArtifactStore, artifact_id: str):
        snapshot = self._entries.get(artifact_id)
        if snapshot is None:
            snapshot = snapshot_from_bytes(store.load_artifact("checkpoint", artifact_id))
            if len(self._entries) >= self.capacity:
                self._entries.pop(next(iter(self._entries)))
            self._entries[artifact_id] = snapshot
        return snapshot


_shared_snapshot_cache = _SnapshotCache()


class Pipeline:
    """Single-writer orchestration over one store and one backend."""

    def __init__(
        self,
        store: ArtifactStore,
        backend: ToyBackend,
        captioner: CaptionerConfig | None = None,
        finetune_config: FinetuneConfig | None = None,
        sampler_defaults: SamplerSettings | None = None,
    ):
        self.store = store
        self.backend = backend
        self.captioner = captioner if captioner is not None else CaptionerConfig()
        self.finetune_config = finetune_config if finetune_config is not None else FinetuneConfig()
        self.sampler_defaults = sampler_defaults if sampler_defaults is not None else SamplerSettings()

    # ------------------------------------------------------------- life cycle

    def register_session(
        self,
        image: np.ndarray,
        target_prompt: Prompt | str,
        source_prompt: Prompt | str | None = None,
        session_id: str | None = None,
    ) -> EditSession:
        """Create the session record: image stored, prompts resolved, state Created."""
        image = self.backend.check_image(np.asarray(image, dtype=np.float32))
        image_id = self.store.store_artifact("image", encode_png(image))
        if isinstance(target_prompt, str):
            target_prompt = Prompt(text=target_prompt, origin=PromptOrigin.USER)
        if isinstance(source_prompt, str):
            source_prompt = Prompt(text=source_prompt, origin=PromptOrigin.USER)
        if source_prompt is None:
            source_prompt = generate_source_prompt(image, self.captioner)
        session = EditSession(
            id=session_id or _new_session_id(),
            input_image=image_id,
            source_prompt=source_prompt,
            target_prompt=target_prompt,
            sampler_seed=self.sampler_defaults.seed,
        )
        self.store.save_session(session)
        self._log_state(session)
        return session

    def prepare_session(self, session_id: str) -> EditSession:
        """Finetune once and run the queued default first sweep."""
        session = self.store.load_session(session_id)
        if session.state.value is not StateName.CREATED:
            raise StateError(f"session {session_id} is {session.state.value.value}; finetuning runs exactly once")
        session.advance(StateName.FINETUNING)
        self.store.save_session(session)
        self._log_state(session)

        image = decode_png(self.store.load_artifact("image", session.input_image))
        original = self.backend.pretrained()
        session.original_checkpoint = self.store.store_artifact("checkpoint", snapshot_to_bytes(original))
        result = finetune(image, session.source_prompt.text, self.finetune_config, self.backend)
        session.finetuned_checkpoint = self.store.store_artifact(
            "checkpoint", snapshot_to_bytes(result.finetuned_params)
        )
        session.optimized_embedding = self.store.store_artifact(
            "embedding", embedding_to_bytes(result.optimized_embedding)
        )
        self.store.save_loss_curve(session.id, result.loss_curve)

        action = default_action()
        session.advance(StateName.AWAITING_VERDICT, recommendation=action)
        self.store.save_session(session)
        self._log_state(session)
        self.run_sweep(session.id, action)
        return self.store.load_session(session.id)

    def create_session(
        self,
        image: np.ndarray,
        target_prompt: Prompt | str,
        source_prompt: Prompt | str | None = None,
        session_id: str | None = None,
    ) -> EditSession:
        """Synchronous full flow: register, finetune, default sweep."""
        session = self.register_session(image, target_prompt, source_prompt, session_id)
        return self.prepare_session(session.id)

    # ----------------------------------------------------------------- sweeps

    def run_sweep(
        self,
        session_id: str,
        action: NextAction,
        sampler: SamplerSettings | None = None,
    ) -> SweepResult:
        """Merge once per the action's strategy, then sample one image per grid value."""
        session = self.store.load_session(session_id)
        if session.state.value is not StateName.AWAITING_VERDICT:
            raise StateError(f"cannot sweep while session is {session.state.value.value}")
        if action.strategy.kind is StrategyKind.CUSTOM and action.strategy.custom_rule is None:
            raise ContractError("custom strategy needs an explicit rule before sweeping")

        started = time.monotonic()
        original = _shared_snapshot_cache.get_or_load(self.store, session.original_checkpoint)
        finetuned = _shared_snapshot_cache.get_or_load(self.store, session.finetuned_checkpoint)
        merged = apply_strategy(original, finetuned, action.strategy)
        e_opt = embedding_from_bytes(self.store.load_artifact("embedding", session.optimized_embedding))
        e_tgt = self.backend.encode_text(session.target_prompt.text)
        settings = sampler if sampler is not None else SamplerSettings(
            seed=session.sampler_seed,
            steps=self.sampler_defaults.steps,
            guidance_scale=self.sampler_defaults.guidance_scale,
        )

        image_ids: list[str | None] = []
        errors: list[str | None] = []
        for value in action.grid:
            try:
                if action.mode is EditMode.SUBTRACTION:
                    e_edit = algebra.vector_subtract(e_opt, e_tgt, value)
                else:
                    e_edit = algebra.vector_project(
                        e_opt, e_tgt, algebra.ProjectionCoefficients(alpha=1.0, beta=value)
                    )
                edited = sample(merged, e_edit.astype(np.float32), settings, self.backend)
                image_ids.append(self.store.store_artifact("image", encode_png(edited)))
                errors.append(None)
            except ForgeditError as exc:
                image_ids.append(None)
                errors.append(str(exc))

        result = SweepResult(
            id=f"sweep-{len(session.sweeps):03d}",
            mode=action.mode,
            strategy=action.strategy,
            grid=tuple(action.grid.values),
            image_ids=tuple(image_ids),
            errors=tuple(errors),
            sampler=settings,
            elapsed=time.monotonic() - started,
        )
        session.sweeps.append(result)
        session.advance(StateName.AWAITING_VERDICT)
        self.store.save_session(session)
        self.store.append_event(
            session.id,
            {
                "event": "sweep",
                "action": action.to_json(),
                "sampler": settings.to_json(),
                "sweep_id": result.id,
                "images": list(image_ids),
            },
        )
        return result

    # --------------------------------------------------------------- verdicts

    def record_verdict(self, session_id: str, verdict: Verdict) -> NextAction | None:
        """Apply the operator's judgment; returns the recommended next action,
        or None when the session is done."""
        session = self.store.load_session(session_id)
        if session.state.value is not StateName.AWAITING_VERDICT:
            raise StateError(f"cannot record a verdict while session is {session.state.value.value}")
        if not session.sweeps:
            raise StateError("no sweep to judge yet")

        action: NextAction | None = None
        if verdict.kind is VerdictKind.SUCCESS:
            sweep = session.find_sweep(verdict.sweep_id) if verdict.sweep_id else session.latest_sweep()
            if sweep is None:
                raise ContractError(f"verdict references unknown sweep {verdict.sweep_id!r}")
            if not 0 <= verdict.chosen_image < len(sweep.image_ids):
                raise ContractError(f"chosen_image {verdict.chosen_image} outside sweep of {len(sweep.image_ids)}")
            if sweep.image_ids[verdict.chosen_image] is None:
                raise ContractError(f"chosen_image {verdict.chosen_image} is a failed slot")
            session.verdicts.append(verdict)
            session.final_choice = {"sweep_id": sweep.id, "image_index": verdict.chosen_image}
            session.advance(StateName.DONE)
        elif verdict.kind is VerdictKind.OVERFIT:
            session.verdicts.append(verdict)
            action = self._overfit_action(session, verdict.intention)
            session.advance(StateName.AWAITING_VERDICT, recommendation=action)
        else:  # Underfit
            session.verdicts.append(verdict)
            carried = session.latest_sweep().strategy
            action = NextAction(mode=EditMode.PROJECTION, strategy=carried, grid=algebra.gamma_grid())
            session.advance(StateName.AWAITING_VERDICT, recommendation=action)

        self.store.save_session(session)
        self.store.append_event(
            session.id,
            {
                "event": "verdict",
                "verdict": verdict.to_json(),
                "next_action": action.to_json() if action else None,
            },
        )
        return action

    def _overfit_action(self, session: EditSession, intention: EditIntention) -> NextAction:
        preferred = (
            ForgettingStrategy.encoder_attn()
            if intention is EditIntention.STRUCTURE
            else ForgettingStrategy.decoder_attn()
        )
        alternate = (
            ForgettingStrategy.decoder_attn()
            if intention is EditIntention.STRUCTURE
            else ForgettingStrategy.encoder_attn()
        )
        used = {sweep.strategy.kind for sweep in session.sweeps}
        if preferred.kind not in used:
            chosen = preferred
        elif alternate.kind not in used:
            chosen = alternate
        else:
            return NextAction(
                mode=EditMode.SUBTRACTION,
                strategy=ForgettingStrategy.custom(None),
                grid=algebra.gamma_grid(),
                needs_manual=True,
            )
        return NextAction(mode=EditMode.SUBTRACTION, strategy=chosen, grid=algebra.gamma_grid())

    # ---------------------------------------------------------------- helpers

    def _log_state(self, session: EditSession) -> None:
        self.store.append_event(session.id, {"event": "state", "state": session.state.value.value})

    def fail_session(self, session_id: str, reason: str) -> None:
        session = self.store.load_session(session_id)
        if session.state.value in (StateName.DONE, StateName.FAILED):
            return
        session.advance(StateName.FAILED)
        self.store.save_session(session)
        self.store.append_event(session.id, {"event": "state", "state": StateName.FAILED.value, "reason": reason})


def manifest_for_session(store: ArtifactStore, session: EditSession) -> dict:
    """Deterministic inventory of every artifact a session produced."""
    return {
        "state": session.state.value.value,
        "session_inputs": {
            "source_prompt": session.source_prompt.text,
            "target_prompt": session.target_prompt.text,
        },
        "input_image": session.input_image,
        "checkpoints": {
            "original": session.original_checkpoint,
            "finetuned": session.finetuned_checkpoint,
        },
        "optimized_embedding": session.optimized_embedding,
        "sweeps": [
            {
                "mode": sweep.mode.value,
                "strategy": sweep.strategy.wire_name,
                "grid": list(sweep.grid),
                "images": list(sweep.image_ids),
            }
            for sweep in session.sweeps
        ],
        "final_choice": session.final_choice,
    }


def replay_session(source_store: ArtifactStore, session_id: str, pipeline: Pipeline) -> EditSession:
    """Re-execute a persisted session's action log on another pipeline.

    The first sweep re-runs automatically during preparation; later sweeps
    and verdicts replay from the event log in order.
    """
    source = source_store.load_session(session_id)
    image = decode_png(source_store.load_artifact("image", source.input_image))
    replayed = pipeline.register_session(
        image,
        source.target_prompt,
        source.source_prompt,
        session_id=source.id,
    )
    pipeline.prepare_session(replayed.id)
    events = source_store.read_events(session_id)
    sweep_events = [e for e in events if e["event"] == "sweep"]
    for event in events:
        if event["event"] == "sweep" and event is not sweep_events[0]:
            pipeline.run_sweep(
                replayed.id,
                NextAction.from_json(event["action"]),
                SamplerSettings.from_json(event["sampler"]) if event.get("sampler") else None,
            )
        elif event["event"] == "verdict":
            pipeline.record_verdict(replayed.id, Verdict.from_json(event["verdict"]))
    return pipeline.store.load_session(replayed.id)
