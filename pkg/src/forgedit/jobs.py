"""Background execution of finetunes and sweeps with polling-friendly status.

Job records persist in the store, so a restarted service can resume queued
work and mark interrupted runs failed. One job runs per session at a time;
status transitions are monotone and progress never decreases.
"""
from __future__ import annotations

import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor

from .errors import ContractError, StateError
from .pipeline import Pipeline
from .sampling import SamplerSettings
from .sessions import NextAction, utc_now
from .store import ArtifactStore

_STATE_ORDER = {"queued": 0, "running": 1, "done": 2, "failed": 2}
TERMINAL_STATES = ("done", "failed")


class JobRunner:
    def __init__(self, store: ArtifactStore, pipeline: Pipeline, max_workers: int = 2):
        self.store = store
        self.pipeline = pipeline
        self._executor = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="forgedit-job")
        self._lock = threading.Lock()
        self._active: dict[str, str] = {}  # session_id -> job_id
        self._futures: dict[str, Future] = {}

    # ------------------------------------------------------------ submissions

    def submit_prepare(self, session_id: str) -> str:
        return self._submit("finetune", session_id, {})

    def submit_sweep(self, session_id: str, action: NextAction, sampler: SamplerSettings | None = None) -> str:
        payload = {"action": action.to_json()}
        if sampler is not None:
            payload["sampler"] = sampler.to_json()
        return self._submit("sweep", session_id, payload)

    def _submit(self, kind: str, session_id: str, payload: dict, job_id: str | None = None) -> str:
        with self._lock:
            active = self._active.get(session_id)
            if active is not None:
                raise StateError(f"session {session_id} already has active job {active}")
            job_id = job_id or uuid.uuid4().hex[:12]
            self.store.save_job(
                {
                    "job_id": job_id,
                    "kind": kind,
                    "session_id": session_id,
                    "state": "queued",
                    "progress": 0.0,
                    "message": "queued",
                    "payload": payload,
                    "created_at": utc_now(),
                    "updated_at": utc_now(),
                }
            )
            self._active[session_id] = job_id
            self._futures[job_id] = self._executor.submit(self._run, job_id)
        return job_id

    # --------------------------------------------------------------- lifecycle

    def _update(self, job_id: str, state: str | None = None, progress: float | None = None, message: str | None = None) -> dict:
        job = self.store.load_job(job_id)
        if state is not None and _STATE_ORDER[state] >= _STATE_ORDER[job["state"]]:
            job["state"] = state
        if progress is not None:
            job["progress"] = max(float(job["progress"]), min(1.0, progress))
        if message is not None:
            job["message"] = message
        job["updated_at"] = utc_now()
        self.store.save_job(job)
        return job

    def _run(self, job_id: str) -> None:
        job = self.store.load_job(job_id)
        session_id = job["session_id"]
        try:
            self._update(job_id, state="running", progress=0.05, message="running")
            if job["kind"] == "finetune":
                self._update(job_id, progress=0.1, message="finetuning")
                self.pipeline.prepare_session(session_id)
                self._update(job_id, state="done", progress=1.0, message="finetune and first sweep complete")
            elif job["kind"] == "sweep":
                action = NextAction.from_json(job["payload"]["action"])
                sampler = (
                    SamplerSettings.from_json(job["payload"]["sampler"])
                    if job["payload"].get("sampler")
                    else None
                )
                result = self.pipeline.run_sweep(session_id, action, sampler)
                self._update(job_id, state="done", progress=1.0, message=f"sweep {result.id} complete")
            else:
                raise ContractError(f"unknown job kind {job['kind']!r}")
        except Exception as exc:  # persist the failure; surface via polling
            self._update(job_id, state="failed", progress=1.0, message=str(exc))
            if job["kind"] == "finetune":
                try:
                    self.pipeline.fail_session(session_id, str(exc))
                except Exception:
                    pass
        finally:
            with self._lock:
                if self._active.get(session_id) == job_id:
                    del self._active[session_id]

    # ------------------------------------------------------------------ query

    def status(self, job_id: str) -> dict:
        job = self.store.load_job(job_id)
        return {
            "job_id": job["job_id"],
            "kind": job["kind"],
            "session_id": job["session_id"],
            "state": job["state"],
            "progress": job["progress"],
            "message": job["message"],
        }

    def active_job_for(self, session_id: str) -> str | None:
        with self._lock:
            return self._active.get(session_id)

    def wait(self, job_id: str, timeout: float | None = None) -> dict:
        future = self._futures.get(job_id)
        if future is not None:
            future.result(timeout=timeout)
        return self.status(job_id)

    # --------------------------------------------------------------- recovery

    def recover(self) -> None:
        """Resume queued jobs from a previous process; fail interrupted ones."""
        for job in self.store.list_jobs():
            if job["state"] == "running":
                job["state"] = "failed"
                job["message"] = "interrupted by restart"
                job["updated_at"] = utc_now()
                self.store.save_job(job)
            elif job["state"] == "queued":
                try:
                    self._submit(job["kind"], job["session_id"], job.get("payload", {}), job_id=job["job_id"])
                except StateError:
                    pass  # another queued job for the session got there first

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)


__all__ = ["JobRunner", "TERMINAL_STATES"]
