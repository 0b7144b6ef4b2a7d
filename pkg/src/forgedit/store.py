"""Content-addressed artifact store and session persistence.

Layout under one root directory:

    artifacts/<kind>/<sha256>   opaque payloads (image, embedding, checkpoint, session)
    sessions/<id>.json          mutable session document, schema_version 1
    sessions/<id>.events.jsonl  append-only event log (state changes, actions, verdicts)
    sessions/<id>.loss.json     finetune loss curve
    jobs/<id>.json              queued/running/done job records

Writes go through a temp file plus atomic rename; concurrent reads are safe,
writes to one session are serialized by the caller.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .errors import ContractError, NotFoundError, StorageError
from .sessions import EditSession

ARTIFACT_KINDS = ("image", "embedding", "checkpoint", "session")


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -------------------------------------------------------------- artifacts

    def store_artifact(self, kind: str, payload: bytes) -> str:
        if kind not in ARTIFACT_KINDS:
            raise ContractError(f"unknown artifact kind {kind!r}")
        if not payload:
            raise ContractError("artifact payload must be non-empty")
        artifact_id = hashlib.sha256(payload).hexdigest()
        path = self.artifact_path(kind, artifact_id)
        if not path.exists():
            _atomic_write(path, payload)
        return artifact_id

    def load_artifact(self, kind: str, artifact_id: str) -> bytes:
        path = self.artifact_path(kind, artifact_id)
        if not path.exists():
            raise NotFoundError(f"no {kind} artifact {artifact_id}")
        try:
            return path.read_bytes()
        except OSError as exc:
            raise StorageError(f"cannot read {path}: {exc}") from exc

    def has_artifact(self, kind: str, artifact_id: str) -> bool:
        return self.artifact_path(kind, artifact_id).exists()

    def artifact_path(self, kind: str, artifact_id: str) -> Path:
        if kind not in ARTIFACT_KINDS:
            raise ContractError(f"unknown artifact kind {kind!r}")
        return self.root / "artifacts" / kind / artifact_id

    # --------------------------------------------------------------- sessions

    def _session_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.json"

    def save_session(self, session: EditSession) -> None:
        """Persist the session, enforcing its append-only invariants."""
        path = self._session_path(session.id)
        if path.exists():
            previous = self.load_session(session.id)
            if previous.original_checkpoint is not None and (
                session.original_checkpoint != previous.original_checkpoint
            ):
                raise ContractError("original checkpoint reference is immutable once written")
            old_sweeps = [s.id for s in previous.sweeps]
            new_sweeps = [s.id for s in session.sweeps]
            if new_sweeps[: len(old_sweeps)] != old_sweeps:
                raise ContractError("sweeps are append-only")
            if len(session.verdicts) < len(previous.verdicts):
                raise ContractError("verdicts are append-only")
        payload = json.dumps(session.to_json(), indent=2, sort_keys=True).encode("utf-8")
        _atomic_write(path, payload)

    def load_session(self, session_id: str) -> EditSession:
        path = self._session_path(session_id)
        if not path.exists():
            raise NotFoundError(f"no session {session_id}")
        return EditSession.from_json(json.loads(path.read_text(encoding="utf-8")))

    def list_sessions(self) -> list[EditSession]:
        folder = self.root / "sessions"
        if not folder.exists():
            return []
        sessions = [
            self.load_session(p.stem)
            for p in sorted(folder.glob("*.json"))
            if not p.name.endswith(".loss.json")
        ]
        return sorted(sessions, key=lambda s: (s.created_at, s.id))

    # -------------------------------------------------------------- event log

    def _events_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.events.jsonl"

    def append_event(self, session_id: str, event: dict) -> None:
        path = self._events_path(session_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        record = dict(event)
        record["seq"] = len(self.read_events(session_id))
        try:
            with path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True) + "\n")
        except OSError as exc:
            raise StorageError(f"cannot append event for {session_id}: {exc}") from exc

    def read_events(self, session_id: str) -> list[dict]:
        path = self._events_path(session_id)
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]

    # ------------------------------------------------------------- loss curve

    def save_loss_curve(self, session_id: str, curve: list[tuple[int, float]]) -> None:
        path = self.root / "sessions" / f"{session_id}.loss.json"
        _atomic_write(path, json.dumps([[s, l] for s, l in curve]).encode("utf-8"))

    def load_loss_curve(self, session_id: str) -> list[tuple[int, float]]:
        path = self.root / "sessions" / f"{session_id}.loss.json"
        if not path.exists():
            raise NotFoundError(f"no loss curve for session {session_id}")
        return [(int(s), float(l)) for s, l in json.loads(path.read_text(encoding="utf-8"))]

    # ------------------------------------------------------------------- jobs

    def _job_path(self, job_id: str) -> Path:
        return self.root / "jobs" / f"{job_id}.json"

    def save_job(self, job: dict) -> None:
        _atomic_write(self._job_path(job["job_id"]), json.dumps(job, indent=2, sort_keys=True).encode("utf-8"))

    def load_job(self, job_id: str) -> dict:
        path = self._job_path(job_id)
        if not path.exists():
            raise NotFoundError(f"no job {job_id}")
        return json.loads(path.read_text(encoding="utf-8"))

    def list_jobs(self) -> list[dict]:
        folder = self.root / "jobs"
        if not folder.exists():
            return []
        return [json.loads(p.read_text(encoding="utf-8")) for p in sorted(folder.glob("*.json"))]
