"""Scripted end-to-end case execution: one JSON file describes an input
image, the prompts, fixed seeds, and a sequence of verdicts; running it
yields a deterministic manifest of every artifact id produced.

Case schema (all seeds fixed, so two runs give identical manifests):

    {
      "image": {"builtin": "polar_bear"} | {"path": "input.png"},
      "target_prompt": "A polar bear raising its hand",
      "source_prompt": null,
      "caption_for_image": "a polar bear on the ice field",
      "session_id": "optional-stable-id",
      "backend_seed": 0,
      "finetune": {"steps": 200, "seed": 7},
      "sampler": {"seed": 0, "steps": 10, "guidance_scale": 7.5},
      "script": [
        {"verdict": {"kind": "Overfit", "intention": "Structure"}, "run_recommended": true},
        {"verdict": {"kind": "Success", "chosen_image": 3}}
      ]
    }
"""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .backend import BackendSpec, ToyBackend
from .captioner import CaptionerConfig
from .errors import ContractError
from .finetune import FinetuneConfig
from .images import decode_png, image_digest
from .pipeline import Pipeline, manifest_for_session
from .sampling import SamplerSettings
from .sessions import Verdict
from .store import ArtifactStore
from .fixtures import builtin_image


def load_case(path: str | Path) -> dict:
    path = Path(path)
    try:
        case = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ContractError(f"cannot read case file {path}: {exc}") from exc
    if "target_prompt" not in case:
        raise ContractError("case file needs a target_prompt")
    if "image" not in case:
        raise ContractError("case file needs an image entry")
    return case


def _case_image(spec: dict, case_dir: Path) -> np.ndarray:
    if "builtin" in spec:
        return builtin_image(spec["builtin"])
    if "path" in spec:
        path = Path(spec["path"])
        if not path.is_absolute():
            path = case_dir / path
        return decode_png(path.read_bytes())
    raise ContractError(f"case image must give 'builtin' or 'path', got {sorted(spec)}")


def run_case(case: dict, store_dir: str | Path, case_dir: str | Path = ".") -> dict:
    """Execute the whole scripted flow against a fresh or existing store."""
    image = _case_image(case["image"], Path(case_dir))

    stub_table = {}
    if case.get("caption_for_image"):
        stub_table[image_digest(image)] = case["caption_for_image"]
    captioner = CaptionerConfig(mode="stub", stub_table=stub_table)

    backend = ToyBackend(BackendSpec(seed=int(case.get("backend_seed", 0))))
    finetune_config = dataclasses.replace(FinetuneConfig(), **case.get("finetune", {}))
    sampler = SamplerSettings.from_json(case.get("sampler", {}))

    pipeline = Pipeline(
        store=ArtifactStore(store_dir),
        backend=backend,
        captioner=captioner,
        finetune_config=finetune_config,
        sampler_defaults=sampler,
    )
    session = pipeline.create_session(
        image,
        case["target_prompt"],
        case.get("source_prompt"),
        session_id=case.get("session_id"),
    )

    for step in case.get("script", []):
        if "verdict" not in step:
            raise ContractError(f"script steps need a verdict, got {sorted(step)}")
        action = pipeline.record_verdict(session.id, Verdict.from_json(step["verdict"]))
        if step.get("run_recommended"):
            if action is None:
                raise ContractError("run_recommended requested but the session is done")
            pipeline.run_sweep(session.id, action)

    final = pipeline.store.load_session(session.id)
    return manifest_for_session(pipeline.store, final)
