"""Acceptance gates for the whole workbench, one test per criterion.

Each criterion prints one PASS line with its runtime (FAIL surfaces as a
normal assertion error). Run with ``pytest tests/test_acceptance.py -s`` to
see the lines stream, or ``pytest -rP`` to collect them at the end.
"""
from __future__ import annotations

import io
import json
import os
import shutil
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

import forgedit.pipeline as pipeline_module
from forgedit.algebra import gamma_grid, orthogonal_residual, vector_subtract
from forgedit.backend import ToyBackend
from forgedit.captioner import CaptionerConfig
from forgedit.cases import load_case, run_case
from forgedit.checkpoints import snapshot_from_bytes, snapshot_to_bytes
from forgedit.finetune import FinetuneConfig, finetune, reconstruction_error
from forgedit.fixtures import polar_bear_image, smooth_pattern
from forgedit.forgetting import (
    ForgettingStrategy,
    Keep,
    apply_strategy,
    decision_table,
    merge_checkpoint_files,
)
from forgedit.images import encode_png, image_digest
from forgedit.jobs import JobRunner
from forgedit.params import ALL_ROLES, Kind, ParameterRole, ParameterSnapshot, Region
from forgedit.pipeline import Pipeline, manifest_for_session
from forgedit.sampling import SamplerSettings
from forgedit.service import create_app
from forgedit.sessions import (
    EditIntention,
    EditMode,
    NextAction,
    StateName,
    Verdict,
    VerdictKind,
)
from forgedit.store import ArtifactStore
from tests.conftest import POLAR_CAPTION

CASE_PATH = Path(__file__).resolve().parent.parent / "cases" / "polar_bear.json"


@contextmanager
def criterion(number: int, title: str, budget_seconds: float):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL - {title}")
        raise
    elapsed = time.monotonic() - started
    print(f"ACCEPTANCE {number} PASS ({elapsed:.2f}s < {budget_seconds:g}s) - {title}")
    assert elapsed < budget_seconds, f"criterion {number} exceeded its {budget_seconds}s budget"


# ---------------------------------------------------------------- helpers


def _brute_force_merge(original, finetuned, rule_by_key: dict[str, str]) -> dict[str, np.ndarray]:
    """Independent re-derivation: raw-name scan + rule lookup, nothing shared
    with the implementation."""
    merged = {}
    for name in original.names():
        region = name.split(".", 1)[0]
        kind = "attention" if "attn" in name else "other"
        source = original if rule_by_key[f"{region}.{kind}"] == "original" else finetuned
        merged[name] = source[name]
    return merged


def _random_tagged_pair(rng: np.random.Generator) -> tuple[ParameterSnapshot, ParameterSnapshot]:
    subs = ["conv.weight", "conv.bias", "temb.weight", "selfattn.q", "selfattn.v", "crossattn.k", "crossattn.o"]
    entries = {}
    count = int(rng.integers(4, 12))
    for i in range(count):
        region = ["encoder", "middle", "decoder"][int(rng.integers(3))]
        sub = subs[int(rng.integers(len(subs)))]
        name = f"{region}.{i}.{sub}"
        shape = tuple(int(d) for d in rng.integers(1, 5, size=int(rng.integers(1, 3))))
        entries[name] = rng.standard_normal(shape).astype(np.float32)
    original = ParameterSnapshot(entries)
    finetuned = ParameterSnapshot(
        {n: entries[n] + rng.standard_normal(entries[n].shape).astype(np.float32) for n in entries},
        dict(original.roles),
    )
    return original, finetuned


def _perturbed(snapshot: ParameterSnapshot, seed: int) -> ParameterSnapshot:
    rng = np.random.default_rng(seed)
    return ParameterSnapshot(
        {n: snapshot[n] + rng.standard_normal(snapshot[n].shape).astype(np.float32) * 0.1
         for n in snapshot.names()},
        dict(snapshot.roles),
    )


# -------------------------------------------------------------- criterion 1


def test_acceptance_1_forgetting_merge_oracle(backend):
    with criterion(1, "forgetting merge matches brute-force re-derivation bit-exactly", 5.0):
        rng = np.random.default_rng(2024)
        keeps = ("original", "finetuned")
        for _ in range(200):
            original, finetuned = _random_tagged_pair(rng)
            rule_by_key = {role.key: keeps[int(rng.integers(2))] for role in ALL_ROLES}
            strategy = ForgettingStrategy.custom(
                {role: Keep(rule_by_key[role.key]) for role in ALL_ROLES}
            )
            merged = apply_strategy(original, finetuned, strategy)
            expected = _brute_force_merge(original, finetuned, rule_by_key)
            assert set(merged.names()) == set(expected)
            for name in merged.names():
                assert np.array_equal(merged[name], expected[name]), name

        original = backend.pretrained()
        finetuned = _perturbed(original, seed=11)
        builtin_rules = {
            ForgettingStrategy.none(): {role.key: "finetuned" for role in ALL_ROLES},
            ForgettingStrategy.encoder_attn(): {
                "encoder.attention": "finetuned", "encoder.other": "original",
                "middle.attention": "finetuned", "middle.other": "finetuned",
                "decoder.attention": "finetuned", "decoder.other": "finetuned",
            },
            ForgettingStrategy.decoder_attn(): {
                "decoder.attention": "finetuned", "decoder.other": "original",
                "middle.attention": "finetuned", "middle.other": "finetuned",
                "encoder.attention": "finetuned", "encoder.other": "finetuned",
            },
        }
        for strategy, rule_by_key in builtin_rules.items():
            merged = apply_strategy(original, finetuned, strategy)
            expected = _brute_force_merge(original, finetuned, rule_by_key)
            for name in merged.names():
                assert np.array_equal(merged[name], expected[name]), (strategy.kind, name)

        # the verbatim encoderattn rule, cell by cell
        table = decision_table(ForgettingStrategy.encoder_attn())
        assert table[ParameterRole(Region.ENCODER, Kind.ATTENTION)] is Keep.FINETUNED
        assert table[ParameterRole(Region.ENCODER, Kind.OTHER)] is Keep.ORIGINAL
        assert table[ParameterRole(Region.DECODER, Kind.ATTENTION)] is Keep.FINETUNED
        assert table[ParameterRole(Region.DECODER, Kind.OTHER)] is Keep.FINETUNED


# -------------------------------------------------------------- criterion 2


def test_acceptance_2_embedding_algebra_identities():
    with criterion(2, "embedding-algebra identities and residual orthogonality", 1.0):
        rng = np.random.default_rng(7)
        for _ in range(50):
            e_opt = rng.standard_normal((8, 16))
            e_tgt = rng.standard_normal((8, 16))
            assert np.max(np.abs(vector_subtract(e_opt, e_tgt, 0.0) - e_opt)) <= 1e-6
            assert np.max(np.abs(vector_subtract(e_opt, e_tgt, 1.0) - e_tgt)) <= 1e-6

        for _ in range(1000):
            e_opt = rng.standard_normal((8, 16))
            e_tgt = rng.standard_normal((8, 16))
            e_orth = orthogonal_residual(e_opt, e_tgt)
            inner = abs(float(np.dot(e_orth.ravel(), e_opt.ravel())))
            assert inner <= 1e-5 * np.linalg.norm(e_orth) * np.linalg.norm(e_opt)

        grid = gamma_grid()
        assert len(grid) == 8
        assert grid.values[0] == 0.8
        assert grid.values[-1] == 1.6


# -------------------------------------------------------------- criterion 3


def test_acceptance_3_gradient_correctness(backend):
    with criterion(3, "analytic gradients match central finite differences (1e-4 rel)", 30.0):
        base = backend.pretrained()
        params = ParameterSnapshot(
            {n: base[n].astype(np.float64) for n in base.names()}, dict(base.roles)
        )
        embedding = backend.encode_text(POLAR_CAPTION).astype(np.float64)
        image = polar_bear_image().astype(np.float64)
        noise = np.random.default_rng(5).standard_normal((16, 16, 3))
        timestep = 20
        _, grads, emb_grad = backend.loss_and_gradients_for_noise(params, embedding, image, noise, timestep)

        h = 1e-5
        rng = np.random.default_rng(99)
        for name in rng.choice(params.names(), size=12, replace=False):
            arr = params[name]
            idx = np.unravel_index(int(rng.integers(arr.size)), arr.shape)

            def loss_at(delta: float) -> float:
                entries = {n: params[n] for n in params.names()}
                bumped = arr.copy()
                bumped[idx] += delta
                entries[name] = bumped
                return backend.loss_for_noise(
                    ParameterSnapshot(entries, dict(params.roles)), embedding, image, noise, timestep
                )

            fd = (loss_at(+h) - loss_at(-h)) / (2 * h)
            ad = grads[name][idx]
            assert abs(fd - ad) <= 1e-4 * max(abs(fd), abs(ad), 1e-8), name

        for _ in range(6):
            idx = (int(rng.integers(8)), int(rng.integers(16)))
            bumped = embedding.copy()
            bumped[idx] += h
            plus = backend.loss_for_noise(params, bumped, image, noise, timestep)
            bumped[idx] -= 2 * h
            minus = backend.loss_for_noise(params, bumped, image, noise, timestep)
            fd = (plus - minus) / (2 * h)
            assert abs(fd - emb_grad[idx]) <= 1e-4 * max(abs(fd), abs(emb_grad[idx]), 1e-8), idx


# -------------------------------------------------------------- criterion 4


def test_acceptance_4_finetune_convergence_and_memorization(backend):
    with criterion(4, "200-step finetune halves the loss, memorizes, and is deterministic", 60.0):
        image = smooth_pattern()
        config = FinetuneConfig(steps=200, seed=7)
        first = finetune(image, POLAR_CAPTION, config, backend)
        losses = [loss for _, loss in first.loss_curve]
        early, late = float(np.mean(losses[:10])), float(np.mean(losses[-10:]))
        assert late <= 0.5 * early, f"loss ratio {late / early:.3f} above 0.5"

        e_src = backend.encode_text(POLAR_CAPTION)
        before = reconstruction_error(backend.pretrained(), e_src, image, backend, probe_seed=99)
        after = reconstruction_error(
            first.finetuned_params, first.optimized_embedding, image, backend, probe_seed=99
        )
        assert after < before, f"reconstruction did not improve: {before:.4f} -> {after:.4f}"

        second = finetune(image, POLAR_CAPTION, config, backend)
        assert np.max(np.abs(second.optimized_embedding - first.optimized_embedding)) <= 1e-6
        for name in first.finetuned_params.names():
            delta = np.max(np.abs(second.finetuned_params[name] - first.finetuned_params[name]))
            assert delta <= 1e-6, (name, delta)


# -------------------------------------------------------------- criterion 5


_ENUM_VERDICTS = (
    Verdict(kind=VerdictKind.SUCCESS, chosen_image=0),
    Verdict(kind=VerdictKind.OVERFIT, intention=EditIntention.STRUCTURE),
    Verdict(kind=VerdictKind.OVERFIT, intention=EditIntention.APPEARANCE),
    Verdict(kind=VerdictKind.UNDERFIT),
)


def _expected_action(used_kinds: set, last_strategy: ForgettingStrategy, verdict: Verdict):
    """The documented decision table, restated independently."""
    if verdict.kind is VerdictKind.SUCCESS:
        return None
    if verdict.kind is VerdictKind.UNDERFIT:
        return NextAction(EditMode.PROJECTION, last_strategy, gamma_grid())
    preferred = (
        ForgettingStrategy.encoder_attn()
        if verdict.intention is EditIntention.STRUCTURE
        else ForgettingStrategy.decoder_attn()
    )
    alternate = (
        ForgettingStrategy.decoder_attn()
        if verdict.intention is EditIntention.STRUCTURE
        else ForgettingStrategy.encoder_attn()
    )
    if preferred.kind not in used_kinds:
        return NextAction(EditMode.SUBTRACTION, preferred, gamma_grid())
    if alternate.kind not in used_kinds:
        return NextAction(EditMode.SUBTRACTION, alternate, gamma_grid())
    return NextAction(EditMode.SUBTRACTION, ForgettingStrategy.custom(None), gamma_grid(), needs_manual=True)


def test_acceptance_5_workflow_decision_table(tmp_path, backend):
    with criterion(5, "exhaustive verdict sequences (len <= 4) follow the decision table", 5.0):
        image = polar_bear_image()
        captioner = CaptionerConfig(mode="stub", stub_table={image_digest(image): POLAR_CAPTION})
        fast_sampler = SamplerSettings(seed=0, steps=1, guidance_scale=1.0)

        finetune_calls = {"n": 0}
        real_finetune = pipeline_module.finetune

        def counting_finetune(*args, **kwargs):
            finetune_calls["n"] += 1
            return real_finetune(*args, **kwargs)

        pipeline_module.finetune = counting_finetune
        try:
            base_dir = tmp_path / "walk-base"
            base = Pipeline(
                store=ArtifactStore(base_dir),
                backend=backend,
                captioner=captioner,
                finetune_config=FinetuneConfig(steps=2, seed=7),
                sampler_defaults=fast_sampler,
            )
            session = base.create_session(image, "A polar bear raising its hand", session_id="walk")
            base_finetuned = session.finetuned_checkpoint

            from forgedit.algebra import GammaGrid

            def clone_store(src: Path, dst: Path) -> None:
                # artifacts are immutable content-addressed files: hardlink them;
                # the appended event log needs a real copy
                shutil.copytree(src, dst, copy_function=os.link)
                events = dst / "sessions" / "walk.events.jsonl"
                if events.exists():
                    content = events.read_bytes()
                    events.unlink()
                    events.write_bytes(content)

            def walk(store_dir: Path, depth: int) -> int:
                visited = 0
                if depth == 4:
                    return visited
                for i, verdict in enumerate(_ENUM_VERDICTS):
                    child_dir = store_dir.parent / f"{store_dir.name}-{depth}{i}"
                    clone_store(store_dir, child_dir)
                    child = Pipeline(
                        store=ArtifactStore(child_dir),
                        backend=backend,
                        captioner=captioner,
                        finetune_config=FinetuneConfig(steps=2, seed=7),
                        sampler_defaults=fast_sampler,
                    )
                    before = child.store.load_session("walk")
                    used = {s.strategy.kind for s in before.sweeps}
                    expected = _expected_action(used, before.sweeps[-1].strategy, verdict)
                    actual = child.record_verdict("walk", verdict)
                    assert actual == expected, (depth, verdict.kind, verdict.intention)
                    visited += 1
                    after = child.store.load_session("walk")
                    assert after.finetuned_checkpoint == base_finetuned
                    if actual is None:
                        assert after.state.value is StateName.DONE
                        continue
                    if not actual.needs_manual:
                        child.run_sweep(
                            "walk",
                            NextAction(actual.mode, actual.strategy, GammaGrid((0.8,))),
                        )
                    visited += walk(child_dir, depth + 1)
                return visited

            total = walk(base_dir, 0)
            assert total == 4 * (1 + 3 + 9 + 27)  # every sequence up to length 4
            assert finetune_calls["n"] == 1, "finetune must run exactly once per session"
        finally:
            pipeline_module.finetune = real_finetune


# -------------------------------------------------------------- criterion 6


def test_acceptance_6_end_to_end_replay(tmp_path, capsys):
    with criterion(6, "polar-bear case replays identically; HTTP flow matches in-process", 180.0):
        from forgedit.cli import main as cli_main

        manifest_path = tmp_path / "manifest-cli.json"
        exit_code = cli_main(
            [
                "--store", str(tmp_path / "store-a"),
                "run-case", "--case", str(CASE_PATH), "--manifest-out", str(manifest_path),
            ]
        )
        capsys.readouterr()
        assert exit_code == 0
        manifest_a = json.loads(manifest_path.read_text())
        case = load_case(CASE_PATH)
        manifest_b = run_case(case, tmp_path / "store-b", case_dir=CASE_PATH.parent)
        assert json.dumps(manifest_a, sort_keys=True) == json.dumps(manifest_b, sort_keys=True)
        assert manifest_a["state"] == "Done"
        assert [s["strategy"] for s in manifest_a["sweeps"]] == ["none", "encoderattn"]
        assert all(len(s["images"]) == 8 for s in manifest_a["sweeps"])

        # same flow, scripted over the HTTP API with identical seeds/config
        image = polar_bear_image()
        pipeline = Pipeline(
            store=ArtifactStore(tmp_path / "store-http"),
            backend=ToyBackend(),
            captioner=CaptionerConfig(mode="stub", stub_table={image_digest(image): POLAR_CAPTION}),
            finetune_config=FinetuneConfig(steps=200, seed=7),
            sampler_defaults=SamplerSettings(seed=0, steps=10, guidance_scale=7.5),
        )
        runner = JobRunner(pipeline.store, pipeline)
        app = create_app(pipeline, runner)
        with TestClient(app) as client:
            created = client.post(
                "/api/sessions",
                files={"image": ("bear.png", io.BytesIO(encode_png(image)), "image/png")},
                data={"target_prompt": "A polar bear raising its hand"},
            ).json()
            runner.wait(created["job_id"], timeout=120)
            action = client.post(
                f"/api/sessions/{created['id']}/verdict",
                json={"kind": "Overfit", "intention": "Structure"},
            ).json()
            assert action["strategy"] == "encoderattn"
            sweep_job = client.post(
                f"/api/sessions/{created['id']}/sweeps",
                json={"mode": action["mode"], "strategy": action["strategy"], "grid": action["grid"]},
            ).json()
            runner.wait(sweep_job["job_id"], timeout=120)
            client.post(
                f"/api/sessions/{created['id']}/verdict",
                json={"kind": "Success", "chosen_image": 3},
            )
        runner.shutdown()
        http_manifest = manifest_for_session(
            pipeline.store, pipeline.store.load_session(created["id"])
        )
        assert json.dumps(http_manifest, sort_keys=True) == json.dumps(manifest_a, sort_keys=True)


# -------------------------------------------------------------- criterion 7


def test_acceptance_7_checkpoint_format(backend):
    with criterion(7, "checkpoint round trip is bit-exact; merge commutes with save", 30.0):
        original = backend.pretrained()
        finetuned = _perturbed(original, seed=3)

        payload = snapshot_to_bytes(original)
        loaded = snapshot_from_bytes(payload)
        for name in original.names():
            assert np.array_equal(loaded[name], original[name]), name
        assert snapshot_to_bytes(loaded) == payload

        strategies = [
            ForgettingStrategy.none(),
            ForgettingStrategy.encoder_attn(),
            ForgettingStrategy.decoder_attn(),
            ForgettingStrategy.custom(
                {role: (Keep.ORIGINAL if role.kind is Kind.ATTENTION else Keep.FINETUNED) for role in ALL_ROLES}
            ),
        ]
        for strategy in strategies:
            merged_then_saved = snapshot_to_bytes(apply_strategy(original, finetuned, strategy))
            saved_then_merged = merge_checkpoint_files(
                snapshot_to_bytes(original), snapshot_to_bytes(finetuned), strategy
            )
            assert merged_then_saved == saved_then_merged, strategy.kind
