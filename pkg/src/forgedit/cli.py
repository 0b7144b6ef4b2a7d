"""Command-line interface.

    forgedit create   --image in.png --target "..." [--source "..."]
    forgedit sweep    --session ID [--strategy encoderattn|decoderattn|none|custom:rule.json]
                      [--mode subtraction|projection] [--gammas 0.8,1.0,1.2]
    forgedit verdict  --session ID --kind Success|Overfit|Underfit
                      [--intention Structure|Appearance] [--chosen N]
    forgedit show     --session ID
    forgedit serve    [--host 127.0.0.1] [--port 8000] [--static DIR]
    forgedit run-case --case case.json [--manifest-out out.json]

Exit code 0 on success, 2 on contract errors, 1 on operational failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .algebra import GammaGrid, gamma_grid
from .cases import load_case, run_case
from .config import build_backend, build_captioner, resolve_store_dir
from .errors import (
    ConfigurationError,
    ContractError,
    ForgeditError,
    NotFoundError,
    StateError,
)
from .forgetting import strategy_from_wire
from .images import decode_png, image_digest
from .pipeline import Pipeline
from .sampling import SamplerSettings
from .sessions import EditIntention, EditMode, NextAction, Verdict, VerdictKind
from .store import ArtifactStore

CONTRACT_EXIT = 2


def _build_pipeline(args, stub_table: dict[str, str] | None = None) -> Pipeline:
    store = ArtifactStore(resolve_store_dir(args.store))
    return Pipeline(
        store=store,
        backend=build_backend(args.backend),
        captioner=build_captioner(stub_table),
    )


def _cmd_create(args) -> int:
    image = decode_png(Path(args.image).read_bytes())
    stub_table = {image_digest(image): args.caption} if args.caption else None
    pipeline = _build_pipeline(args, stub_table)
    session = pipeline.create_session(image, args.target, args.source, session_id=args.session_id)
    print(f"session {session.id} state {session.state.value.value}")
    sweep = session.latest_sweep()
    if sweep:
        for value, image_id in zip(sweep.grid, sweep.image_ids):
            print(f"  gamma {value:g}: {pipeline.store.artifact_path('image', image_id)}")
    return 0


def _parse_mode(raw: str) -> EditMode:
    token = raw.strip().lower()
    for mode in EditMode:
        if mode.value.lower() == token:
            return mode
    raise ContractError(f"unknown mode {raw!r}")


def _cmd_sweep(args) -> int:
    pipeline = _build_pipeline(args)
    strategy = strategy_from_wire(args.strategy)
    grid = (
        GammaGrid.from_values(float(v) for v in args.gammas.split(","))
        if args.gammas
        else gamma_grid()
    )
    action = NextAction(mode=_parse_mode(args.mode), strategy=strategy, grid=grid)
    sampler = None
    if args.seed is not None or args.steps is not None or args.guidance is not None:
        session = pipeline.store.load_session(args.session)
        defaults = SamplerSettings(seed=session.sampler_seed)
        sampler = SamplerSettings(
            seed=args.seed if args.seed is not None else defaults.seed,
            steps=args.steps if args.steps is not None else defaults.steps,
            guidance_scale=args.guidance if args.guidance is not None else defaults.guidance_scale,
        )
    result = pipeline.run_sweep(args.session, action, sampler)
    for value, image_id, error in zip(result.grid, result.image_ids, result.errors):
        label = "beta" if result.mode is EditMode.PROJECTION else "gamma"
        if image_id is None:
            print(f"  {label} {value:g}: FAILED {error}")
        else:
            print(f"  {label} {value:g}: {pipeline.store.artifact_path('image', image_id)}")
    return 0


def _cmd_verdict(args) -> int:
    pipeline = _build_pipeline(args)
    try:
        kind = VerdictKind(args.kind.capitalize())
    except ValueError:
        raise ContractError(f"unknown verdict kind {args.kind!r}") from None
    intention = None
    if args.intention:
        try:
            intention = EditIntention(args.intention.capitalize())
        except ValueError:
            raise ContractError(f"unknown intention {args.intention!r}") from None
    verdict = Verdict(kind=kind, chosen_image=args.chosen, intention=intention, sweep_id=args.sweep_id)
    action = pipeline.record_verdict(args.session, verdict)
    if action is None:
        print(json.dumps({"done": True}))
    else:
        print(json.dumps(action.to_json(), indent=2))
    return 0


def _cmd_show(args) -> int:
    pipeline = _build_pipeline(args)
    session = pipeline.store.load_session(args.session)
    print(json.dumps(session.to_json(), indent=2, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .jobs import JobRunner
    from .service import create_app

    pipeline = _build_pipeline(args)
    runner = JobRunner(pipeline.store, pipeline)
    runner.recover()
    static_dir = args.static
    if static_dir is None and Path("frontend/dist").is_dir():
        static_dir = "frontend/dist"
    app = create_app(pipeline, runner, static_dir=static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_run_case(args) -> int:
    case_path = Path(args.case)
    case = load_case(case_path)
    store_dir = resolve_store_dir(args.store)
    manifest = run_case(case, store_dir, case_dir=case_path.parent)
    payload = json.dumps(manifest, indent=2, sort_keys=True)
    if args.manifest_out:
        Path(args.manifest_out).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forgedit", description="text-guided image editing workbench")
    parser.add_argument("--store", default=None, help="artifact store directory (or FORGEDIT_STORE_DIR)")
    parser.add_argument("--backend", default=None, help="toy (default) or remote")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("create", help="create a session: caption, finetune, default sweep")
    p.add_argument("--image", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--source", default=None)
    p.add_argument("--caption", default=None, help="stub caption for this image (offline use)")
    p.add_argument("--session-id", default=None)
    p.set_defaults(fn=_cmd_create)

    p = sub.add_parser("sweep", help="run an edit sweep")
    p.add_argument("--session", required=True)
    p.add_argument("--strategy", default="none")
    p.add_argument("--mode", default="subtraction")
    p.add_argument("--gammas", default=None, help="comma-separated grid override")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--guidance", type=float, default=None)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("verdict", help="record the operator's judgment")
    p.add_argument("--session", required=True)
    p.add_argument("--kind", required=True)
    p.add_argument("--intention", default=None)
    p.add_argument("--chosen", type=int, default=None)
    p.add_argument("--sweep-id", default=None)
    p.set_defaults(fn=_cmd_verdict)

    p = sub.add_parser("show", help="print a session document")
    p.add_argument("--session", required=True)
    p.set_defaults(fn=_cmd_show)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default=None, help="directory of built cockpit assets")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("run-case", help="execute a scripted case end to end")
    p.add_argument("--case", required=True)
    p.add_argument("--manifest-out", default=None)
    p.set_defaults(fn=_cmd_run_case)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ContractError, StateError, NotFoundError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONTRACT_EXIT
    except ForgeditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONTRACT_EXIT


if __name__ == "__main__":
    sys.exit(main())
