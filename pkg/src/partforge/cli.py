"""Headless command line: batch runs, single stages, inspection, export,
diffusion statistics, and the HTTP server.

Exit codes: 0 success, 2 illegal stage transition (the scriptable "not yet"
signal), 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import RunConfig, load_config
from .diffusion import gaussian_sampler_stats
from .engine import Engine, create_demo_job
from .errors import IllegalTransition, PartForgeError
from .images import ImageArtifact
from .model import STAGES, PipelineJob
from .store import ArtifactStore, create_job, load_job

_MEAN_TOL = 0.01
_VAR_RELTOL = 0.03


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partforge", description="part-aware image-to-3D pipeline")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--store", help="override the artifact store path")
    p.add_argument("--seed", type=int, default=7, help="job seed (new jobs)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline to completion")
    run.add_argument("--job", help="existing job id (default: create the demo job)")
    run.add_argument("--yes", action="store_true", help="auto-approve the review gates")

    stage = sub.add_parser("stage", help="run a single stage")
    stage.add_argument("stage", choices=STAGES)
    stage.add_argument("--job", required=True)

    for verb in ("approve", "reject"):
        g = sub.add_parser(verb, help=f"{verb} a stage awaiting review")
        g.add_argument("stage", choices=STAGES)
        g.add_argument("--job", required=True)

    ins = sub.add_parser("inspect", help="print a job manifest")
    ins.add_argument("job")

    exp = sub.add_parser("export", help="copy assembled meshes + scene manifest")
    exp.add_argument("--job", required=True)
    exp.add_argument("--out", required=True)

    diff = sub.add_parser("diffcheck", help="diffusion sampler statistics check")
    diff.add_argument("--samples", type=int, default=100_000)

    sub.add_parser("demo", help="create the built-in two-part demo job")

    create = sub.add_parser("create", help="create a job from an image and parts file")
    create.add_argument("--image", required=True, help="input PNG")
    create.add_argument("--parts", required=True, help="JSON list of part specs")

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8080)
    return p


def _load_runtime(args) -> tuple[RunConfig, ArtifactStore, Engine]:
    config = load_config(args.config) if args.config else RunConfig()
    if args.store:
        config = replace(config, store_path=args.store)
    store = ArtifactStore(config.store_path)
    return config, store, Engine(config, store)


def _emit(args, payload: dict, human: str) -> None:
    print(json.dumps(payload, sort_keys=True) if args.json else human)


def _stage_summary(job: PipelineJob) -> str:
    return " ".join(f"{s}={st.state}" for s, st in job.stages.items())


def _cmd_run(args) -> int:
    config, store, engine = _load_runtime(args)
    job = load_job(store, args.job) if args.job else create_demo_job(config, store, args.seed)
    job = engine.run_to_completion(job, auto_approve=args.yes)
    waiting = [s for s in STAGES if job.stage(s).state == "awaiting_approval"]
    if waiting:
        _emit(
            args,
            {"job_id": job.job_id, "awaiting": waiting[0], "stages": _states(job)},
            f"{job.job_id}: {waiting[0]} awaiting approval"
            f" (approve it or rerun with --yes)",
        )
        return 0
    _emit(
        args,
        job.to_dict(),
        f"{job.job_id}: done, {len(job.artifacts)} artifacts ({_stage_summary(job)})",
    )
    return 0


def _states(job: PipelineJob) -> dict:
    return {s: st.state for s, st in job.stages.items()}


def _cmd_stage(args) -> int:
    _, store, engine = _load_runtime(args)
    job = engine.run_stage(load_job(store, args.job), args.stage)
    _emit(args, job.to_dict(), f"{job.job_id}: {args.stage} -> {job.stage(args.stage).state}")
    return 0


def _cmd_gate(args) -> int:
    _, store, engine = _load_runtime(args)
    act = engine.approve if args.command == "approve" else engine.reject
    job = act(load_job(store, args.job), args.stage)
    _emit(args, job.to_dict(), f"{job.job_id}: {args.stage} -> {job.stage(args.stage).state}")
    return 0


def _cmd_inspect(args) -> int:
    _, store, _ = _load_runtime(args)
    manifest = load_job(store, args.job).to_dict()
    print(json.dumps(manifest, sort_keys=True) if args.json else json.dumps(manifest, indent=2, sort_keys=True))
    return 0


def _cmd_export(args) -> int:
    _, store, _ = _load_runtime(args)
    job = load_job(store, args.job)
    if job.stage("assembly").state != "done":
        print(f"error: assembly is {job.stage('assembly').state}, nothing to export", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for key, ref in sorted(job.artifacts.items()):
        if key == "assembly/scene.json":
            name = "scene.json"
        elif key.startswith("assembly/"):
            name = key.split("/", 1)[1].replace("/", ".")  # ball/mesh.obj -> ball.mesh.obj
        else:
            continue
        (out / name).write_bytes(store.get_bytes(ref["hash"]))
        written.append(name)
    _emit(args, {"job_id": job.job_id, "files": written}, f"exported {', '.join(written)} to {out}")
    return 0


def _cmd_diffcheck(args) -> int:
    config, _, _ = _load_runtime(args)
    stats = gaussian_sampler_stats(
        mu0=2.0,
        sigma0_sq=0.25,
        sched=config.schedule.build(),
        n_samples=args.samples,
        rng_seed=args.seed,
    )
    mean_err = abs(stats["mean"] - stats["mu0"])
    var_rel = abs(stats["variance"] / stats["sigma0_sq"] - 1.0)
    ok = mean_err <= _MEAN_TOL and var_rel <= _VAR_RELTOL
    stats.update(mean_err=mean_err, var_rel_err=var_rel, passed=ok)
    _emit(
        args,
        stats,
        f"mean {stats['mean']:.4f} (err {mean_err:.4f} <= {_MEAN_TOL}), "
        f"variance {stats['variance']:.4f} (rel err {var_rel:.4f} <= {_VAR_RELTOL}): "
        + ("PASS" if ok else "FAIL"),
    )
    return 0 if ok else 1


def _cmd_demo(args) -> int:
    config, store, _ = _load_runtime(args)
    job = create_demo_job(config, store, args.seed)
    _emit(args, job.to_dict(), f"created {job.job_id} ({_stage_summary(job)})")
    return 0


def _cmd_create(args) -> int:
    config, store, _ = _load_runtime(args)
    image = ImageArtifact.from_png(Path(args.image).read_bytes())
    parts = json.loads(Path(args.parts).read_text())
    job = create_job(store, image, parts, args.seed, approval_gates=config.approval_gates)
    _emit(args, job.to_dict(), f"created {job.job_id} ({_stage_summary(job)})")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve  # keep fastapi/uvicorn out of batch commands

    config, _, _ = _load_runtime(args)
    serve(config, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "stage": _cmd_stage,
    "approve": _cmd_gate,
    "reject": _cmd_gate,
    "inspect": _cmd_inspect,
    "export": _cmd_export,
    "diffcheck": _cmd_diffcheck,
    "demo": _cmd_demo,
    "create": _cmd_create,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except IllegalTransition as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except PartForgeError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
