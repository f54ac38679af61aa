"""HTTP facade over the engine: the versioned JSON API plus static hosting
for the operator console.

Stage execution is synchronous inside the request (the design trades latency
for an observable, queue-free contract; clients poll job state). Per-job
mutations are serialized with an in-process lock per job id — the manifest
has a single writer, reads need no lock.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .config import RunConfig
from .engine import Engine, create_demo_job
from .errors import BindError, PartForgeError, SchemaViolation
from .images import ImageArtifact
from .store import ArtifactStore, create_job, load_job, recover_jobs

_HTTP_STATUS = {
    "JobNotFound": 404,
    "UnknownStage": 404,
    "IllegalTransition": 409,
    "DuplicatePartId": 422,
    "EmptyPartList": 422,
    "SchemaViolation": 422,
    "PartIdMismatch": 422,
    "ImmutableField": 422,
    "BadRange": 422,
    "ImageDecodeError": 422,
    "DimensionMismatch": 422,
    "NoJsonBlock": 502,
    "BackendTimeout": 504,
    "HttpStatus": 502,
    "PayloadTooLarge": 502,
    "ContentRefused": 502,
    "TileDecodeError": 502,
}

def build_app(
    config: RunConfig,
    store: ArtifactStore | None = None,
    engine: Engine | None = None,
) -> FastAPI:
    store = store or ArtifactStore(config.store_path)
    engine = engine or Engine(config, store)
    recover_jobs(store)  # a previous process may have died mid-stage

    app = FastAPI(title="partforge", version="1.0")
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def job_lock(job_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(job_id, threading.Lock())

    @app.exception_handler(PartForgeError)
    async def pipeline_error(request: Request, exc: PartForgeError):
        return JSONResponse(
            status_code=_HTTP_STATUS.get(exc.code, 500),
            content={"error": exc.code, "detail": str(exc)},
        )

    @app.get("/v1/health")
    def health():
        return {"ok": True, "v": 1}

    @app.post("/v1/jobs", status_code=201)
    def post_job(body: dict = Body(...)):
        seed = int(body.get("seed", 7))
        gates = body.get("approval_gates", config.approval_gates)
        if body.get("demo") or "image" not in body:
            job = create_demo_job(config, store, seed=seed)
            return job.to_dict()
        if "parts" not in body:
            raise SchemaViolation("parts", "a non-demo job needs a parts list")
        image = ImageArtifact.from_base64(body["image"])
        job = create_job(store, image, body["parts"], seed, approval_gates=gates)
        return job.to_dict()

    @app.get("/v1/jobs")
    def list_jobs():
        return {"jobs": [load_job(store, jid).to_dict() for jid in store.list_jobs()]}

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        return load_job(store, job_id).to_dict()

    @app.post("/v1/jobs/{job_id}/stages/{stage_op}")
    def stage_op(job_id: str, stage_op: str):
        stage, _, op = stage_op.partition(":")
        if op not in ("start", "approve", "reject"):
            raise SchemaViolation("op", f"stage action must be start|approve|reject, got {op!r}")
        with job_lock(job_id):
            job = load_job(store, job_id)
            if op == "start":
                job = engine.run_stage(job, stage)
            elif op == "approve":
                job = engine.approve(job, stage)
            else:
                job = engine.reject(job, stage)
        return job.to_dict()

    @app.put("/v1/jobs/{job_id}/prompts/{part_id}")
    def put_prompt(job_id: str, part_id: str, body: dict = Body(...)):
        fields = body.get("fields")
        if not isinstance(fields, dict) or not fields:
            raise SchemaViolation("fields", "body must carry a non-empty fields object")
        base = body.get("base_hash")
        with job_lock(job_id):
            job = load_job(store, job_id)
            current = job.artifacts.get(f"promptgen/{part_id}", {}).get("hash")
            if base is not None and base != current:
                # edit raced another writer; client must refetch and retry
                return JSONResponse(
                    status_code=409,
                    content={
                        "error": "StaleEdit",
                        "detail": f"prompt is {current}, edit was based on {base}",
                    },
                )
            job = engine.edit_prompt(job, part_id, fields)
        return job.to_dict()

    @app.get("/v1/jobs/{job_id}/artifacts")
    def job_artifacts(job_id: str):
        job = load_job(store, job_id)
        return {"artifacts": job.artifacts, "tombstones": list(job.tombstones)}

    media_cache: dict[str, str] = {}  # digest -> media type, learned from manifests

    def media_type_of(digest: str) -> str:
        if digest not in media_cache:
            for jid in store.list_jobs():
                for ref in load_job(store, jid).artifacts.values():
                    media_cache[ref["hash"]] = ref.get("media", "application/octet-stream")
        return media_cache.get(digest, "application/octet-stream")

    @app.get("/v1/artifacts/{digest}")
    def get_artifact(digest: str):
        if not store.has(digest):
            return JSONResponse(status_code=404, content={"error": "NotFound", "detail": digest})
        return Response(content=store.get_bytes(digest), media_type=media_type_of(digest))

    dist = config.console_dist or "console/dist"
    if Path(dist).is_dir():
        app.mount("/console", StaticFiles(directory=dist, html=True), name="console")

    return app


def serve(config: RunConfig, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    try:
        uvicorn.run(build_app(config), host=host, port=port, log_level="warning")
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
