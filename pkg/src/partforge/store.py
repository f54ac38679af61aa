"""Content-addressed artifact store and job manifest persistence.

Layout:
    <root>/blobs/<sha256>           immutable payload bytes
    <root>/jobs/<job_id>/manifest.json

Blobs are keyed by the hash of their bytes, so writing identical content
twice is a no-op and determinism checks reduce to comparing hash sets.
Manifests are written atomically (temp file + rename); a manifest never
references a blob that has not been fully written.
"""

from __future__ import annotations

import hashlib
import json
import os
import uuid
from dataclasses import replace
from pathlib import Path

from .errors import JobNotFound, StoreCorrupt
from .images import ImageArtifact, Provenance
from .model import PartSpec, PipelineJob, new_job

MEDIA_PNG = "image/png"
MEDIA_JSON = "application/json"
MEDIA_OBJ = "model/obj"
MEDIA_MTL = "model/mtl"
MEDIA_TEXT = "text/plain"


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "blobs").mkdir(parents=True, exist_ok=True)
        (self.root / "jobs").mkdir(parents=True, exist_ok=True)

    # blobs

    def put_bytes(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.root / "blobs" / digest
        if not path.exists():
            tmp = path.with_name(f".{digest}.{os.getpid()}.{uuid.uuid4().hex[:8]}")
            tmp.write_bytes(data)
            tmp.rename(path)
        return digest

    def get_bytes(self, digest: str) -> bytes:
        path = self.root / "blobs" / digest
        if not path.is_file():
            raise StoreCorrupt(f"missing blob {digest}")
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != digest:
            raise StoreCorrupt(f"blob {digest} fails its hash")
        return data

    def has(self, digest: str) -> bool:
        return (self.root / "blobs" / digest).is_file()

    def put_json(self, obj) -> str:
        return self.put_bytes(json.dumps(obj, indent=2, sort_keys=True).encode())

    def get_json(self, digest: str):
        try:
            return json.loads(self.get_bytes(digest))
        except json.JSONDecodeError as exc:
            raise StoreCorrupt(f"blob {digest} is not JSON: {exc}") from exc

    def put_image(self, image: ImageArtifact) -> str:
        return self.put_bytes(image.to_png())

    def get_image(self, digest: str, provenance: Provenance = Provenance()) -> ImageArtifact:
        return ImageArtifact.from_png(self.get_bytes(digest), provenance=provenance)

    # job manifests

    def _manifest_path(self, job_id: str) -> Path:
        return self.root / "jobs" / job_id / "manifest.json"

    def list_jobs(self) -> list[str]:
        jobs = self.root / "jobs"
        return sorted(p.name for p in jobs.iterdir() if (p / "manifest.json").is_file())


def image_ref(digest: str, provenance: Provenance | None = None) -> dict:
    ref = {"hash": digest, "media": MEDIA_PNG}
    if provenance is not None:
        ref["provenance"] = provenance.to_dict()
    return ref


def persist_job(store: ArtifactStore, job: PipelineJob) -> None:
    path = store._manifest_path(job.job_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(job.to_dict(), indent=2, sort_keys=True).encode()
    tmp = path.with_name(f".manifest.{os.getpid()}.{uuid.uuid4().hex[:8]}")
    tmp.write_bytes(payload)
    tmp.rename(path)


def load_job(store: ArtifactStore, job_id: str) -> PipelineJob:
    path = store._manifest_path(job_id)
    if not path.is_file():
        raise JobNotFound(job_id)
    try:
        data = json.loads(path.read_bytes())
    except json.JSONDecodeError as exc:
        raise StoreCorrupt(f"manifest for {job_id} is not JSON: {exc}") from exc
    if not isinstance(data, dict) or data.get("v") != 1:
        raise StoreCorrupt(f"manifest for {job_id} has unsupported version")
    try:
        job = PipelineJob.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise StoreCorrupt(f"manifest for {job_id} is malformed: {exc}") from exc
    if job.job_id != job_id:
        raise StoreCorrupt(f"manifest id {job.job_id} does not match directory {job_id}")
    return job


def create_job(
    store: ArtifactStore,
    input_image: ImageArtifact,
    parts,
    seed: int,
    approval_gates=None,
    job_id: str | None = None,
) -> PipelineJob:
    """Persist the input image and a fresh manifest; returns the job."""
    parts = tuple(p if isinstance(p, PartSpec) else PartSpec.from_dict(p) for p in parts)
    digest = store.put_image(input_image)
    job = new_job(job_id or f"j{uuid.uuid4().hex[:12]}", digest, parts, seed, approval_gates)
    job = job.with_artifact("input", image_ref(digest))
    persist_job(store, job)
    return job


def recover_jobs(store: ArtifactStore) -> list[str]:
    """Demote any stage left running by a dead process back to pending.

    Stage execution persists artifacts before advancing the stage, so a
    manifest that still says running references no partial outputs; the
    stage can simply be retried.
    """
    touched = []
    for job_id in store.list_jobs():
        job = load_job(store, job_id)
        stages = {
            s: (replace(st, state="pending") if st.state == "running" else st)
            for s, st in job.stages.items()
        }
        if stages != dict(job.stages):
            persist_job(store, replace(job, stages=stages))
            touched.append(job_id)
    return touched
