"""Job domain model: parts, stage state machine, invalidation, seeds.

A job walks five stages in fixed order.  PromptGen and Isolation carry
human approval gates by default; the rest are mechanical.  All types are
immutable; transitions return updated copies.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .errors import (
    BadRange,
    DuplicatePartId,
    EmptyPartList,
    IllegalTransition,
    SchemaViolation,
    UnknownStage,
)

STAGES = ("promptgen", "isolation", "multiview", "reconstruction", "assembly")
STATES = ("pending", "running", "awaiting_approval", "done", "failed")
GATED_STAGES = ("promptgen", "isolation")

_SLUG_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


@dataclass(frozen=True)
class PartSpec:
    """One component the user wants separated out."""

    part_id: str
    display_name: str
    user_description: str
    occlusion_directive: str | None = None

    def __post_init__(self) -> None:
        if not _SLUG_RE.match(self.part_id or ""):
            raise SchemaViolation("part_id", f"not a slug: {self.part_id!r}")
        if not self.user_description or not self.user_description.strip():
            raise SchemaViolation("user_description", "must be non-empty")

    def to_dict(self) -> dict:
        return {
            "part_id": self.part_id,
            "display_name": self.display_name,
            "user_description": self.user_description,
            "occlusion_directive": self.occlusion_directive,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PartSpec":
        return cls(
            part_id=d["part_id"],
            display_name=d.get("display_name", d["part_id"]),
            user_description=d["user_description"],
            occlusion_directive=d.get("occlusion_directive"),
        )


@dataclass(frozen=True)
class StageStatus:
    state: str = "pending"
    error: str | None = None
    approval_required: bool = False

    def __post_init__(self) -> None:
        if self.state not in STATES:
            raise SchemaViolation("state", f"unknown state {self.state!r}")
        if self.state == "failed" and not (self.error or "").strip():
            raise SchemaViolation("error", "failed stage must carry an error")

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "error": self.error,
            "approval_required": self.approval_required,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StageStatus":
        return cls(
            state=d["state"],
            error=d.get("error"),
            approval_required=bool(d.get("approval_required", False)),
        )


@dataclass(frozen=True)
class PipelineJob:
    """Manifest state of one pipeline run; artifact payloads live in the store.

    ``artifacts`` maps a stage-namespaced key (``isolation/ball``) to a
    reference dict ``{"hash", "media", "provenance"?}``.  ``tombstones``
    records references dropped by invalidation, newest last.
    """

    job_id: str
    input_image: str  # blob hash of the input PNG
    parts: tuple[PartSpec, ...]
    seed: int
    stages: Mapping[str, StageStatus]
    artifacts: Mapping[str, dict] = field(default_factory=dict)
    tombstones: tuple[str, ...] = ()
    created_at: str = field(default_factory=_utc_now)
    updated_at: str = field(default_factory=_utc_now)

    def __post_init__(self) -> None:
        if not self.parts:
            raise EmptyPartList()
        ids = [p.part_id for p in self.parts]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicatePartId(", ".join(dupes))
        if not (0 <= self.seed < 2**64):
            raise BadRange(f"seed must be u64, got {self.seed}")
        if tuple(self.stages) != STAGES:
            raise SchemaViolation("stages", "stage map must list the five stages in order")
        for name, status in self.stages.items():
            if status.state == "awaiting_approval" and name not in GATED_STAGES:
                raise SchemaViolation("stages", f"{name} cannot await approval")
        # no stage done while a predecessor is not done
        done_flags = [self.stages[s].state == "done" for s in STAGES]
        for i in range(1, len(STAGES)):
            later_active = self.stages[STAGES[i]].state in ("running", "done")
            if later_active and not all(done_flags[:i]):
                raise SchemaViolation("stages", f"{STAGES[i]} active before predecessors done")

    @property
    def part_ids(self) -> tuple[str, ...]:
        return tuple(p.part_id for p in self.parts)

    def stage(self, name: str) -> StageStatus:
        if name not in self.stages:
            raise UnknownStage(name)
        return self.stages[name]

    def with_stage(self, name: str, status: StageStatus) -> "PipelineJob":
        if name not in self.stages:
            raise UnknownStage(name)
        stages = {s: (status if s == name else st) for s, st in self.stages.items()}
        return replace(self, stages=stages, updated_at=_utc_now())

    def with_artifact(self, key: str, ref: dict) -> "PipelineJob":
        artifacts = dict(self.artifacts)
        artifacts[key] = ref
        return replace(self, artifacts=artifacts, updated_at=_utc_now())

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "job_id": self.job_id,
            "input_image": self.input_image,
            "parts": [p.to_dict() for p in self.parts],
            "seed": self.seed,
            "stages": {s: st.to_dict() for s, st in self.stages.items()},
            "artifacts": dict(self.artifacts),
            "tombstones": list(self.tombstones),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PipelineJob":
        return cls(
            job_id=d["job_id"],
            input_image=d["input_image"],
            parts=tuple(PartSpec.from_dict(p) for p in d["parts"]),
            seed=int(d["seed"]),
            stages={s: StageStatus.from_dict(d["stages"][s]) for s in STAGES},
            artifacts=dict(d.get("artifacts", {})),
            tombstones=tuple(d.get("tombstones", ())),
            created_at=d["created_at"],
            updated_at=d["updated_at"],
        )


def new_job(
    job_id: str,
    input_image_hash: str,
    parts: Sequence[PartSpec],
    seed: int,
    approval_gates: Mapping[str, bool] | None = None,
) -> PipelineJob:
    """Fresh job with every stage pending; gates default ON for the two
    human-review stages and OFF elsewhere."""
    gates = {s: s in GATED_STAGES for s in STAGES}
    for name, flag in (approval_gates or {}).items():
        if name not in STAGES:
            raise UnknownStage(name)
        if flag and name not in GATED_STAGES:
            raise SchemaViolation("approval_gates", f"{name} cannot be gated")
        gates[name] = bool(flag)
    stages = {s: StageStatus(approval_required=gates[s]) for s in STAGES}
    return PipelineJob(
        job_id=job_id,
        input_image=input_image_hash,
        parts=tuple(parts),
        seed=seed,
        stages=stages,
    )


def _priors_done(job: PipelineJob, stage: str) -> bool:
    idx = STAGES.index(stage)
    return all(job.stages[s].state == "done" for s in STAGES[:idx])


def transition(job: PipelineJob, stage: str, event: str, error: str | None = None) -> PipelineJob:
    """Apply one state-machine event; illegal events raise and change nothing.

    start: pending -> running (requires every prior stage done)
    complete: running -> done, or -> awaiting_approval when gated
    approve: awaiting_approval -> done
    reject: awaiting_approval -> pending
    fail: running -> failed (carries the error text)
    """
    if stage not in STAGES:
        raise UnknownStage(stage)
    cur = job.stages[stage]
    if event == "start":
        if cur.state != "pending":
            raise IllegalTransition(f"{stage} is {cur.state}, not pending")
        if not _priors_done(job, stage):
            raise IllegalTransition(f"cannot start {stage}: prior stages not done")
        nxt = replace(cur, state="running", error=None)
    elif event == "complete":
        if cur.state != "running":
            raise IllegalTransition(f"{stage} is {cur.state}, not running")
        target = "awaiting_approval" if cur.approval_required else "done"
        nxt = replace(cur, state=target, error=None)
    elif event == "approve":
        if cur.state != "awaiting_approval":
            raise IllegalTransition(f"{stage} is {cur.state}, not awaiting approval")
        nxt = replace(cur, state="done")
    elif event == "reject":
        if cur.state != "awaiting_approval":
            raise IllegalTransition(f"{stage} is {cur.state}, not awaiting approval")
        nxt = replace(cur, state="pending")
    elif event == "fail":
        if cur.state != "running":
            raise IllegalTransition(f"{stage} is {cur.state}, not running")
        nxt = replace(cur, state="failed", error=(error or "").strip() or "unknown error")
    else:
        raise IllegalTransition(f"unknown event {event!r}")
    return job.with_stage(stage, nxt)


def invalidate_downstream(job: PipelineJob, stage: str) -> PipelineJob:
    """Reset every stage after ``stage`` to pending and tombstone their
    artifacts.  Called when an upstream artifact is edited or replaced."""
    if stage not in STAGES:
        raise UnknownStage(stage)
    idx = STAGES.index(stage)
    later = set(STAGES[idx + 1 :])
    stages = {
        s: (replace(st, state="pending", error=None) if s in later else st)
        for s, st in job.stages.items()
    }
    artifacts = {}
    tombstones = list(job.tombstones)
    for key, ref in job.artifacts.items():
        owner = key.split("/", 1)[0]
        if owner in later:
            tombstones.append(f"{key}@{ref.get('hash', '')}")
        else:
            artifacts[key] = ref
    return replace(
        job,
        stages=stages,
        artifacts=artifacts,
        tombstones=tuple(tombstones),
        updated_at=_utc_now(),
    )


def stage_seed(job_seed: int, stage: str, part_id: str | None = None) -> int:
    """Stable per-stage, per-part substream seed.

    Re-running one part must not perturb the draws of any other, so each
    (stage, part) pair hashes to its own 64-bit seed.
    """
    if stage not in STAGES:
        raise UnknownStage(stage)
    digest = hashlib.sha256(f"{job_seed}:{stage}:{part_id or ''}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
