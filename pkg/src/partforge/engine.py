"""Stage orchestration: run each pipeline stage against the configured
backends and keep the job manifest crash-safe.

Execution discipline:
  - a stage's artifacts are all written to the content-addressed store
    before the stage advances, so a manifest that still says "running"
    after a crash references nothing new and recovery just demotes it;
  - per-part backend calls inside a stage run concurrently up to the
    configured parallelism, but results are committed in part order so
    manifests (and therefore hash sets) stay deterministic;
  - any pipeline error marks the stage Failed with the structured cause
    and re-raises for the caller (CLI exit code, HTTP status) to map.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .assemble import (
    AnchorView,
    align_part,
    compose_scene,
    part_mask_from_isolation,
    resolve_depths,
)
from .backends import MockContext, MultiviewSet, isolate, multiview_generate, reconstruct_external, vlm_generate
from .config import RunConfig
from .errors import DimensionMismatch, IllegalTransition, PartIdMismatch, SchemaViolation, PartForgeError
from .images import ImageArtifact, pad_to_square
from .meshes import export_mesh, import_obj, marching_cubes
from .model import (
    STAGES,
    PartSpec,
    PipelineJob,
    invalidate_downstream,
    stage_seed,
    transition,
)
from .prompts import IsolationPrompt, build_system_prompt, merge_user_override, parse_vlm_response
from .reconstruct import carve, color_voxels, extract_silhouette
from .scene import demo_scene, render_scene
from .store import (
    MEDIA_JSON,
    MEDIA_MTL,
    MEDIA_OBJ,
    MEDIA_TEXT,
    ArtifactStore,
    create_job,
    image_ref,
    persist_job,
)

_VLM_USER_TEXT = "Write one isolation prompt per part for this image."

DEMO_PARTS = (
    PartSpec(
        part_id="ball",
        display_name="Ball",
        user_description="the glossy ball resting on the slab",
        occlusion_directive="complete the sphere where the slab hides its underside",
    ),
    PartSpec(
        part_id="base",
        display_name="Base",
        user_description="the rectangular slab underneath the ball",
    ),
)


def demo_context(config: RunConfig) -> MockContext:
    """Ground truth for the mock backends: the built-in two-part scene
    photographed by the configured anchor camera."""
    pose = config.anchor.pose(config.rig, config.rig.image_size)
    return MockContext(scene=demo_scene(), composite_pose=pose, rig=config.rig)


def demo_input_image(config: RunConfig) -> ImageArtifact:
    ctx = demo_context(config)
    return render_scene(ctx.scene, ctx.composite_pose)


def create_demo_job(
    config: RunConfig,
    store: ArtifactStore,
    seed: int,
    job_id: str | None = None,
) -> PipelineJob:
    return create_job(
        store,
        demo_input_image(config),
        DEMO_PARTS,
        seed,
        approval_gates=config.approval_gates,
        job_id=job_id,
    )


class Engine:
    def __init__(self, config: RunConfig, store: ArtifactStore, mock_context: MockContext | None = None):
        self.config = config
        self.store = store
        self.ctx = mock_context or demo_context(config)

    # -- manifest plumbing

    def _ref(self, digest: str, media: str) -> dict:
        return {"hash": digest, "media": media}

    def _digest(self, job: PipelineJob, key: str) -> str:
        ref = job.artifacts.get(key)
        if ref is None:
            raise SchemaViolation("artifacts", f"job {job.job_id} has no artifact {key!r}")
        return ref["hash"]

    def _image(self, job: PipelineJob, key: str) -> ImageArtifact:
        return self.store.get_image(self._digest(job, key))

    def _json(self, job: PipelineJob, key: str):
        return self.store.get_json(self._digest(job, key))

    def _per_part(self, parts, fn):
        """Run fn over parts concurrently, returning results in part order."""
        if self.config.parallelism == 1 or len(parts) == 1:
            return [fn(p) for p in parts]
        with ThreadPoolExecutor(max_workers=min(self.config.parallelism, len(parts))) as pool:
            return list(pool.map(fn, parts))

    # -- stage execution

    def run_stage(self, job: PipelineJob, stage: str) -> PipelineJob:
        """Start, execute, and advance one stage; Failed captures the cause."""
        job = transition(job, stage, "start")
        persist_job(self.store, job)
        try:
            artifacts = getattr(self, f"_run_{stage}")(job)
        except PartForgeError as exc:
            job = transition(job, stage, "fail", error=f"{exc.code}: {exc}")
            persist_job(self.store, job)
            raise
        for key, ref in artifacts:
            job = job.with_artifact(key, ref)
        job = transition(job, stage, "complete")
        persist_job(self.store, job)
        return job

    def approve(self, job: PipelineJob, stage: str) -> PipelineJob:
        job = transition(job, stage, "approve")
        persist_job(self.store, job)
        return job

    def reject(self, job: PipelineJob, stage: str) -> PipelineJob:
        job = transition(job, stage, "reject")
        persist_job(self.store, job)
        return job

    def run_to_completion(self, job: PipelineJob, auto_approve: bool = False) -> PipelineJob:
        """Advance stages in order; stops at the first unapproved gate."""
        for stage in STAGES:
            if job.stage(stage).state == "done":
                continue
            if job.stage(stage).state != "awaiting_approval":
                job = self.run_stage(job, stage)
            if job.stage(stage).state == "awaiting_approval":
                if not auto_approve:
                    return job
                job = self.approve(job, stage)
        return job

    def edit_prompt(self, job: PipelineJob, part_id: str, updates: dict) -> PipelineJob:
        """Apply a user override to one part's isolation prompt and reset
        everything downstream of PromptGen."""
        if part_id not in job.part_ids:
            raise PartIdMismatch(missing=(part_id,))
        state = job.stage("promptgen").state
        if state not in ("done", "awaiting_approval"):
            raise IllegalTransition(f"no prompts to edit while promptgen is {state}")
        key = f"promptgen/{part_id}"
        merged = merge_user_override(IsolationPrompt.from_dict(self._json(job, key)), updates)
        job = job.with_artifact(key, self._ref(self.store.put_json(merged.to_dict()), MEDIA_JSON))
        job = invalidate_downstream(job, "promptgen")
        persist_job(self.store, job)
        return job

    # -- stage bodies (return [(artifact key, ref)])

    def _run_promptgen(self, job: PipelineJob):
        cfg = self.config.backend("vlm")
        system = build_system_prompt(job.parts)
        raw = vlm_generate(cfg, system, _VLM_USER_TEXT, self._image(job, "input"), self.ctx)
        prompts = parse_vlm_response(raw, list(job.part_ids))
        out = [("promptgen/raw", self._ref(self.store.put_bytes(raw.encode()), MEDIA_TEXT))]
        for prompt in prompts:
            digest = self.store.put_json(prompt.to_dict())
            out.append((f"promptgen/{prompt.part_id}", self._ref(digest, MEDIA_JSON)))
        return out

    def _run_isolation(self, job: PipelineJob):
        cfg = self.config.backend("imagegen")
        image = self._image(job, "input")

        def one(part):
            prompt = IsolationPrompt.from_dict(self._json(job, f"promptgen/{part.part_id}"))
            iso = isolate(cfg, image, prompt, stage_seed(job.seed, "isolation", part.part_id), self.ctx)
            return f"isolation/{part.part_id}", image_ref(self.store.put_image(iso), iso.provenance)

        return self._per_part(job.parts, one)

    def _run_multiview(self, job: PipelineJob):
        cfg = self.config.backend("multiview")
        rig = self.config.rig

        def one(part):
            pid = part.part_id
            iso = self._image(job, f"isolation/{pid}")
            mv = multiview_generate(cfg, iso, stage_seed(job.seed, "multiview", pid), rig, self.ctx)
            items = [
                (f"multiview/{pid}/view{k}", image_ref(self.store.put_image(v), v.provenance))
                for k, v in enumerate(mv.views)
            ]
            poses = {"poses": [p.to_dict() for p in mv.poses]}
            items.append((f"multiview/{pid}/poses", self._ref(self.store.put_json(poses), MEDIA_JSON)))
            return items

        return [item for items in self._per_part(job.parts, one) for item in items]

    def _run_reconstruction(self, job: PipelineJob):
        cfg = self.config.backend("reconstructor")
        rig = self.config.rig

        def one(part):
            pid = part.part_id
            views = [self._image(job, f"multiview/{pid}/view{k}") for k in range(len(rig.poses))]
            if cfg.is_mock:
                masks = [extract_silhouette(v, source_view=k) for k, v in enumerate(views)]
                grid = color_voxels(carve(masks, rig, self.config.resolution), views, rig)
                mesh = marching_cubes(grid, part_id=pid)
            else:
                obj = reconstruct_external(
                    cfg, MultiviewSet(tuple(views), rig.poses), stage_seed(job.seed, "reconstruction", pid)
                )
                mesh = import_obj(obj, part_id=pid)
            return [
                (
                    f"reconstruction/{pid}/mesh.obj",
                    self._ref(self.store.put_bytes(export_mesh(mesh, "obj")), MEDIA_OBJ),
                ),
                (
                    f"reconstruction/{pid}/mesh.mtl",
                    self._ref(self.store.put_bytes(export_mesh(mesh, "mtl")), MEDIA_MTL),
                ),
            ]

        return [item for items in self._per_part(job.parts, one) for item in items]

    def _run_assembly(self, job: PipelineJob):
        raw = self._image(job, "input")
        original = pad_to_square(raw)
        camera = self.config.anchor.pose(self.config.rig, original.width)

        def mask_one(part):
            iso = self._image(job, f"isolation/{part.part_id}")
            if (iso.width, iso.height) != (raw.width, raw.height):
                raise DimensionMismatch(
                    f"isolation for {part.part_id} is {iso.width}x{iso.height},"
                    f" input is {raw.width}x{raw.height}"
                )
            return part.part_id, part_mask_from_isolation(original, pad_to_square(iso))

        anchor = AnchorView(camera=camera, part_masks=dict(self._per_part(job.parts, mask_one)))
        meshes = {
            pid: import_obj(
                self.store.get_bytes(self._digest(job, f"reconstruction/{pid}/mesh.obj")), part_id=pid
            )
            for pid in job.part_ids
        }
        transforms = self._per_part(
            job.parts, lambda p: align_part(meshes[p.part_id], anchor, p.part_id)
        )
        world, manifest = compose_scene(meshes, resolve_depths(transforms, meshes, anchor))
        out = [("assembly/scene.json", self._ref(self.store.put_json(manifest), MEDIA_JSON))]
        for mesh in world:
            out.append(
                (
                    f"assembly/{mesh.part_id}/mesh.obj",
                    self._ref(self.store.put_bytes(export_mesh(mesh, "obj")), MEDIA_OBJ),
                )
            )
            out.append(
                (
                    f"assembly/{mesh.part_id}/mesh.mtl",
                    self._ref(self.store.put_bytes(export_mesh(mesh, "mtl")), MEDIA_MTL),
                )
            )
        return out
