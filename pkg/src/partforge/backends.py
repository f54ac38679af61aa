"""Backend interfaces: deterministic mocks and HTTP adapters.

Every model class (VLM, image generator, multiview generator, external
reconstructor) is reached through one function taking a
:class:`BackendConfig`.  An empty ``endpoint`` selects the mock, which is
backed by a synthetic scene and is bit-deterministic; anything else is an
HTTP endpoint speaking the JSON protocol below (all images base64 PNG):

    POST {endpoint}/v1/vlm        {"v":1, "model", "system_prompt", "user_text", "image"}
                               -> {"v":1, "text"}
    POST {endpoint}/v1/isolate    {"v":1, "model", "image", "prompt", "seed"}
                               -> {"v":1, "image", "alpha": "matte"|"opaque"}
    POST {endpoint}/v1/multiview  {"v":1, "model", "image", "seed"}
                               -> {"v":1, "frame", "layout": {rows, cols, cell_width, cell_height}}
    POST {endpoint}/v1/reconstruct{"v":1, "model", "views", "poses", "seed"}
                               -> {"v":1, "mesh_obj": base64 OBJ bytes}

Responses with status >= 500 and transport timeouts are retried up to
``max_retries`` extra attempts; other error statuses fail immediately.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import os
import re
from dataclasses import dataclass

import requests

from .cameras import CameraPose, RigConfig
from .errors import (
    BackendTimeout,
    BadRange,
    ContentRefused,
    HttpStatus,
    PartForgeError,
    PayloadTooLarge,
    SchemaViolation,
    TileDecodeError,
)
from .images import ImageArtifact, Provenance, pad_to_square
from .prompts import IsolationPrompt, prompts_to_json
from .scene import SyntheticScene, render_scene
from .tiles import TilingLayout, split_tiles

KINDS = ("vlm", "imagegen", "multiview", "reconstructor")


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str = ""  # empty selects the mock
    model_name: str = "mock"
    timeout: float = 30.0
    max_retries: int = 0
    auth_env: str = ""  # name of the env var holding the bearer secret

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise BadRange(f"unknown backend kind {self.kind!r}")
        if self.timeout <= 0:
            raise BadRange("timeout must be positive")
        if self.max_retries < 0:
            raise BadRange("max_retries must be >= 0")

    @property
    def is_mock(self) -> bool:
        return not self.endpoint

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "auth_env": self.auth_env,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackendConfig":
        return cls(
            kind=d["kind"],
            endpoint=d.get("endpoint", ""),
            model_name=d.get("model_name", "mock"),
            timeout=float(d.get("timeout", 30.0)),
            max_retries=int(d.get("max_retries", 0)),
            auth_env=d.get("auth_env", ""),
        )


@dataclass(frozen=True)
class MockContext:
    """Ground truth the mocks answer from: the scene, the camera the input
    image was taken with, and the view rig."""

    scene: SyntheticScene
    composite_pose: CameraPose
    rig: RigConfig


@dataclass(frozen=True)
class MultiviewSet:
    views: tuple[ImageArtifact, ...]
    poses: tuple[CameraPose, ...]

    def __post_init__(self) -> None:
        if len(self.views) != len(self.poses):
            raise BadRange("one pose per view required")
        if not self.views:
            raise BadRange("multiview set cannot be empty")


# HTTP plumbing


def _headers(cfg: BackendConfig) -> dict:
    secret = os.environ.get(cfg.auth_env, "") if cfg.auth_env else ""
    return {"Authorization": f"Bearer {secret}"} if secret else {}


def _post(cfg: BackendConfig, path: str, payload: dict) -> tuple[dict, int]:
    """POST with the retry contract; returns (body, attempts made)."""
    url = cfg.endpoint.rstrip("/") + path
    attempts = 0
    last_status: int | None = None
    for _ in range(cfg.max_retries + 1):
        attempts += 1
        try:
            resp = requests.post(url, json=payload, timeout=cfg.timeout, headers=_headers(cfg))
        except (requests.Timeout, requests.ConnectionError):
            continue
        if resp.status_code >= 500:
            last_status = resp.status_code
            continue
        if resp.status_code == 413:
            raise PayloadTooLarge(f"{url} rejected the payload")
        if resp.status_code >= 400:
            body = {}
            try:
                body = resp.json()
            except ValueError:
                pass
            if body.get("error") == "ContentRefused":
                raise ContentRefused(body.get("message", "backend refused the request"))
            raise HttpStatus(resp.status_code, attempts)
        try:
            body = resp.json()
        except ValueError as exc:
            raise SchemaViolation("response", f"{url} returned non-JSON: {exc}") from exc
        if body.get("v") != 1:
            raise SchemaViolation("v", f"{url} speaks protocol {body.get('v')!r}, want 1")
        return body, attempts
    if last_status is not None:
        raise HttpStatus(last_status, attempts)
    raise BackendTimeout(f"no response from {url} after {attempts} attempts")


def _require_ctx(cfg: BackendConfig, ctx: MockContext | None) -> MockContext:
    if ctx is None:
        raise BadRange(f"mock {cfg.kind} backend needs a MockContext")
    return ctx


# VLM

_PART_LINE_RE = re.compile(
    r"^- (?P<pid>[A-Za-z0-9][A-Za-z0-9_-]*): (?P<desc>.*?)"
    r"(?: \(occluded regions: (?P<occ>.*)\))?$"
)


def _mock_vlm_text(system_prompt: str) -> str:
    """Answer the enumerated parts with schema-valid prompts, prose around."""
    found = []
    for line in system_prompt.splitlines():
        match = _PART_LINE_RE.match(line.strip())
        if match:
            found.append((match["pid"], match["desc"], match["occ"] or ""))
    if not found:
        return "I could not find a part list in the request."
    prompts = []
    for pid, desc, occ in found:
        others = [d for p, d, _ in found if p != pid]
        removal = (
            "Remove " + " and ".join(others) + " entirely."
            if others
            else "Remove everything except the subject."
        )
        prompts.append(
            IsolationPrompt(
                part_id=pid,
                keep_subject=f"Keep only {desc}.",
                removal_clause=removal,
                pose_description="Exactly the pose seen in the photograph.",
                camera_angle_description="The same camera viewpoint as the photograph.",
                lighting_description="The same flat lighting as the photograph.",
                occlusion_imagination=occ or "Continue hidden surfaces smoothly.",
                negative_terms=tuple(p for p, _, _ in found if p != pid),
            )
        )
    return (
        "Here are the isolation prompts for each part.\n\n```json\n"
        + prompts_to_json(prompts)
        + "\n```\n\nEach prompt keeps the photograph's pose, angle and lighting."
    )


def vlm_generate(
    cfg: BackendConfig,
    system_prompt: str,
    user_text: str,
    image: ImageArtifact,
    ctx: MockContext | None = None,
) -> str:
    """Ask the VLM for per-part isolation prompts; returns its raw text."""
    if cfg.is_mock:
        _require_ctx(cfg, ctx)
        return _mock_vlm_text(system_prompt)
    payload = {
        "v": 1,
        "model": cfg.model_name,
        "system_prompt": system_prompt,
        "user_text": user_text,
        "image": image.to_base64(),
    }
    body, _ = _post(cfg, "/v1/vlm", payload)
    text = body.get("text")
    if not isinstance(text, str):
        raise SchemaViolation("text", "vlm response lacks text")
    return text


# isolation


def isolate(
    cfg: BackendConfig,
    image: ImageArtifact,
    prompt: IsolationPrompt,
    seed: int,
    ctx: MockContext | None = None,
) -> ImageArtifact:
    """Produce the single-part image described by ``prompt``."""
    if cfg.is_mock:
        mock = _require_ctx(cfg, ctx)
        if prompt.part_id not in mock.scene.part_ids:
            raise ContentRefused(f"scene has no part {prompt.part_id!r}")
        rendered = render_scene(mock.scene.restrict(prompt.part_id), mock.composite_pose)
        prov = Provenance(
            stage="isolation",
            backend_id=cfg.model_name,
            prompt_hash=_prompt_hash(prompt),
            seed=seed,
        )
        return ImageArtifact(rendered.width, rendered.height, rendered.pixels, prov)
    payload = {
        "v": 1,
        "model": cfg.model_name,
        "image": image.to_base64(),
        "prompt": prompt.to_dict(),
        "seed": seed,
    }
    body, attempts = _post(cfg, "/v1/isolate", payload)
    if "image" not in body:
        raise SchemaViolation("image", "isolate response lacks an image")
    prov = Provenance(
        stage="isolation",
        backend_id=cfg.model_name,
        prompt_hash=_prompt_hash(prompt),
        seed=seed,
        attempts=attempts,
    )
    return ImageArtifact.from_base64(body["image"], provenance=prov)


def _prompt_hash(prompt: IsolationPrompt) -> str:
    return hashlib.sha256(prompt.raw_text.encode()).hexdigest()[:16]


# multiview


def _match_part(mock: MockContext, isolated: ImageArtifact) -> str:
    """The mock identifies the part by re-rendering each candidate at the
    composite camera and comparing pixels (isolations are exact renders)."""
    for pid in mock.scene.part_ids:
        candidate = render_scene(mock.scene.restrict(pid), mock.composite_pose)
        if candidate.pixels == isolated.pixels:
            return pid
        padded = pad_to_square(candidate)
        if padded.width == isolated.width and padded.pixels == isolated.pixels:
            return pid
    raise ContentRefused("isolated image does not depict any scene part")


def multiview_generate(
    cfg: BackendConfig,
    isolated: ImageArtifact,
    seed: int,
    rig: RigConfig,
    ctx: MockContext | None = None,
) -> MultiviewSet:
    """Six fixed-viewpoint renders of the isolated subject, poses attached."""
    if cfg.is_mock:
        mock = _require_ctx(cfg, ctx)
        pid = _match_part(mock, isolated)
        part_scene = mock.scene.restrict(pid)
        views = []
        for pose in rig.poses:
            img = render_scene(part_scene, pose)
            prov = Provenance(stage="multiview", backend_id=cfg.model_name, seed=seed)
            views.append(ImageArtifact(img.width, img.height, img.pixels, prov))
        return MultiviewSet(tuple(views), tuple(rig.poses))
    payload = {"v": 1, "model": cfg.model_name, "image": isolated.to_base64(), "seed": seed}
    body, attempts = _post(cfg, "/v1/multiview", payload)
    if "frame" not in body or "layout" not in body:
        raise TileDecodeError("multiview response lacks frame or layout")
    try:
        layout = TilingLayout.from_dict(body["layout"])
        frame = ImageArtifact.from_base64(body["frame"])
        tiles = split_tiles(frame, layout)
    except PartForgeError as exc:
        raise TileDecodeError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise TileDecodeError(f"malformed multiview payload: {exc}") from exc
    if len(tiles) != len(rig.poses):
        raise TileDecodeError(f"{len(tiles)} tiles for {len(rig.poses)} poses")
    prov = Provenance(stage="multiview", backend_id=cfg.model_name, seed=seed, attempts=attempts)
    views = tuple(ImageArtifact(t.width, t.height, t.pixels, prov) for t in tiles)
    return MultiviewSet(views, tuple(rig.poses))


# external reconstructor


def reconstruct_external(
    cfg: BackendConfig,
    views: MultiviewSet,
    seed: int,
) -> bytes:
    """Hand the posed views to an external reconstruction service; returns
    OBJ bytes.  There is no mock: the in-repo carving path is the default."""
    if cfg.is_mock:
        raise BadRange("reconstructor has no mock; leave it unconfigured instead")
    payload = {
        "v": 1,
        "model": cfg.model_name,
        "views": [v.to_base64() for v in views.views],
        "poses": [p.to_dict() for p in views.poses],
        "seed": seed,
    }
    body, _ = _post(cfg, "/v1/reconstruct", payload)
    if "mesh_obj" not in body:
        raise SchemaViolation("mesh_obj", "reconstruct response lacks a mesh")
    try:
        return base64.b64decode(body["mesh_obj"], validate=True)
    except (binascii.Error, ValueError) as exc:
        raise SchemaViolation("mesh_obj", f"not base64: {exc}") from exc
