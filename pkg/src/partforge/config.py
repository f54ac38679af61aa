"""Run configuration: backends, camera geometry, gates, and runtime knobs.

Everything is JSON (one flat file passed via --config); every field has a
working default, so an empty config object runs the full pipeline against
the built-in mocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .backends import KINDS, BackendConfig
from .cameras import CameraPose, RigConfig, default_rig
from .diffusion import NoiseSchedule, make_schedule
from .errors import BadRange, SchemaViolation
from .model import GATED_STAGES, STAGES


@dataclass(frozen=True)
class ScheduleParams:
    """Noise-schedule knobs for the diffusion statistics path."""

    T: int = 100
    beta_start: float = 0.01
    beta_end: float = 0.20
    variant: str = "fixed_large"

    def build(self) -> NoiseSchedule:
        return make_schedule(self.T, self.beta_start, self.beta_end, self.variant)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "variant": self.variant,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleParams":
        return cls(
            T=int(d.get("T", 100)),
            beta_start=float(d.get("beta_start", 0.01)),
            beta_end=float(d.get("beta_end", 0.20)),
            variant=d.get("variant", "fixed_large"),
        )


@dataclass(frozen=True)
class AnchorParams:
    """Assumed camera of the original input image: a look-at-origin camera
    like the rig's, with the field of view defaulting to the rig fov."""

    azimuth: float = 20.0
    elevation: float = 25.0
    radius: float = 2.5
    fov_y: float | None = None

    def pose(self, rig: RigConfig, image_size: int) -> CameraPose:
        fov = self.fov_y if self.fov_y is not None else rig.poses[0].fov_y
        return CameraPose(
            azimuth=self.azimuth,
            elevation=self.elevation,
            radius=self.radius,
            fov_y=fov,
            image_size=image_size,
        )

    def to_dict(self) -> dict:
        return {
            "azimuth": self.azimuth,
            "elevation": self.elevation,
            "radius": self.radius,
            "fov_y": self.fov_y,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnchorParams":
        fov = d.get("fov_y")
        return cls(
            azimuth=float(d.get("azimuth", 20.0)),
            elevation=float(d.get("elevation", 25.0)),
            radius=float(d.get("radius", 2.5)),
            fov_y=None if fov is None else float(fov),
        )


def _default_backends() -> dict[str, BackendConfig]:
    return {kind: BackendConfig(kind=kind) for kind in KINDS}


def _default_gates() -> dict[str, bool]:
    return {s: s in GATED_STAGES for s in STAGES}


@dataclass(frozen=True)
class RunConfig:
    backends: dict[str, BackendConfig] = field(default_factory=_default_backends)
    rig: RigConfig = field(default_factory=default_rig)
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    approval_gates: dict[str, bool] = field(default_factory=_default_gates)
    parallelism: int = 2
    resolution: int = 64
    anchor: AnchorParams = field(default_factory=AnchorParams)
    store_path: str = "store"
    console_dist: str | None = None

    def __post_init__(self):
        full = _default_backends()
        for kind, cfg in self.backends.items():
            if kind not in KINDS:
                raise SchemaViolation("backends", f"unknown backend kind {kind!r}")
            if cfg.kind != kind:
                raise SchemaViolation("backends", f"entry {kind!r} configures {cfg.kind!r}")
            full[kind] = cfg
        object.__setattr__(self, "backends", full)
        gates = _default_gates()
        for stage, flag in self.approval_gates.items():
            if stage not in STAGES:
                raise SchemaViolation("approval_gates", f"unknown stage {stage!r}")
            if flag and stage not in GATED_STAGES:
                raise SchemaViolation("approval_gates", f"{stage} cannot be gated")
            gates[stage] = bool(flag)
        object.__setattr__(self, "approval_gates", gates)
        if self.parallelism < 1:
            raise BadRange("parallelism must be >= 1")
        if self.resolution < 2:
            raise BadRange("resolution must be >= 2")

    def backend(self, kind: str) -> BackendConfig:
        if kind not in KINDS:
            raise SchemaViolation("backends", f"unknown backend kind {kind!r}")
        return self.backends[kind]

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "backends": {k: c.to_dict() for k, c in sorted(self.backends.items())},
            "rig": self.rig.to_dict(),
            "schedule": self.schedule.to_dict(),
            "approval_gates": dict(sorted(self.approval_gates.items())),
            "parallelism": self.parallelism,
            "resolution": self.resolution,
            "anchor": self.anchor.to_dict(),
            "store_path": self.store_path,
            "console_dist": self.console_dist,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if d.get("v", 1) != 1:
            raise SchemaViolation("v", f"unsupported config version {d.get('v')!r}")
        try:
            return cls(
                backends={
                    k: BackendConfig.from_dict(c) for k, c in d.get("backends", {}).items()
                },
                rig=RigConfig.from_dict(d["rig"]) if "rig" in d else default_rig(),
                schedule=ScheduleParams.from_dict(d.get("schedule", {})),
                approval_gates=dict(d.get("approval_gates", {})),
                parallelism=int(d.get("parallelism", 2)),
                resolution=int(d.get("resolution", 64)),
                anchor=AnchorParams.from_dict(d.get("anchor", {})),
                store_path=d.get("store_path", "store"),
                console_dist=d.get("console_dist"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation("config", str(exc)) from exc


def load_config(path: str) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation("config", f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaViolation("config", f"{path}: top level must be an object")
    return RunConfig.from_dict(data)
