"""RGBA image artifacts and their byte-level codecs.

Every image crossing a module or wire boundary is an :class:`ImageArtifact`:
8-bit RGBA, row-major, with a provenance record saying which stage and backend
produced it. PNG is the only on-disk and on-wire encoding.
"""

from __future__ import annotations

import base64
import binascii
import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import BadRange, ImageDecodeError


@dataclass(frozen=True)
class Provenance:
    stage: str = ""
    backend_id: str = ""
    prompt_hash: str = ""
    seed: int = 0
    attempts: int = 1

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "backend_id": self.backend_id,
            "prompt_hash": self.prompt_hash,
            "seed": self.seed,
            "attempts": self.attempts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(
            stage=str(d.get("stage", "")),
            backend_id=str(d.get("backend_id", "")),
            prompt_hash=str(d.get("prompt_hash", "")),
            seed=int(d.get("seed", 0)),
            attempts=int(d.get("attempts", 1)),
        )


@dataclass(frozen=True)
class ImageArtifact:
    """An immutable RGBA image; ``pixels`` is width*height*4 bytes, row-major."""

    width: int
    height: int
    pixels: bytes
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise BadRange("image dimensions must be >= 1")
        if len(self.pixels) != self.width * self.height * 4:
            raise BadRange(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {self.width * self.height * 4}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray, provenance: Provenance = Provenance()) -> "ImageArtifact":
        """Build from an (H, W, 4) or (H, W, 3) uint8 array; RGB gets alpha 255."""
        a = np.asarray(arr)
        if a.ndim != 3 or a.shape[2] not in (3, 4):
            raise BadRange(f"expected (H, W, 3|4) array, got shape {a.shape}")
        a = a.astype(np.uint8, copy=False)
        if a.shape[2] == 3:
            a = np.concatenate([a, np.full(a.shape[:2] + (1,), 255, np.uint8)], axis=2)
        h, w = a.shape[:2]
        return cls(width=w, height=h, pixels=np.ascontiguousarray(a).tobytes(), provenance=provenance)

    def as_array(self) -> np.ndarray:
        """View as an (H, W, 4) uint8 array (a copy; artifacts stay immutable)."""
        return np.frombuffer(self.pixels, np.uint8).reshape(self.height, self.width, 4).copy()

    def alpha(self) -> np.ndarray:
        return np.frombuffer(self.pixels, np.uint8).reshape(self.height, self.width, 4)[:, :, 3].copy()

    def with_provenance(self, provenance: Provenance) -> "ImageArtifact":
        return ImageArtifact(self.width, self.height, self.pixels, provenance)

    def to_png(self) -> bytes:
        img = Image.frombuffer("RGBA", (self.width, self.height), self.pixels, "raw", "RGBA", 0, 1)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png(cls, data: bytes, provenance: Provenance = Provenance()) -> "ImageArtifact":
        try:
            img = Image.open(io.BytesIO(data))
            img.load()
        except (UnidentifiedImageError, OSError, ValueError) as e:
            raise ImageDecodeError(f"not decodable as PNG: {e}") from e
        rgba = img.convert("RGBA")
        return cls(
            width=rgba.width,
            height=rgba.height,
            pixels=rgba.tobytes(),
            provenance=provenance,
        )

    def to_base64(self) -> str:
        return base64.b64encode(self.to_png()).decode("ascii")

    @classmethod
    def from_base64(cls, text: str, provenance: Provenance = Provenance()) -> "ImageArtifact":
        try:
            raw = base64.b64decode(text, validate=True)
        except (binascii.Error, ValueError) as e:
            raise ImageDecodeError(f"invalid base64: {e}") from e
        return cls.from_png(raw, provenance)


def solid(width: int, height: int, rgba: tuple[int, int, int, int]) -> ImageArtifact:
    arr = np.empty((height, width, 4), np.uint8)
    arr[:] = rgba
    return ImageArtifact.from_array(arr)


def pad_to_square(image: ImageArtifact) -> ImageArtifact:
    """Center the image on a transparent square canvas of the larger dimension."""
    if image.width == image.height:
        return image
    side = max(image.width, image.height)
    canvas = np.zeros((side, side, 4), np.uint8)
    x0 = (side - image.width) // 2
    y0 = (side - image.height) // 2
    canvas[y0 : y0 + image.height, x0 : x0 + image.width] = image.as_array()
    return ImageArtifact.from_array(canvas, image.provenance)
