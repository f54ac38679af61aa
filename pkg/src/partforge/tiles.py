"""Codec for the 3x2 tiled multiview frame.

A multiview frame packs the six rig views into one image, row-major: view 0 at
the top-left, view 1 to its right, then down. Splitting and joining are exact
crops, no resampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadRange, DimensionMismatch
from .images import ImageArtifact


@dataclass(frozen=True)
class TilingLayout:
    rows: int = 3
    cols: int = 2
    cell_width: int = 320
    cell_height: int = 320

    def __post_init__(self):
        if min(self.rows, self.cols, self.cell_width, self.cell_height) < 1:
            raise BadRange("tiling layout fields must be >= 1")

    @property
    def n_views(self) -> int:
        return self.rows * self.cols

    @property
    def frame_width(self) -> int:
        return self.cols * self.cell_width

    @property
    def frame_height(self) -> int:
        return self.rows * self.cell_height

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "cell_width": self.cell_width,
            "cell_height": self.cell_height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TilingLayout":
        return cls(
            rows=int(d.get("rows", 3)),
            cols=int(d.get("cols", 2)),
            cell_width=int(d["cell_width"]),
            cell_height=int(d["cell_height"]),
        )


def split_tiles(frame: ImageArtifact, layout: TilingLayout) -> list[ImageArtifact]:
    """Crop the frame into row-major cells; dims must match the layout exactly."""
    if frame.width != layout.frame_width or frame.height != layout.frame_height:
        raise DimensionMismatch(
            f"frame is {frame.width}x{frame.height}, layout wants "
            f"{layout.frame_width}x{layout.frame_height}"
        )
    arr = frame.as_array()
    tiles = []
    for r in range(layout.rows):
        for c in range(layout.cols):
            cell = arr[
                r * layout.cell_height : (r + 1) * layout.cell_height,
                c * layout.cell_width : (c + 1) * layout.cell_width,
            ]
            tiles.append(ImageArtifact.from_array(cell, frame.provenance))
    return tiles


def join_tiles(tiles: list[ImageArtifact], layout: TilingLayout) -> ImageArtifact:
    """Inverse of :func:`split_tiles`; all tiles must match the cell size."""
    if len(tiles) != layout.n_views:
        raise DimensionMismatch(f"expected {layout.n_views} tiles, got {len(tiles)}")
    for t in tiles:
        if t.width != layout.cell_width or t.height != layout.cell_height:
            raise DimensionMismatch(
                f"tile is {t.width}x{t.height}, layout wants "
                f"{layout.cell_width}x{layout.cell_height}"
            )
    frame = np.zeros((layout.frame_height, layout.frame_width, 4), np.uint8)
    for i, t in enumerate(tiles):
        r, c = divmod(i, layout.cols)
        frame[
            r * layout.cell_height : (r + 1) * layout.cell_height,
            c * layout.cell_width : (c + 1) * layout.cell_width,
        ] = t.as_array()
    return ImageArtifact.from_array(frame, tiles[0].provenance)
