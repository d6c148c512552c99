"""Overlapping block tiling and inside/border bookkeeping.

Block ``(i, j)`` of a grid with interior side ``c`` and ring width ``r``
covers image rows ``[c*i, c*i + c + 2r)`` (same for columns), so adjacent
blocks share a strip ``2r`` pixels wide. Each block *owns* its ``c x c``
interior; blocks on the image edge also own the ring pixels facing the
image boundary, since no other block could. The owned pixels of a block
always form a rectangle, called the inside region.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from .exceptions import DimensionMismatch, MissingBlock, OutOfBounds

SIDES = ("top", "bottom", "left", "right")

BlockId = Tuple[int, int]


@dataclass(frozen=True)
class BlockSpec:
    """One block of a :class:`BlockGrid`.

    ``pixel_rows``/``pixel_cols`` are half-open image ranges covered by the
    block; ``inside_rows``/``inside_cols`` are half-open ranges of the owned
    region in block-local coordinates.
    """

    block_row: int
    block_col: int
    pixel_rows: Tuple[int, int]
    pixel_cols: Tuple[int, int]
    inside_rows: Tuple[int, int]
    inside_cols: Tuple[int, int]
    neighbor_ids: Mapping[str, Optional[BlockId]] = field(default_factory=dict)

    @property
    def id(self) -> BlockId:
        return (self.block_row, self.block_col)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.pixel_rows[1] - self.pixel_rows[0],
                self.pixel_cols[1] - self.pixel_cols[0])

    @property
    def inside_shape(self) -> Tuple[int, int]:
        return (self.inside_rows[1] - self.inside_rows[0],
                self.inside_cols[1] - self.inside_cols[0])

    @property
    def inside_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[slice(*self.inside_rows), slice(*self.inside_cols)] = True
        return mask

    @property
    def inside_indices(self) -> np.ndarray:
        """Raster (row-major) positions within the block owned by it."""
        return np.flatnonzero(self.inside_mask.ravel())

    @property
    def border_indices(self) -> np.ndarray:
        """Raster positions within the block owned by neighbours."""
        return np.flatnonzero(~self.inside_mask.ravel())

    @property
    def image_inside_rows(self) -> Tuple[int, int]:
        r0 = self.pixel_rows[0]
        return (r0 + self.inside_rows[0], r0 + self.inside_rows[1])

    @property
    def image_inside_cols(self) -> Tuple[int, int]:
        c0 = self.pixel_cols[0]
        return (c0 + self.inside_cols[0], c0 + self.inside_cols[1])

    def has_neighbor(self, side: str) -> bool:
        return self.neighbor_ids.get(side) is not None


@dataclass(frozen=True)
class BlockGrid:
    block: int
    interior: int
    ring: int
    image_shape: Tuple[int, int]
    grid_shape: Tuple[int, int]
    blocks: Tuple[Tuple[BlockSpec, ...], ...]

    @property
    def stride(self) -> int:
        return self.interior

    def __getitem__(self, block_id: BlockId) -> BlockSpec:
        r, c = block_id
        if not (0 <= r < self.grid_shape[0] and 0 <= c < self.grid_shape[1]):
            raise MissingBlock(block_id)
        return self.blocks[r][c]

    def __iter__(self) -> Iterator[BlockSpec]:
        for row in self.blocks:
            yield from row

    def __len__(self) -> int:
        return self.grid_shape[0] * self.grid_shape[1]

    def ids(self):
        return [spec.id for spec in self]


def _grid_count(size: int, interior: int, ring: int) -> int:
    g, rem = divmod(size - 2 * ring, interior)
    if rem or g < 1:
        raise DimensionMismatch(
            f"image side {size} is not g*{interior} + {2 * ring} for an integer g >= 1")
    return g


def build_block_grid(image_shape, interior: int = 30, ring: int = 1) -> BlockGrid:
    """Tile an image of ``image_shape = (height, width)`` with overlapping blocks."""
    if interior < 1 or ring < 0:
        raise DimensionMismatch("interior must be >= 1 and ring >= 0")
    height, width = (int(s) for s in image_shape)
    gr = _grid_count(height, interior, ring)
    gc = _grid_count(width, interior, ring)
    B = interior + 2 * ring

    rows = []
    for i in range(gr):
        row = []
        for j in range(gc):
            top = i > 0
            bottom = i < gr - 1
            left = j > 0
            right = j < gc - 1
            neighbors: Dict[str, Optional[BlockId]] = {
                "top": (i - 1, j) if top else None,
                "bottom": (i + 1, j) if bottom else None,
                "left": (i, j - 1) if left else None,
                "right": (i, j + 1) if right else None,
            }
            row.append(BlockSpec(
                block_row=i,
                block_col=j,
                pixel_rows=(interior * i, interior * i + B),
                pixel_cols=(interior * j, interior * j + B),
                inside_rows=(ring if top else 0, B - ring if bottom else B),
                inside_cols=(ring if left else 0, B - ring if right else B),
                neighbor_ids=neighbors,
            ))
        rows.append(tuple(row))
    return BlockGrid(block=B, interior=interior, ring=ring, image_shape=(height, width),
                     grid_shape=(gr, gc), blocks=tuple(rows))


def extract_block(image: np.ndarray, spec: BlockSpec) -> np.ndarray:
    """Return the block's pixels as a row-major vector of length ``B*B``."""
    image = np.asarray(image)
    (r0, r1), (c0, c1) = spec.pixel_rows, spec.pixel_cols
    if r0 < 0 or c0 < 0 or r1 > image.shape[0] or c1 > image.shape[1]:
        raise OutOfBounds(f"block {spec.id} exceeds image of shape {image.shape}")
    return image[r0:r1, c0:c1].reshape(-1).copy()


def place_block(image: np.ndarray, spec: BlockSpec, pixels) -> None:
    """Inverse of :func:`extract_block`; writes into ``image`` in place."""
    (r0, r1), (c0, c1) = spec.pixel_rows, spec.pixel_cols
    if r0 < 0 or c0 < 0 or r1 > image.shape[0] or c1 > image.shape[1]:
        raise OutOfBounds(f"block {spec.id} exceeds image of shape {image.shape}")
    image[r0:r1, c0:c1] = np.reshape(pixels, spec.shape)


def extract_inside(image: np.ndarray, spec: BlockSpec) -> np.ndarray:
    """The block's owned rectangle, taken from a full-size image."""
    (r0, r1), (c0, c1) = spec.image_inside_rows, spec.image_inside_cols
    return np.asarray(image)[r0:r1, c0:c1].copy()


def assemble_image(grid: BlockGrid, inside_pixels: Mapping[BlockId, np.ndarray],
                   clip: bool = True) -> np.ndarray:
    """Mosaic per-block inside regions into a full image.

    ``inside_pixels[(i, j)]`` holds block ``(i, j)``'s inside region, either
    2-D or flattened row-major. Every pixel is written exactly once.
    """
    out = np.empty(grid.image_shape, dtype=np.float64)
    for spec in grid:
        try:
            pix = inside_pixels[spec.id]
        except KeyError:
            raise MissingBlock(spec.id) from None
        (r0, r1), (c0, c1) = spec.image_inside_rows, spec.image_inside_cols
        out[r0:r1, c0:c1] = np.reshape(pix, spec.inside_shape)
    if clip:
        np.clip(out, 0.0, 255.0, out=out)
    return out
