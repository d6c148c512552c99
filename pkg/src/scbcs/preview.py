"""Fast low-resolution previews from DSS measurements.

With ``Phi = H D + F`` and ``F D^T = 0``, ``H^-1 y = D x + H^-1 F x``: the
patch means of the block plus a small leakage term. The previews of all
blocks are upsampled, averaged where blocks overlap, and the disagreement
between neighbours on each overlap strip sets the border tolerances used by
the constrained solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .exceptions import InvalidLength, InvalidShape, MissingBlock
from .geometry import BlockGrid, BlockId, BlockSpec

# measurement rate at which preview disagreement is taken at face value
REFERENCE_M = 64

_OPPOSITE = {"top": "bottom", "bottom": "top", "left": "right", "right": "left"}


def fwht(v) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis.

    Returns ``H @ v`` for the Sylvester-ordered Hadamard matrix in
    ``O(M log M)`` butterflies.
    """
    a = np.array(v, dtype=np.float64)
    M = a.shape[-1]
    if M < 1 or M & (M - 1):
        raise InvalidLength(f"length must be a power of 2, got {M}")
    lead = a.shape[:-1]
    h = 1
    while h < M:
        a = a.reshape(lead + (M // (2 * h), 2, h))
        lo = a[..., 0, :]
        hi = a[..., 1, :]
        a = np.stack((lo + hi, lo - hi), axis=-2)
        h *= 2
    return a.reshape(lead + (M,))


def block_preview(y) -> np.ndarray:
    """``H^-1 y`` reshaped row-major to ``sqrt(M) x sqrt(M)``."""
    y = np.asarray(y, dtype=np.float64)
    M = y.shape[-1]
    side = math.isqrt(M)
    if side * side != M or M & (M - 1):
        raise InvalidLength(f"M must be a power of 2 and a perfect square, got {M}")
    return (fwht(y) / M).reshape(y.shape[:-1] + (side, side))


def _interp_matrix(n: int, B: int) -> np.ndarray:
    """``B x n`` linear interpolation weights from patch-centre samples."""
    p = B // n
    pos = (np.arange(B) - (p - 1) / 2.0) / p
    pos = np.clip(pos, 0.0, n - 1)
    lo = np.minimum(np.floor(pos).astype(int), max(n - 2, 0))
    frac = pos - lo
    W = np.zeros((B, n))
    if n == 1:
        W[:, 0] = 1.0
        return W
    rows = np.arange(B)
    W[rows, lo] = 1.0 - frac
    W[rows, lo + 1] += frac
    return W


def upsample_preview(lowres, B: int) -> np.ndarray:
    """Bilinear upsampling of a ``n x n`` preview to ``B x B``.

    Samples sit at patch centres; outside the outermost centres the value is
    held constant.
    """
    lowres = np.asarray(lowres, dtype=np.float64)
    n = lowres.shape[0]
    if lowres.ndim != 2 or lowres.shape[1] != n or B % n:
        raise InvalidShape(f"cannot upsample {lowres.shape} preview to {B}x{B}")
    W = _interp_matrix(n, B)
    return W @ lowres @ W.T


@dataclass
class PreviewImage:
    """Merged full-image preview plus neighbour disagreement on each overlap.

    ``disagreement[(block_id, side)]`` is the RMS difference between the two
    block previews over the strip shared on that side.
    """

    pixels: np.ndarray
    disagreement: Dict[Tuple[BlockId, str], float] = field(default_factory=dict)
    measurements: Optional[int] = None


def _overlap_slices(spec: BlockSpec, other: BlockSpec, side: str, ring: int):
    """Block-local slices of the shared strip, for ``spec`` and for ``other``."""
    w = 2 * ring
    B_r, B_c = spec.shape
    if side == "bottom":
        return (slice(B_r - w, B_r), slice(None)), (slice(0, w), slice(None))
    if side == "top":
        return (slice(0, w), slice(None)), (slice(B_r - w, B_r), slice(None))
    if side == "right":
        return (slice(None), slice(B_c - w, B_c)), (slice(None), slice(0, w))
    return (slice(None), slice(0, w)), (slice(None), slice(B_c - w, B_c))


def merge_previews(grid: BlockGrid, previews: Mapping[BlockId, np.ndarray],
                   measurements: Optional[int] = None) -> PreviewImage:
    """Average overlapping block previews into one image.

    ``measurements`` (M per block) is recorded for :func:`estimate_border_epsilons`.
    """
    acc = np.zeros(grid.image_shape)
    count = np.zeros(grid.image_shape)
    for spec in grid:
        try:
            pv = np.asarray(previews[spec.id], dtype=np.float64)
        except KeyError:
            raise MissingBlock(spec.id) from None
        if pv.shape != spec.shape:
            raise InvalidShape(f"preview for {spec.id} has shape {pv.shape}, expected {spec.shape}")
        rs, cs = slice(*spec.pixel_rows), slice(*spec.pixel_cols)
        acc[rs, cs] += pv
        count[rs, cs] += 1.0
    pixels = acc / count

    disagreement = {}
    if grid.ring > 0:
        for spec in grid:
            for side in ("bottom", "right"):
                nid = spec.neighbor_ids.get(side)
                if nid is None:
                    continue
                mine, theirs = _overlap_slices(spec, grid[nid], side, grid.ring)
                diff = np.asarray(previews[spec.id])[mine] - np.asarray(previews[nid])[theirs]
                s = float(np.sqrt(np.mean(diff ** 2)))
                disagreement[(spec.id, side)] = s
                disagreement[(nid, _OPPOSITE[side])] = s
    return PreviewImage(pixels=pixels, disagreement=disagreement, measurements=measurements)


def side_length(spec: BlockSpec, side: str) -> int:
    """Length of the constrained segment on ``side`` of the inside region."""
    h, w = spec.inside_shape
    return w if side in ("top", "bottom") else h


def estimate_border_epsilons(grid: BlockGrid, preview: PreviewImage, alpha: float = 1.0,
                             s_floor: float = 1.0, reference_m: Optional[int] = REFERENCE_M
                             ) -> Dict[BlockId, Dict[str, float]]:
    """Border-ball radii ``alpha * sqrt(L) * max(s, s_floor)`` per block side.

    ``L`` is the length of the constrained row/column and ``s`` the preview
    disagreement on that side. Preview disagreement is measurement leakage
    ``H^-1 F x``, whose per-pixel size is ``||x_detail|| / M``; when the
    preview knows ``M``, ``s`` is rescaled by ``M / reference_m`` so the
    radii track block detail independently of the measurement rate. Pass
    ``reference_m=None`` to use ``s`` as measured. Sides on the image edge get
    no entry.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not s_floor > 0:
        raise ValueError(f"s_floor must be > 0, got {s_floor}")
    scale = 1.0
    if reference_m and preview.measurements:
        scale = preview.measurements / reference_m
    eps: Dict[BlockId, Dict[str, float]] = {}
    for spec in grid:
        sides = {}
        for side in ("top", "bottom", "left", "right"):
            if not spec.has_neighbor(side):
                continue
            s = preview.disagreement.get((spec.id, side), 0.0) * scale
            sides[side] = alpha * np.sqrt(side_length(spec, side)) * max(s, s_floor)
        eps[spec.id] = sides
    return eps
