"""Sensing matrices (DSS and Gaussian) and block measurement.

Random draws come from a fixed, portable recipe so that a measurement file
can name its generator and be regenerated anywhere:

* bit source: PCG64 (O'Neill) seeded through NumPy's ``SeedSequence`` with
  ``entropy=seed`` and, for per-block matrices, ``spawn_key=(row, col)``;
* uniforms: ``u = ((raw >> 11) + 1) * 2**-53`` in ``(0, 1]``;
* normals: Box-Muller on consecutive pairs ``(u1, u2)``, emitting
  ``sqrt(-2 ln u1) cos(2 pi u2)`` then ``sqrt(-2 ln u1) sin(2 pi u2)``.

Matrices are filled row-major from that stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .exceptions import DimensionMismatch, InvalidOrder, InvalidShape
from .geometry import BlockGrid, BlockSpec, build_block_grid, extract_block

GENERATOR_ID = "pcg64-boxmuller-v1"

DSS = "dss"
GAUSSIAN = "gaussian"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _isqrt_exact(n: int) -> Optional[int]:
    r = math.isqrt(n)
    return r if r * r == n else None


def standard_normals(seed: int, count: int, block_key: Optional[Tuple[int, int]] = None
                     ) -> np.ndarray:
    """``count`` N(0, 1) draws from the documented PCG64/Box-Muller stream."""
    seq = np.random.SeedSequence(entropy=int(seed),
                                 spawn_key=tuple(block_key) if block_key is not None else ())
    bitgen = np.random.PCG64(seq)
    pairs = (count + 1) // 2
    raw = bitgen.random_raw(2 * pairs)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


@dataclass(frozen=True)
class SensingMatrix:
    kind: str
    matrix: np.ndarray
    seed: int
    generator_id: str = GENERATOR_ID
    block_key: Optional[Tuple[int, int]] = None
    H: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]


def hadamard(M: int) -> np.ndarray:
    """Sylvester Hadamard matrix of order ``M`` (a power of two), int64 entries."""
    M = int(M)
    if not _is_power_of_two(M):
        raise InvalidOrder(f"Hadamard order must be a power of 2, got {M}")
    H = np.ones((1, 1), dtype=np.int64)
    while H.shape[0] < M:
        H = np.block([[H, H], [H, -H]])
    return H


def build_downsampler(B: int, M: int) -> np.ndarray:
    """Patch-averaging ``M x B**2`` operator.

    The block is cut into a ``sqrt(M) x sqrt(M)`` arrangement of ``p x p``
    patches (``p = B / sqrt(M)``), numbered row-major; row ``m`` averages
    patch ``m``.
    """
    side = _isqrt_exact(int(M))
    if side is None or B % side:
        raise InvalidShape(f"need sqrt(M) integer dividing B; got B={B}, M={M}")
    p = B // side
    rr, cc = np.divmod(np.arange(B * B), B)
    patch = (rr // p) * side + (cc // p)
    D = np.zeros((M, B * B))
    D[patch, np.arange(B * B)] = 1.0 / (p * p)
    return D


def build_gaussian_matrix(N: int, M: int, seed: int,
                          block_key: Optional[Tuple[int, int]] = None) -> SensingMatrix:
    """i.i.d. N(0, 1/M) entries."""
    if M < 1 or N < 1:
        raise InvalidShape(f"need M, N >= 1; got M={M}, N={N}")
    G = standard_normals(seed, M * N, block_key).reshape(M, N) / np.sqrt(M)
    return SensingMatrix(GAUSSIAN, G, int(seed), block_key=block_key)


def build_dss_matrix(B: int, M: int, seed: int,
                     block_key: Optional[Tuple[int, int]] = None) -> SensingMatrix:
    """Dual-scale sensing matrix ``H D + F`` with ``F D^T = 0``.

    ``F`` is a N(0, 1/M) draw with each row projected onto the orthogonal
    complement of the row space of ``D``.
    """
    side = _isqrt_exact(int(M))
    if not _is_power_of_two(int(M)) or side is None:
        raise InvalidShape(f"DSS needs M a power of 2 and a perfect square, got {M}")
    H = hadamard(M)
    D = build_downsampler(B, M)
    p2 = (B // side) ** 2
    G = standard_normals(seed, M * B * B, block_key).reshape(M, B * B) / np.sqrt(M)
    # (D D^T)^-1 = p^2 I
    F = G - p2 * (G @ D.T) @ D
    phi = H @ D + F
    return SensingMatrix(DSS, phi, int(seed), block_key=block_key, H=H, D=D, F=F)


def build_matrix(kind: str, B: int, M: int, seed: int,
                 block_key: Optional[Tuple[int, int]] = None) -> SensingMatrix:
    if kind == DSS:
        return build_dss_matrix(B, M, seed, block_key)
    if kind == GAUSSIAN:
        return build_gaussian_matrix(B * B, M, seed, block_key)
    raise ValueError(f"unknown matrix kind {kind!r}")


def _as_array(phi) -> np.ndarray:
    return phi.matrix if isinstance(phi, SensingMatrix) else np.asarray(phi)


def measure(phi, block) -> np.ndarray:
    A = _as_array(phi)
    x = np.asarray(block, dtype=np.float64).reshape(-1)
    if A.shape[1] != x.size:
        raise DimensionMismatch(f"matrix has {A.shape[1]} columns, block has {x.size} pixels")
    return A @ x


def split_matrix_columns(phi, spec: BlockSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Columns of ``phi`` for the block's inside pixels and for its border pixels."""
    A = _as_array(phi)
    B2 = spec.shape[0] * spec.shape[1]
    if A.shape[1] != B2:
        raise DimensionMismatch(f"matrix has {A.shape[1]} columns, block has {B2} pixels")
    return A[:, spec.inside_indices], A[:, spec.border_indices]


@dataclass
class MeasurementSet:
    """Per-block measurement vectors plus everything needed to rebuild the matrices.

    ``y`` has shape ``(grid_rows, grid_cols, M)`` in row-major block order.
    """

    image_shape: Tuple[int, int]
    block: int
    interior: int
    M: int
    kind: str
    seed: int
    y: np.ndarray
    generator_id: str = GENERATOR_ID
    per_block_seed: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def ring(self) -> int:
        return (self.block - self.interior) // 2

    def grid(self) -> BlockGrid:
        return build_block_grid(self.image_shape, self.interior, self.ring)

    def matrix(self, block_id=None) -> SensingMatrix:
        """The sensing matrix used for ``block_id`` (shared unless per-block seeds)."""
        if self.generator_id != GENERATOR_ID:
            raise ValueError(f"unsupported generator {self.generator_id!r}")
        if self.per_block_seed:
            # not cached: one matrix per block would not fit comfortably in memory
            return build_matrix(self.kind, self.block, self.M, self.seed, tuple(block_id))
        if "shared" not in self._cache:
            self._cache["shared"] = build_matrix(self.kind, self.block, self.M, self.seed)
        return self._cache["shared"]

    def __getitem__(self, block_id) -> np.ndarray:
        r, c = block_id
        return self.y[r, c]

    @property
    def compression_ratio(self) -> float:
        """Total measurements over total pixels."""
        return self.y.size / (self.image_shape[0] * self.image_shape[1])


def sense_image(image, block: int = 32, interior: int = 30, M: int = 64, kind: str = DSS,
                seed: int = 0, per_block_seed: bool = False) -> MeasurementSet:
    """Measure every block of ``image`` on the tiling defined by ``block``/``interior``."""
    image = np.asarray(image, dtype=np.float64)
    if (block - interior) % 2 or interior > block:
        raise InvalidShape(f"block {block} and interior {interior} need an even, non-negative ring")
    grid = build_block_grid(image.shape, interior, (block - interior) // 2)
    out = MeasurementSet(image_shape=image.shape, block=block, interior=interior, M=int(M),
                         kind=kind, seed=int(seed), per_block_seed=per_block_seed,
                         y=np.empty(grid.grid_shape + (int(M),)))
    for spec in grid:
        out.y[spec.block_row, spec.block_col] = measure(out.matrix(spec.id),
                                                        extract_block(image, spec))
    return out
