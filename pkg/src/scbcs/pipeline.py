"""Two-phase reconstruction of a whole image from its block measurements.

Phase one computes every block preview and merges them (a barrier); phase
two solves the blocks independently. Both phases fan out over a process
pool. Each block is computed by the same deterministic code whatever the
pool size, so the output does not depend on the worker count.
"""
from __future__ import annotations

import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional

import numpy as np

from .exceptions import WrongMatrixKind
from .geometry import BlockGrid, assemble_image
from .preview import (REFERENCE_M, PreviewImage, block_preview, estimate_border_epsilons, merge_previews,
                      upsample_preview)
from .sensing import DSS, MeasurementSet
from .solver import INDEPENDENT, SolveInfo, SolverConfig, reconstruct_block

log = logging.getLogger(__name__)

Hook = Callable[..., None]


@dataclass
class ReconstructionStats:
    wall_time: float
    infos: Dict[tuple, SolveInfo] = field(default_factory=dict)

    @property
    def not_converged(self):
        return sorted(k for k, v in self.infos.items() if not v.converged)

    @property
    def eps_retries(self):
        return sorted(k for k, v in self.infos.items() if v.eps_scale != 1.0)

    def summary(self) -> str:
        its = [v.iterations for v in self.infos.values()]
        return (f"{len(self.infos)} blocks in {self.wall_time:.1f} s; iterations "
                f"mean {np.mean(its):.0f} max {max(its)}; not converged {len(self.not_converged)}; "
                f"eps doubled {len(self.eps_retries)}")


# Worker-side context, installed once per process by _init_worker.
_CTX: dict = {}


def _init_worker(ctx):
    _CTX.clear()
    _CTX.update(ctx)


def _preview_task(block_id):
    ms: MeasurementSet = _CTX["measurements"]
    return block_id, upsample_preview(block_preview(ms[block_id]), ms.block)


def _solve_task(block_id):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        X, info = reconstruct_block(_CTX["grid"], block_id, _CTX["measurements"],
                                    _CTX.get("preview"), _CTX.get("epsilons"), _CTX["config"],
                                    truth=_CTX.get("truth"), return_info=True)
    return block_id, X, info


class _Runner:
    """Runs tasks inline (1 worker) or on a process pool, always in block order."""

    def __init__(self, workers: int):
        self.workers = max(1, int(workers))

    def map(self, fn, items, ctx):
        if self.workers == 1:
            _init_worker(ctx)
            try:
                return [fn(i) for i in items]
            finally:
                _CTX.clear()
        chunk = max(1, len(items) // (4 * self.workers))
        with ProcessPoolExecutor(self.workers, initializer=_init_worker, initargs=(ctx,)) as pool:
            return list(pool.map(fn, items, chunksize=chunk))


def compute_preview(measurements: MeasurementSet, workers: int = 1,
                    hook: Optional[Hook] = None) -> PreviewImage:
    """Block previews, upsampled and merged into one full-size preview."""
    if measurements.kind != DSS:
        raise WrongMatrixKind("previews need DSS measurements")
    grid = measurements.grid()
    results = _Runner(workers).map(_preview_task, grid.ids(), {"measurements": measurements})
    previews = {}
    for block_id, pv in results:
        previews[block_id] = pv
        if hook:
            hook("preview", block_id)
    merged = merge_previews(grid, previews, measurements=measurements.M)
    if hook:
        hook("merge", None)
    return merged


def reconstruct_image(measurements: MeasurementSet, scheme: str = "sc-bcs",
                      config: Optional[SolverConfig] = None, alpha: float = 1.0,
                      s_floor: float = 1.0, workers: int = 1, truth=None,
                      hook: Optional[Hook] = None, rate_scaling: bool = True):
    """Reconstruct the full image; returns ``(image, preview, stats)``.

    ``image`` is real-valued and clipped to [0, 255]; ``preview`` is ``None``
    for Gaussian measurements. ``hook(event, block_id)`` is called with
    ``"preview"``, ``"merge"``, ``"solve"`` (when a block is handed to the
    pool) and ``"done"``. ``rate_scaling=False`` takes the preview
    disagreement at face value when sizing the border balls.
    """
    config = config or SolverConfig()
    if config.mode != scheme:
        config = replace(config, mode=scheme)
    if scheme != INDEPENDENT and measurements.kind != DSS:
        raise WrongMatrixKind(f"scheme {scheme!r} needs DSS measurements")
    start = time.perf_counter()
    grid: BlockGrid = measurements.grid()
    runner = _Runner(workers)

    preview = None
    epsilons = None
    if measurements.kind == DSS:
        preview = compute_preview(measurements, workers, hook)
        if scheme != INDEPENDENT:
            epsilons = estimate_border_epsilons(grid, preview, alpha, s_floor,
                                                    reference_m=REFERENCE_M if rate_scaling else None)

    ctx = {"grid": grid, "measurements": measurements, "preview": preview,
           "epsilons": epsilons, "config": config,
           "truth": None if truth is None else np.asarray(truth, dtype=np.float64)}
    ids = grid.ids()
    if hook:
        for block_id in ids:
            hook("solve", block_id)
    results = runner.map(_solve_task, ids, ctx)

    inside, infos = {}, {}
    for block_id, X, info in results:
        inside[block_id] = X
        infos[block_id] = info
        if hook:
            hook("done", block_id)
    image = assemble_image(grid, inside)
    stats = ReconstructionStats(wall_time=time.perf_counter() - start, infos=infos)
    log.info("%s", stats.summary())
    return image, preview, stats
