"""Cross-product benchmark: images x schemes x measurement rates x seeds."""
from __future__ import annotations

import csv
import io
import logging
import os
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .metrics import psnr, ssim
from .pgm import read_pgm, to_uint8
from .pipeline import reconstruct_image
from .sensing import DSS, GAUSSIAN, sense_image
from .solver import INDEPENDENT, MODES, SolverConfig

log = logging.getLogger(__name__)

BENCH_HEADER = ["image", "scheme", "M", "seed", "psnr_db", "ssim", "seconds", "status"]


def scheme_geometry(scheme: str, block: int = 32, interior: Optional[int] = None,
                    matrix: Optional[str] = None) -> Tuple[int, str]:
    """(interior, matrix kind) used to sense an image for ``scheme``.

    The independent scheme tiles without overlap and defaults to Gaussian
    matrices; the constrained schemes need overlapping DSS acquisition.
    """
    if scheme not in MODES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(MODES)}")
    if scheme == INDEPENDENT:
        return (block if interior is None else interior), (matrix or GAUSSIAN)
    kind = matrix or DSS
    if kind != DSS:
        raise ValueError(f"scheme {scheme!r} requires DSS matrices")
    return (block - 2 if interior is None else interior), kind


def run_scheme(image: np.ndarray, scheme: str, M: int, seed: int = 0, block: int = 32,
               interior: Optional[int] = None, matrix: Optional[str] = None,
               config: Optional[SolverConfig] = None, alpha: float = 1.0, s_floor: float = 1.0,
               workers: int = 1, per_block_seed: bool = False, rate_scaling: bool = True):
    """Sense and reconstruct ``image``; returns ``(uint8 image, stats)``."""
    interior, kind = scheme_geometry(scheme, block, interior, matrix)
    ms = sense_image(image, block=block, interior=interior, M=M, kind=kind, seed=seed,
                     per_block_seed=per_block_seed)
    recon, _, stats = reconstruct_image(ms, scheme, config, alpha=alpha, s_floor=s_floor,
                                        workers=workers, rate_scaling=rate_scaling,
                                        truth=image if scheme == "sc-genie" else None)
    return to_uint8(recon), stats


def parse_scheme_spec(text: str, default_ms: Sequence[int]) -> List[Tuple[str, int]]:
    """``"sc-bcs@64"`` -> [("sc-bcs", 64)]; a bare name expands over ``default_ms``."""
    if "@" in text:
        name, m = text.split("@", 1)
        return [(name, int(m))]
    if not default_ms:
        raise ValueError(f"scheme {text!r} has no @M and no measurement list was given")
    return [(text, int(m)) for m in default_ms]


@dataclass
class BenchRow:
    image: str
    scheme: str
    M: int
    seed: str
    psnr_db: float
    ssim: float
    seconds: float
    status: str = "ok"

    def cells(self):
        def fmt(v, digits):
            if isinstance(v, str):
                return v
            if np.isnan(v):
                return "ERROR"
            return "inf" if np.isinf(v) else f"{v:.{digits}f}"
        return [self.image, self.scheme, str(self.M), str(self.seed), fmt(self.psnr_db, 4),
                fmt(self.ssim, 6), f"{self.seconds:.2f}", self.status]


def run_bench(images: Sequence[str], schemes: Sequence[str], ms: Sequence[int] = (),
              seeds: Sequence[int] = (0,), aggregate: bool = False, **kwargs) -> List[BenchRow]:
    """One row per (image, scheme, M, seed); failures are recorded, not raised."""
    if not images:
        raise ValueError("no images given")
    if not schemes:
        raise ValueError("no schemes given")
    cells = [pair for s in schemes for pair in parse_scheme_spec(s, ms)]
    for name, _ in cells:
        scheme_geometry(name)
    rows: List[BenchRow] = []
    for path in images:
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            ref = read_pgm(path).astype(np.float64)
        except Exception as exc:  # recorded per cell, run continues
            ref, load_error = None, exc
        for scheme, M in cells:
            per_seed = []
            for seed in seeds:
                t0 = time.perf_counter()
                try:
                    if ref is None:
                        raise load_error
                    out, _ = run_scheme(ref, scheme, M, seed, **kwargs)
                    row = BenchRow(name, scheme, M, str(seed), psnr(ref, out), ssim(ref, out),
                                   time.perf_counter() - t0)
                    per_seed.append(row)
                except Exception as exc:
                    log.warning("bench cell %s/%s@%d seed %s failed: %s", name, scheme, M, seed, exc)
                    row = BenchRow(name, scheme, M, str(seed), float("nan"), float("nan"),
                                   time.perf_counter() - t0, f"error: {exc}".replace(",", ";"))
                rows.append(row)
            if aggregate and per_seed:
                rows.append(BenchRow(name, scheme, M, "mean",
                                     float(np.mean([r.psnr_db for r in per_seed])),
                                     float(np.mean([r.ssim for r in per_seed])),
                                     float(np.sum([r.seconds for r in per_seed]))))
    return rows


def rows_to_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def plot_script(rows: Sequence[BenchRow], data_path: str) -> str:
    """Gnuplot commands drawing PSNR per image and scheme from ``data_path``.

    ``data_path`` should hold :func:`plot_data` output.
    """
    cols = sorted({f"{r.scheme}@{r.M}" for r in rows})
    lines = [
        "set terminal pngcairo size 900,500",
        "set output 'bench_psnr.png'",
        "set style data histograms",
        "set style histogram clustered",
        "set style fill solid 0.8",
        "set ylabel 'PSNR (dB)'",
        "set key outside",
    ]
    series = [f"'{data_path}' using {i + 2}:xtic(1) title '{c}'" for i, c in enumerate(cols)]
    lines.append("plot " + ", \\\n     ".join(series))
    return "\n".join(lines) + "\n"


def plot_data(rows: Sequence[BenchRow]) -> str:
    """Whitespace table: one line per image, one PSNR column per scheme@M.

    Uses the seed-mean row when present, otherwise the first seed.
    """
    cols = sorted({f"{r.scheme}@{r.M}" for r in rows})
    images = list(dict.fromkeys(r.image for r in rows))
    table = {}
    for r in rows:
        if r.status != "ok":
            continue
        key = (r.image, f"{r.scheme}@{r.M}")
        # a seed-mean row wins over individual seeds
        if r.seed == "mean" or key not in table:
            table[key] = r.psnr_db
    out = ["# image " + " ".join(cols)]
    for im in images:
        vals = [table.get((im, c), float("nan")) for c in cols]
        out.append(im + " " + " ".join("NaN" if np.isnan(v) else f"{v:.4f}" for v in vals))
    return "\n".join(out) + "\n"
