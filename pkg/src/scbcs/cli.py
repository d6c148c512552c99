"""Command-line front end: sense, preview, reconstruct, evaluate, bench.

Settings resolve in three layers: built-in defaults, then an optional
``--config`` file of ``key=value`` lines, then explicit flags. Config keys
use the long flag names with dashes or underscores (``max-iter=500``).
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import bench as _bench
from .exceptions import SCBCSError, WrongMatrixKind
from .measurement_file import read_measurements, write_measurements
from .metrics import QualityReport, quality_report
from .pgm import read_pgm, write_pgm
from .pipeline import compute_preview, reconstruct_image
from .sensing import DSS, GAUSSIAN, sense_image
from .solver import INDEPENDENT, MODES, SolverConfig

log = logging.getLogger("scbcs")

DEFAULTS = {
    "scheme": "sc-bcs",
    "measurements": None,  # 64 for constrained schemes, 73 for independent
    "block": 32,
    "interior": None,
    "seed": 0,
    "matrix": None,
    "per_block_seed": False,
    "alpha": 1.0,
    "s_floor": 1.0,
    "eps_rate_scaling": True,
    "workers": 1,
    "max_iter": 2000,
    "tol": 1e-4,
    "step_ratio": 3.0,
}
_INDEPENDENT_M = 73
_SC_M = 64

_BOOL_KEYS = {"per_block_seed", "aggregate", "eps_rate_scaling"}
_INT_KEYS = {"block", "interior", "seed", "workers", "max_iter"}
_FLOAT_KEYS = {"alpha", "s_floor", "tol", "step_ratio"}


class UsageError(Exception):
    pass


def read_config(path: str) -> Dict[str, object]:
    """Parse a ``key=value`` file; ``#`` starts a comment."""
    out: Dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            out[key] = _coerce(key, value, f"{path}:{lineno}")
    return out


def _coerce(key, value, where):
    try:
        if key in _BOOL_KEYS:
            low = value.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(value)
            return low in ("1", "true", "yes", "on")
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise UsageError(f"{where}: bad value {value!r} for {key}") from None
    return value


def resolve(args: argparse.Namespace) -> Dict[str, object]:
    """Merge defaults, the config file and explicit flags (in that order)."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for key, value in vars(args).items():
        if key in ("config", "func") or value is None:
            continue
        settings[key] = value
    return settings


def _default_m(scheme: str) -> int:
    return _INDEPENDENT_M if scheme == INDEPENDENT else _SC_M


def _solver_config(s) -> SolverConfig:
    return SolverConfig(max_iterations=int(s["max_iter"]), tol=float(s["tol"]),
                        step_ratio=float(s["step_ratio"]),
                        mode=s["scheme"] if s["scheme"] in MODES else SolverConfig().mode)


def _require(s, *keys):
    for k in keys:
        if not s.get(k):
            raise UsageError(f"--{k.replace('_', '-')} is required")


# ---- subcommands -------------------------------------------------------------

def cmd_sense(s) -> int:
    _require(s, "input", "output")
    scheme = s["scheme"]
    interior, kind = _bench.scheme_geometry(scheme, int(s["block"]), s["interior"], s["matrix"])
    M = int(s["measurements"] or _default_m(scheme))
    image = read_pgm(s["input"]).astype(np.float64)
    ms = sense_image(image, block=int(s["block"]), interior=interior, M=M, kind=kind,
                     seed=int(s["seed"]), per_block_seed=bool(s["per_block_seed"]))
    write_measurements(s["output"], ms)
    blocks = ms.y.shape[0] * ms.y.shape[1]
    ratio = ms.compression_ratio
    print(f"{blocks} blocks ({ms.y.shape[0]}x{ms.y.shape[1]}), M={M}, {kind} matrices")
    print(f"measurement ratio {ratio:.4%} (compression {1 - ratio:.2%})")
    return 0


def cmd_preview(s) -> int:
    _require(s, "input", "output")
    ms = read_measurements(s["input"])
    if ms.kind != DSS:
        raise WrongMatrixKind("preview needs a DSS measurement file")
    pv = compute_preview(ms, workers=int(s["workers"]))
    write_pgm(s["output"], pv.pixels)
    by_side: Dict[str, List[float]] = {}
    for (_, side), value in pv.disagreement.items():
        by_side.setdefault(side, []).append(value)
    print("preview disagreement over overlap strips (RMS, grey levels):")
    for side in sorted(by_side):
        v = np.asarray(by_side[side])
        print(f"  {side:6s} n={v.size:4d} mean={v.mean():.3f} median={np.median(v):.3f} "
              f"max={v.max():.3f}")
    return 0


def cmd_reconstruct(s) -> int:
    _require(s, "input", "output")
    ms = read_measurements(s["input"])
    scheme = s["scheme"]
    if scheme not in MODES:
        raise UsageError(f"unknown scheme {scheme!r}; choose from {', '.join(MODES)}")
    if ms.kind == GAUSSIAN and scheme != INDEPENDENT:
        raise WrongMatrixKind(f"scheme {scheme!r} needs a DSS measurement file")
    truth = None
    if scheme == "sc-genie":
        if not s.get("original"):
            raise UsageError("sc-genie needs --original")
        truth = read_pgm(s["original"]).astype(np.float64)
    image, _, stats = reconstruct_image(ms, scheme, _solver_config(s), alpha=float(s["alpha"]),
                                        s_floor=float(s["s_floor"]),
                                        rate_scaling=bool(s["eps_rate_scaling"]),
                                        workers=int(s["workers"]), truth=truth)
    write_pgm(s["output"], image)
    print(f"wall time {stats.wall_time:.2f} s with {int(s['workers'])} worker(s)")
    print(stats.summary())
    for block_id in stats.not_converged:
        info = stats.infos[block_id]
        print(f"  block {block_id}: iteration cap reached "
              f"(residual {info.residual:.2e}, border violation {info.border_violation:.2e})")
    for block_id in stats.eps_retries:
        print(f"  block {block_id}: border radius scaled by {stats.infos[block_id].eps_scale:g}")
    return 0


def cmd_evaluate(s) -> int:
    _require(s, "reference", "test")
    ref = read_pgm(s["reference"])
    test = read_pgm(s["test"])
    M = int(s["measurements"] or 0)
    rep = quality_report(ref, test, image=s.get("image") or "", scheme=s.get("label") or "",
                         M=M, seed=int(s["seed"]))
    _emit_csv([QualityReport.HEADER, rep.row()], s.get("output"))
    return 0


def cmd_bench(s) -> int:
    images = s.get("images") or []
    schemes = s.get("schemes") or []
    if isinstance(images, str):
        images = images.split(",")
    if isinstance(schemes, str):
        schemes = schemes.split(",")
    ms_list = _int_list(s.get("m_list"))
    seeds = _int_list(s.get("seeds")) or [int(s["seed"])]
    if not schemes:
        raise UsageError("no schemes given")
    if not images:
        raise UsageError("no images given")
    rows = _bench.run_bench(images, schemes, ms_list, seeds, aggregate=bool(s.get("aggregate")),
                            block=int(s["block"]), interior=s["interior"], matrix=s["matrix"],
                            config=_solver_config(dict(s, scheme=SolverConfig().mode)),
                            alpha=float(s["alpha"]), s_floor=float(s["s_floor"]),
                            rate_scaling=bool(s["eps_rate_scaling"]),
                            workers=int(s["workers"]), per_block_seed=bool(s["per_block_seed"]))
    text = _bench.rows_to_csv(rows)
    if s.get("output"):
        with open(s["output"], "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if s.get("plot_script"):
        data_path = s["plot_script"] + ".dat"
        with open(data_path, "w", encoding="utf-8") as fh:
            fh.write(_bench.plot_data(rows))
        with open(s["plot_script"], "w", encoding="utf-8") as fh:
            fh.write(_bench.plot_script(rows, data_path))
    failed = sum(r.status != "ok" for r in rows)
    if failed:
        log.warning("%d bench cell(s) failed", failed)
    return 0


def _int_list(value) -> List[int]:
    if value is None:
        return []
    if isinstance(value, str):
        return [int(v) for v in value.replace(" ", "").split(",") if v]
    return [int(v) for v in value]


def _emit_csv(rows, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    else:
        csv.writer(sys.stdout, lineterminator="\n").writerows(rows)


# ---- argument parsing --------------------------------------------------------

def _common(p: argparse.ArgumentParser, *, sensing=False, solving=False):
    p.add_argument("--config", help="key=value file; explicit flags override it")
    p.add_argument("--workers", type=int)
    if sensing or solving:
        p.add_argument("--scheme", choices=MODES)
        p.add_argument("--seed", type=int)
    if sensing:
        p.add_argument("--measurements", "-M", type=int,
                       help="measurements per block (default 64, or 73 for independent)")
        p.add_argument("--block", type=int)
        p.add_argument("--interior", type=int)
        p.add_argument("--matrix", choices=(DSS, GAUSSIAN))
        p.add_argument("--per-block-seed", action="store_const", const=True, default=None)
    if solving:
        p.add_argument("--alpha", type=float)
        p.add_argument("--s-floor", type=float)
        p.add_argument("--no-eps-rate-scaling", dest="eps_rate_scaling", action="store_const",
                       const=False, default=None,
                       help="size border balls from the raw preview disagreement")
        p.add_argument("--max-iter", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--step-ratio", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scbcs", description="Smoothness-constrained block "
                                     "compressed sensing of grayscale images.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sense", help="measure a PGM image and write a measurement file")
    p.add_argument("--input", "-i")
    p.add_argument("--output", "-o")
    _common(p, sensing=True)
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("preview", help="write the merged low-resolution preview")
    p.add_argument("--input", "-i")
    p.add_argument("--output", "-o")
    _common(p)
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a measurement file")
    p.add_argument("--input", "-i")
    p.add_argument("--output", "-o")
    p.add_argument("--original", help="ground-truth PGM (sc-genie only)")
    _common(p, solving=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="PSNR and SSIM of a test image against a reference")
    p.add_argument("--reference", "-r")
    p.add_argument("--test", "-t")
    p.add_argument("--input", dest="test", help=argparse.SUPPRESS)
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    p.add_argument("--image", help="label for the image column")
    p.add_argument("--label", help="label for the scheme column")
    p.add_argument("--measurements", "-M", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="images x schemes x M x seeds benchmark as CSV")
    p.add_argument("--images", nargs="+", help="PGM files")
    p.add_argument("--schemes", nargs="+", help="scheme names, optionally name@M")
    p.add_argument("--m-list", help="comma-separated M values for bare scheme names")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--aggregate", action="store_const", const=True, default=None,
                   help="add a mean-over-seeds row per cell")
    p.add_argument("--plot-script", help="write gnuplot commands here (data beside it)")
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    _common(p, sensing=True, solving=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = args.func
    del args.verbose, args.command
    try:
        settings = resolve(args)
        return func(settings)
    except (SCBCSError, UsageError, ValueError, OSError) as exc:
        print(f"scbcs {func.__name__[4:]}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
