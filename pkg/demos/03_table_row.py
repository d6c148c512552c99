"""Reproduce the M=64 half of the results table for one image.

Runs independent reconstruction with Gaussian matrices at M=73 (same total
measurement count on the non-overlapping grid) and the three constrained
variants at M=64, then prints PSNR and SSIM. Takes a couple of minutes on
one core; pass ``--workers N`` to spread the blocks over N processes.
"""
import argparse
import os

from scbcs import psnr, read_pgm, ssim
from scbcs.bench import run_scheme

HERE = os.path.dirname(os.path.abspath(__file__))

ap = argparse.ArgumentParser()
ap.add_argument("image", nargs="?", default="lena")
ap.add_argument("--workers", type=int, default=1)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

ref = read_pgm(os.path.join(HERE, "..", "data", "images", f"{args.image}.pgm")).astype(float)
print(f"{'scheme':12s} {'M':>4s} {'PSNR':>7s} {'SSIM':>6s} {'time':>6s}")
for scheme, M in (("independent", 73), ("sc-bcs", 64), ("sc-baseline", 64), ("sc-genie", 64)):
    out, stats = run_scheme(ref, scheme, M, args.seed, workers=args.workers)
    print(f"{scheme:12s} {M:4d} {psnr(ref, out):7.2f} {ssim(ref, out):6.3f} "
          f"{stats.wall_time:5.1f}s")
