"""Where the preview comes from and how good it is.

A DSS matrix is a Hadamard transform of patch means plus a random part
that is blind to patch-constant content. Inverting the Hadamard part gives
a coarse picture of each block for free; merging the overlapping blocks
gives a full-size preview of the image.
"""
import os

import numpy as np

from scbcs import (block_preview, build_dss_matrix, compute_preview, psnr, read_pgm,
                   sense_image, write_pgm)

HERE = os.path.dirname(os.path.abspath(__file__))
image = read_pgm(os.path.join(HERE, "..", "data", "images", "lena.pgm")).astype(float)

# 1. patch-constant blocks are previewed exactly
S = build_dss_matrix(32, 64, seed=0)
means = np.random.default_rng(0).uniform(0, 255, (8, 8))
flat = np.kron(means, np.ones((4, 4)))
err = np.abs(block_preview(S.matrix @ flat.ravel()) - means).max()
print(f"patch-constant block: preview error {err:.2e}")
print(f"|F D^T| max: {np.abs(S.F @ S.D.T).max():.2e}")

# 2. natural blocks: preview = patch means + leakage of the random part
block = image[240:272, 240:272]
pv = block_preview(S.matrix @ block.ravel())
true_means = block.reshape(8, 4, 8, 4).mean(axis=(1, 3))
print(f"natural block: RMS leakage {np.sqrt(np.mean((pv - true_means) ** 2)):.2f} grey levels")

# 3. whole image at two rates
for M in (64, 256):
    merged = compute_preview(sense_image(image, M=M, seed=1))
    s = np.array(list(merged.disagreement.values()))
    print(f"M={M:3d}: preview PSNR {psnr(image, np.clip(merged.pixels, 0, 255)):.2f} dB, "
          f"median seam disagreement {np.median(s):.2f}")
    write_pgm(os.path.join(HERE, f"preview_M{M}.pgm"), merged.pixels)
