"""How wide should the border balls be?

The radius of each border constraint is built from how much two
neighbouring block previews disagree on their shared strip. That
disagreement is mostly leakage of the random matrix part into the
preview, and leakage shrinks as M grows, while the true step from one
pixel row to the next does not. This script counts how often the true
image violates its own border balls with the disagreement taken at face
value and with it rescaled by M/64.
"""
import os

import numpy as np

from scbcs import compute_preview, estimate_border_epsilons, read_pgm, sense_image
from scbcs.solver import border_targets

HERE = os.path.dirname(os.path.abspath(__file__))
image = read_pgm(os.path.join(HERE, "..", "data", "images", "lena.pgm")).astype(float)


def violation_rate(ms, preview, reference_m):
    grid = ms.grid()
    eps = estimate_border_epsilons(grid, preview, reference_m=reference_m)
    bad = total = 0
    for spec in grid:
        (r0, r1), (c0, c1) = spec.image_inside_rows, spec.image_inside_cols
        edges = {"top": image[r0, c0:c1], "bottom": image[r1 - 1, c0:c1],
                 "left": image[r0:r1, c0], "right": image[r0:r1, c1 - 1]}
        for side, target in border_targets(spec, preview.pixels).items():
            total += 1
            bad += np.linalg.norm(edges[side] - target) > eps[spec.id][side]
    return bad / total


for M in (64, 256):
    ms = sense_image(image, M=M, seed=1)
    pv = compute_preview(ms)
    print(f"M={M:3d}: truth outside its ball on {violation_rate(ms, pv, None):5.1%} of sides "
          f"(raw disagreement), {violation_rate(ms, pv, 64):5.1%} (rescaled by M/64)")
