import warnings

import numpy as np
import pytest

from scbcs.exceptions import WrongMatrixKind
from scbcs.metrics import psnr
from scbcs.pipeline import compute_preview, reconstruct_image
from scbcs.sensing import GAUSSIAN, sense_image
from scbcs.solver import SolverConfig

FAST = SolverConfig(max_iterations=300)


@pytest.fixture(scope="module")
def crop_ms(lena_crop):
    return sense_image(lena_crop, M=64, seed=2)


def test_phase_barrier_order(crop_ms):
    events = []
    reconstruct_image(crop_ms, "sc-bcs", FAST, hook=lambda ev, bid: events.append(ev))
    merge_at = events.index("merge")
    assert events.count("merge") == 1
    assert all(e == "preview" for e in events[:merge_at])
    assert events.count("preview") == 16
    assert "solve" not in events[:merge_at]
    assert events.count("solve") == events.count("done") == 16


def test_output_independent_of_worker_count(crop_ms):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a, _, _ = reconstruct_image(crop_ms, "sc-bcs", FAST, workers=1)
        b, _, _ = reconstruct_image(crop_ms, "sc-bcs", FAST, workers=2)
    assert a.tobytes() == b.tobytes()


def test_schemes_produce_sensible_images(crop_ms, lena_crop):
    out = {}
    for scheme in ("sc-bcs", "sc-baseline", "sc-genie"):
        img, pv, stats = reconstruct_image(crop_ms, scheme, truth=lena_crop)
        assert img.shape == lena_crop.shape and img.min() >= 0 and img.max() <= 255
        assert len(stats.infos) == 16
        out[scheme] = psnr(lena_crop, img)
    assert out["sc-bcs"] > psnr(lena_crop, np.clip(pv.pixels, 0, 255))
    assert out["sc-genie"] >= out["sc-baseline"] - 0.1
    assert "blocks in" in stats.summary()


def test_independent_on_gaussian(lena):
    ms = sense_image(lena[:128, :128], interior=32, M=73, kind=GAUSSIAN)
    img, pv, stats = reconstruct_image(ms, "independent", FAST)
    assert pv is None and img.shape == (128, 128)
    with pytest.raises(WrongMatrixKind):
        reconstruct_image(ms, "sc-bcs")
    with pytest.raises(WrongMatrixKind):
        compute_preview(ms)


def test_genie_requires_truth(crop_ms):
    with pytest.raises(ValueError):
        reconstruct_image(crop_ms, "sc-genie", FAST)
