"""Smoothness-constrained block compressed sensing (SC-BCS) for grayscale images.

Blocks of an image are sensed with overlapping dual-scale matrices, a fast
Hadamard preview of every block is merged into a full-size estimate, and each
block is then recovered by TV minimisation under measurement equality and
soft agreement with its neighbours' borders.
"""
from .exceptions import (DimensionMismatch, FormatError, InfeasibleConstraints, InvalidLength,
                         InvalidOrder, InvalidShape, MissingBlock, NotConverged, OutOfBounds,
                         SCBCSError, TooSmall, WrongMatrixKind)
from .geometry import (BlockGrid, BlockSpec, assemble_image, build_block_grid, extract_block,
                       extract_inside, place_block)
from .measurement_file import read_measurements, write_measurements
from .metrics import QualityReport, psnr, quality_report, ssim
from .pgm import read_pgm, to_uint8, write_pgm
from .pipeline import ReconstructionStats, compute_preview, reconstruct_image
from .preview import (PreviewImage, block_preview, estimate_border_epsilons, fwht,
                      merge_previews, upsample_preview)
from .sensing import (DSS, GAUSSIAN, GENERATOR_ID, MeasurementSet, SensingMatrix,
                      build_downsampler, build_dss_matrix, build_gaussian_matrix, build_matrix,
                      hadamard, measure, sense_image)
from .solver import (GENIE, INDEPENDENT, MODES, SC_BASELINE, SC_PREDICTED, BorderConstraint,
                     ReconstructionProblem, SolveInfo, SolverConfig, reconstruct_block,
                     reconstruct_sc, reconstruct_sc_predicted, reconstruct_tv, tv_norm)

__version__ = "0.1.0"
