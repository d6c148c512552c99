"""Constrained TV minimisation for one block.

All three recovery problems share one shape::

    minimise   TV(X)
    subject to Phi vec(X) = y
               ||x_side - target_side||_2 <= eps_side   for each constrained side

and are solved with a primal-dual hybrid gradient iteration (Chambolle-Pock).
The measurement set is handled in the primal step by exact projection onto
the affine set ``{x : Phi x = y}``; TV and the border balls are dualised. A
final Dykstra pass moves the iterate onto the intersection of the affine
set and the balls so the returned block is feasible.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .exceptions import DimensionMismatch, InfeasibleConstraints, NotConverged
from .geometry import BlockGrid, BlockSpec, extract_block, extract_inside
from .sensing import split_matrix_columns

log = logging.getLogger(__name__)

INDEPENDENT = "independent"
SC_BASELINE = "sc-baseline"
SC_PREDICTED = "sc-bcs"
GENIE = "sc-genie"
MODES = (INDEPENDENT, SC_BASELINE, SC_PREDICTED, GENIE)


@dataclass(frozen=True)
class SolverConfig:
    """Iteration limits and tolerances of the block solver.

    ``delta_eq`` is the admissible measurement residual as a fraction of
    ``||y||``; border balls may be exceeded by ``delta_eq * eps``.
    ``step_ratio`` is the primal/dual step balance ``tau / sigma`` (in
    units of the operator norm); pixel intensities are O(100) while TV duals
    are O(1). The relative-change test ``||x_k - x_{k-window}|| <= tol ||x_k||``
    is evaluated every ``window`` iterations.
    """

    max_iterations: int = 2000
    tol: float = 1e-4
    delta_eq: float = 1e-4
    mode: str = SC_PREDICTED
    step_ratio: float = 3.0
    min_iterations: int = 20
    repair_iterations: int = 2000
    window: int = 10

    def __post_init__(self):
        if self.max_iterations < 1 or self.window < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.tol > 0 and self.delta_eq > 0 and self.step_ratio > 0):
            raise ValueError("tolerances and step_ratio must be > 0")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class BorderConstraint:
    target: np.ndarray
    eps: float


@dataclass
class ReconstructionProblem:
    """Operands of a constrained block recovery.

    ``constraints`` maps a side name to the target vector and radius for the
    corresponding first/last row/column of the ``shape`` region.
    """

    phi: np.ndarray
    y: np.ndarray
    shape: Tuple[int, int]
    prediction: Optional[np.ndarray] = None
    constraints: Dict[str, BorderConstraint] = field(default_factory=dict)
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        n = self.shape[0] * self.shape[1]
        if self.phi.shape != (self.y.size, n):
            raise DimensionMismatch(
                f"phi {self.phi.shape} does not match y ({self.y.size}) and shape {self.shape}")
        if self.prediction is not None and np.shape(self.prediction) != tuple(self.shape):
            raise DimensionMismatch("prediction shape differs from problem shape")


@dataclass
class SolveInfo:
    iterations: int
    converged: bool
    tv: float
    residual: float
    border_violation: float
    eps_scale: float = 1.0


# -- TV ------------------------------------------------------------------

def gradient(X: np.ndarray) -> np.ndarray:
    """Forward differences with replicate boundary; shape ``(2,) + X.shape``."""
    g = np.zeros((2,) + X.shape)
    g[0, :-1, :] = X[1:, :] - X[:-1, :]
    g[1, :, :-1] = X[:, 1:] - X[:, :-1]
    return g


def gradient_adjoint(g: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`gradient` (minus the discrete divergence)."""
    gx, gy = g[0], g[1]
    out = np.zeros(gx.shape)
    out[:-1, :] -= gx[:-1, :]
    out[1:, :] += gx[:-1, :]
    out[:, :-1] -= gy[:, :-1]
    out[:, 1:] += gy[:, :-1]
    return out


def tv_norm(X) -> float:
    """Isotropic total variation with zero differences past the last row/column."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    g = gradient(X)
    return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())


# -- helpers ---------------------------------------------------------------

def side_indices(shape: Tuple[int, int], side: str) -> np.ndarray:
    """Flat row-major indices of a side of a ``shape`` region."""
    h, w = shape
    idx = np.arange(h * w).reshape(h, w)
    return {"top": idx[0, :], "bottom": idx[-1, :],
            "left": idx[:, 0], "right": idx[:, -1]}[side].copy()


def subtract_border_contribution(y, phi_border, border_pixels) -> np.ndarray:
    """``y - Phi_border x_border``."""
    y = np.asarray(y, dtype=np.float64)
    phi_border = np.asarray(phi_border, dtype=np.float64)
    xb = np.asarray(border_pixels, dtype=np.float64).reshape(-1)
    if phi_border.shape != (y.size, xb.size):
        raise DimensionMismatch(
            f"border matrix {phi_border.shape} vs y ({y.size}) and border ({xb.size})")
    if xb.size == 0:
        return y.copy()
    return y - phi_border @ xb


class _AffineProjector:
    """Orthogonal projection onto ``{x : A x = b}`` (least squares if empty)."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = A
        self.b = b
        self.pinv = np.linalg.pinv(A)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x - self.pinv @ (self.A @ x - self.b)


def _project_ball(z, center, radius):
    d = z - center
    nrm = np.sqrt(d @ d)
    if nrm <= radius:
        return z
    return center + d * (radius / nrm)


def _violation(x, sides) -> float:
    """Largest ball violation relative to its radius."""
    worst = 0.0
    for idx, t, eps in sides:
        d = x[idx] - t
        worst = max(worst, float(np.sqrt(d @ d)) - eps)
    return worst


def _within(x, sides, delta) -> bool:
    for idx, t, eps in sides:
        d = x[idx] - t
        if np.sqrt(d @ d) > eps * (1.0 + delta):
            return False
    return True


def _dykstra(x, proj_aff, sides, delta, max_iter):
    """Project ``x`` onto (affine set) cap (balls); ends on an affine step."""
    sets = [None] + list(range(len(sides)))
    incr = [np.zeros_like(x) for _ in sets]
    z = proj_aff(x)
    if _within(z, sides, delta):
        return z, True
    for _ in range(max_iter):
        for k, s in enumerate(sets):
            v = z + incr[k]
            if s is None:
                new = proj_aff(v)
            else:
                idx, t, eps = sides[s]
                new = v.copy()
                new[idx] = _project_ball(v[idx], t, eps)
            incr[k] = v - new
            z = new
        # last set visited is a ball; finish on the affine set
        cand = proj_aff(z)
        if _within(cand, sides, delta):
            return cand, True
    return proj_aff(z), False


def _pdhg(A, b, shape, x0, sides, cfg: SolverConfig):
    """Core iteration. ``sides`` is a list of ``(flat_idx, target, eps)``."""
    n = shape[0] * shape[1]
    proj = _AffineProjector(A, b)
    x = proj(np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(-1))

    cover = np.zeros(n)
    for idx, _, _ in sides:
        cover[idx] += 1.0
    L = np.sqrt(8.0 + (cover.max() if sides else 0.0))
    tau = cfg.step_ratio / L
    sigma = 0.99 / (cfg.step_ratio * L)

    p = np.zeros((2,) + tuple(shape))
    q = [np.zeros(len(idx)) for idx, _, _ in sides]
    xbar = x.copy()
    x_ref = x.copy()
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        # dual ascent
        p += sigma * gradient(xbar.reshape(shape))
        mag = np.maximum(1.0, np.sqrt(p[0] ** 2 + p[1] ** 2))
        p /= mag
        for k, (idx, t, eps) in enumerate(sides):
            v = q[k] + sigma * xbar[idx]
            q[k] = v - sigma * _project_ball(v / sigma, t, eps)
        # primal descent + affine projection
        step = gradient_adjoint(p).reshape(-1)
        for k, (idx, _, _) in enumerate(sides):
            step[idx] += q[k]
        x_new = proj(x - tau * step)
        xbar = 2.0 * x_new - x
        x = x_new
        if it % cfg.window:
            continue
        # change over a whole window, so slow steady drift is not mistaken for convergence
        dx = np.sqrt(np.sum((x - x_ref) ** 2))
        x_ref = x.copy()
        if it >= cfg.min_iterations and dx <= cfg.tol * max(np.sqrt(x @ x), 1.0):
            if _violation(x, sides) <= 0.0 or _within(x, sides, cfg.delta_eq):
                converged = True
                break
    return x, it, converged, proj


def _finish(A, b, shape, x0, sides, cfg: SolverConfig, offset=None):
    """Run PDHG, repair feasibility, retry once with doubled radii if needed."""
    eps_scale = 1.0
    for attempt in range(2):
        x, it, converged, proj = _pdhg(A, b, shape, x0, sides, cfg)
        x, feasible = _dykstra(x, proj, sides, cfg.delta_eq, cfg.repair_iterations)
        if feasible:
            break
        if attempt == 0:
            log.warning("border constraints infeasible after %d iterations; doubling eps", it)
            sides = [(idx, t, 2.0 * eps) for idx, t, eps in sides]
            eps_scale = 2.0
    else:
        raise InfeasibleConstraints(
            f"border balls exclude the measurement set (violation {_violation(x, sides):.3g})")

    X = x.reshape(shape)
    full = X if offset is None else X + offset
    residual = float(np.linalg.norm(A @ x - b))
    info = SolveInfo(iterations=it, converged=converged, tv=tv_norm(X), residual=residual,
                     border_violation=max(_violation(x, sides), 0.0), eps_scale=eps_scale)
    if not converged:
        warnings.warn(NotConverged(
            f"stopped after {it} iterations; residual {residual:.3g}, TV {info.tv:.6g}"),
            stacklevel=3)
    return full, info


# -- public entry points ---------------------------------------------------

def reconstruct_tv(phi, y, shape=None, config: SolverConfig = SolverConfig(), x0=None,
                   return_info: bool = False):
    """``argmin TV(X)`` subject to ``phi vec(X) = y``."""
    phi = np.asarray(phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = phi.shape[1]
    if shape is None:
        side = int(round(np.sqrt(n)))
        shape = (side, n // side)
    if phi.shape[0] != y.size or shape[0] * shape[1] != n:
        raise DimensionMismatch(f"phi {phi.shape}, y ({y.size}), shape {shape}")
    X, info = _finish(phi, y, tuple(shape), x0, [], config)
    return (X, info) if return_info else X


def _sides(problem: ReconstructionProblem, shift=None):
    out = []
    for side, c in problem.constraints.items():
        idx = side_indices(problem.shape, side)
        t = np.asarray(c.target, dtype=np.float64).reshape(-1)
        if t.size != idx.size:
            raise DimensionMismatch(f"{side} target has length {t.size}, expected {idx.size}")
        if c.eps < 0:
            raise ValueError("eps must be >= 0")
        if shift is not None:
            t = t - shift[idx]
        out.append((idx, t, float(c.eps)))
    return out


def reconstruct_sc(problem: ReconstructionProblem, config: SolverConfig = SolverConfig(),
                   return_info: bool = False):
    """TV recovery of the inside region with border-similarity balls."""
    X, info = _finish(problem.phi, problem.y, tuple(problem.shape), problem.x0,
                      _sides(problem), config)
    return (X, info) if return_info else X


def reconstruct_sc_predicted(problem: ReconstructionProblem,
                             config: SolverConfig = SolverConfig(), return_info: bool = False):
    """Recover only the prediction error ``E``; returns ``X_P + E``."""
    if problem.prediction is None:
        raise ValueError("reconstruct_sc_predicted needs a prediction")
    xp = np.asarray(problem.prediction, dtype=np.float64)
    xp_flat = xp.reshape(-1)
    b = problem.y - problem.phi @ xp_flat
    e0 = None if problem.x0 is None else np.asarray(problem.x0, dtype=np.float64) - xp
    X, info = _finish(problem.phi, b, tuple(problem.shape), e0,
                      _sides(problem, shift=xp_flat), config, offset=xp)
    return (X, info) if return_info else X


# -- per-block orchestration -------------------------------------------------

def border_targets(spec: BlockSpec, source: np.ndarray) -> Dict[str, np.ndarray]:
    """Neighbour rows/columns adjacent to the block's inside region.

    For the top side this is the bottom inside row of the block above, i.e.
    the image row just above the inside region; likewise for the others.
    Sides without a neighbour are omitted.
    """
    (r0, r1), (c0, c1) = spec.image_inside_rows, spec.image_inside_cols
    out = {}
    if spec.has_neighbor("top"):
        out["top"] = source[r0 - 1, c0:c1].copy()
    if spec.has_neighbor("bottom"):
        out["bottom"] = source[r1, c0:c1].copy()
    if spec.has_neighbor("left"):
        out["left"] = source[r0:r1, c0 - 1].copy()
    if spec.has_neighbor("right"):
        out["right"] = source[r0:r1, c1].copy()
    return out


def reconstruct_block(grid: BlockGrid, block_id, measurements, preview=None,
                      epsilons: Optional[Mapping] = None, config: SolverConfig = SolverConfig(),
                      truth: Optional[np.ndarray] = None, return_info: bool = False):
    """Recover the inside region of one block according to ``config.mode``.

    ``independent`` solves the plain TV problem on the whole block. The
    constrained modes subtract the neighbours' contribution from the
    measurements (preview pixels, or ``truth`` for ``sc-genie``), constrain the
    inside region's edges towards the adjacent rows/columns, and for
    ``sc-bcs`` solve for the residual with respect to the preview.
    """
    spec = grid[block_id]
    phi = measurements.matrix(spec.id).matrix
    y = measurements[spec.id]
    mode = config.mode

    if mode == INDEPENDENT:
        x0 = None if preview is None else extract_block(preview.pixels, spec)
        X, info = reconstruct_tv(phi, y, spec.shape, config, x0=x0, return_info=True)
        (r0, r1), (c0, c1) = spec.inside_rows, spec.inside_cols
        X = X[r0:r1, c0:c1]
        return (X, info) if return_info else X

    if preview is None or epsilons is None:
        raise ValueError(f"mode {mode!r} needs a preview and border epsilons")
    if mode == GENIE:
        if truth is None:
            raise ValueError("sc-genie needs the original image")
        source = np.asarray(truth, dtype=np.float64)
    else:
        source = preview.pixels

    phi_in, phi_bd = split_matrix_columns(phi, spec)
    y_in = subtract_border_contribution(y, phi_bd, extract_block(source, spec)[spec.border_indices])
    targets = border_targets(spec, source)
    radii = epsilons[spec.id]
    constraints = {side: BorderConstraint(t, radii[side]) for side, t in targets.items()}
    xp = extract_inside(preview.pixels, spec)
    problem = ReconstructionProblem(phi_in, y_in, spec.inside_shape,
                                    prediction=xp if mode == SC_PREDICTED else None,
                                    constraints=constraints, x0=xp)
    if mode == SC_PREDICTED:
        return reconstruct_sc_predicted(problem, config, return_info=return_info)
    return reconstruct_sc(problem, config, return_info=return_info)
