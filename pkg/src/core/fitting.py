"""
First Fresnel ellipse fitting.

Given boundary points in the anchor frame, find (d, θ) by exhaustive grid search followed by local
refinement rounds, each ten times finer than the last, around the incumbent. Two losses are available:

- plain: Σ [F(x, y, d, θ) − 1]² over all points
- split: per-side mean of the squared split-curve residuals (F_r for right points, F_l for left points)

Grid losses are evaluated in bulk with numpy; the scalar losses reuse the same kernels so a scalar loss and
the grid value at the same cell agree exactly.
"""

import math
from typing import Tuple

import numpy as np

from src.core.entities import (
    TWO_PI,
    AnchorPose,
    BoundaryPointSet,
    FitMethod,
    FitResult,
    FresnelParams,
    GridConfig,
    Point2,
    Side,
)
from src.core.errors import FitError, InputError
from src.core.geometry import to_world_frame

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="core.log")

REFINE_FACTOR = 10
# refinement window half-width, in steps of the previous round
REFINE_HALF_WIDTH = 2


def _rotated(xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """x′, y′ for every (θ, point) pair, shape (nθ, n)."""
    c, s = np.cos(thetas)[:, None], np.sin(thetas)[:, None]
    return c * xs[None, :] + s * ys[None, :], c * ys[None, :] - s * xs[None, :]


def plain_loss_grid(xs: np.ndarray, ys: np.ndarray, d_values: np.ndarray, thetas: np.ndarray,
                    wavelength: float) -> np.ndarray:
    """Σ (F − 1)² for every grid cell, shape (nd, nθ)."""
    xp, yp = _rotated(xs, ys, thetas)
    out = np.empty((len(d_values), len(thetas)))
    for i, d in enumerate(d_values):
        f = (4.0 * xp - 2.0 * d) ** 2 / (2.0 * d + wavelength) ** 2 + 16.0 * yp ** 2 / (wavelength * (4.0 * d + wavelength))
        out[i] = np.sum((f - 1.0) ** 2, axis=1)
    return out


def _side_mean_sq(xs: np.ndarray, ys: np.ndarray, d_values: np.ndarray, thetas: np.ndarray,
                  wavelength: float, side: Side) -> np.ndarray:
    xp, yp = _rotated(xs, ys, thetas)
    sign = 1.0 if side == Side.RIGHT else -1.0
    out = np.empty((len(d_values), len(thetas)))
    for i, d in enumerate(d_values):
        offset = np.abs(4.0 * xp - 2.0 * d)
        extent = 2.0 * d + wavelength
        ratio_sq = (offset / extent) ** 2
        half_width = math.sqrt(wavelength * (4.0 * d + wavelength)) / 4.0 * np.sqrt(np.clip(1.0 - ratio_sq, 0.0, None))
        residual = np.where(offset <= extent, yp + sign * half_width, (offset - extent) / wavelength + 1.0)
        out[i] = np.mean(residual ** 2, axis=1)
    return out


def split_loss_grid(P: BoundaryPointSet, d_values: np.ndarray, thetas: np.ndarray, wavelength: float) -> np.ndarray:
    """(1/|P^r|) Σ F_r² + (1/|P^l|) Σ F_l² for every grid cell; out-of-band points take a growing penalty."""
    rx, ry = P.xy(Side.RIGHT)
    lx, ly = P.xy(Side.LEFT)
    return _side_mean_sq(rx, ry, d_values, thetas, wavelength, Side.RIGHT) \
        + _side_mean_sq(lx, ly, d_values, thetas, wavelength, Side.LEFT)


def _has_both_sides(P: BoundaryPointSet) -> bool:
    return bool(P.on_side(Side.LEFT)) and bool(P.on_side(Side.RIGHT))


def plain_loss(P: BoundaryPointSet, fp: FresnelParams) -> float:
    if len(P) == 0:
        raise InputError("plain loss needs at least one boundary point")
    xs, ys = P.xy()
    return float(plain_loss_grid(xs, ys, np.array([fp.d]), np.array([fp.theta]), fp.wavelength)[0, 0])


def split_loss(P: BoundaryPointSet, fp: FresnelParams) -> float:
    if not _has_both_sides(P):
        logger.warning("⚠️ Split loss needs left and right points, falling back to plain loss")
        return plain_loss(P, fp)
    return float(split_loss_grid(P, np.array([fp.d]), np.array([fp.theta]), fp.wavelength)[0, 0])


def _axis(lo: float, hi: float, step: float, inclusive: bool) -> np.ndarray:
    span = (hi - lo) / step
    count = int(math.floor(span + 1e-9)) + 1 if inclusive else int(math.ceil(span - 1e-9))
    return lo + step * np.arange(max(count, 1))


def _evaluate(P: BoundaryPointSet, method: FitMethod, d_values: np.ndarray, thetas: np.ndarray,
              wavelength: float) -> Tuple[float, float, float]:
    """Arg-min of the loss over a grid; ties resolve to the smaller d, then the smaller θ."""
    if method == FitMethod.SPLIT:
        losses = split_loss_grid(P, d_values, thetas, wavelength)
    else:
        xs, ys = P.xy()
        losses = plain_loss_grid(xs, ys, d_values, thetas, wavelength)
    losses = np.where(np.isfinite(losses), losses, np.inf)
    flat = int(np.argmin(losses))
    i, j = divmod(flat, len(thetas))
    return float(d_values[i]), float(thetas[j]), float(losses[i, j])


def fit(P: BoundaryPointSet, wavelength: float, grid: GridConfig = GridConfig(),
        method: FitMethod = FitMethod.SPLIT) -> FitResult:
    """Grid-search (d*, θ*) for the boundary points, refining refine_levels times around the incumbent."""
    if len(P) < 2:
        raise InputError(f"fitting needs at least 2 boundary points, got {len(P)}")
    if method == FitMethod.SPLIT and not _has_both_sides(P):
        logger.warning("⚠️ Boundary points lie on one side only, fitting with the plain loss")
        method = FitMethod.PLAIN

    d_step, theta_step = grid.d_step, grid.theta_step
    d_lo, d_hi = grid.d_range
    theta_lo, theta_hi = grid.theta_range
    full_circle = theta_hi - theta_lo >= TWO_PI - 1e-9
    d_values = _axis(d_lo, d_hi, d_step, inclusive=True)
    thetas = _axis(theta_lo, theta_hi, theta_step, inclusive=False)
    if full_circle:
        thetas = np.mod(thetas, TWO_PI)
    best_d, best_theta, best_loss = _evaluate(P, method, d_values, thetas, wavelength)
    if not math.isfinite(best_loss):
        raise FitError("no grid cell produced a finite loss")
    logger.debug(f"coarse grid {len(d_values)}x{len(thetas)}: d={best_d:.4f} θ={math.degrees(best_theta):.3f}° loss={best_loss:.3e}")

    # refined axes stay inside the configured ranges; θ wraps only when the range is the full circle
    offsets = np.arange(-REFINE_HALF_WIDTH * REFINE_FACTOR, REFINE_HALF_WIDTH * REFINE_FACTOR + 1)
    for level in range(grid.refine_levels):
        d_step /= REFINE_FACTOR
        theta_step /= REFINE_FACTOR
        d_values = best_d + d_step * offsets
        d_values = d_values[(d_values >= d_lo) & (d_values <= d_hi)]
        thetas = best_theta + theta_step * offsets
        if full_circle:
            thetas = np.unique(np.mod(thetas, TWO_PI))
        else:
            thetas = thetas[(thetas >= theta_lo) & (thetas <= theta_hi)]
        best_d, best_theta, best_loss = _evaluate(P, method, d_values, thetas, wavelength)
        logger.debug(f"refinement {level + 1}: d={best_d:.5f} θ={math.degrees(best_theta):.4f}° loss={best_loss:.3e}")

    result = FitResult(
        params=FresnelParams(d=best_d, theta=best_theta, wavelength=wavelength),
        loss=best_loss,
        point_count=len(P),
        method=method,
        d_step=d_step,
        theta_step=theta_step,
    )
    logger.info(f"📐 Fitted d={best_d:.3f} m, θ={math.degrees(best_theta):.2f}° from {len(P)} points ({method.value} loss)")
    return result


def localize(anchor: AnchorPose, fr: FitResult) -> Point2:
    """Transmitter position in the world frame: anchor + d*·(cos θ*, sin θ*) rotated by the anchor frame."""
    return to_world_frame(fr.params.transmitter, anchor)
