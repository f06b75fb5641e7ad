"""Planar trilateration from anchor ranges.

The range equations ``|p - a_i|^2 = d_i^2`` are linearised by subtracting
the first one from the rest::

    2 (a_i - a_0) . p = d_0^2 - d_i^2 + |a_i|^2 - |a_0|^2

and the resulting system is solved by least squares (directly when there
are exactly three anchors).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DegenerateGeometryError(ValueError):
    """Anchors are collinear (or coincident) so the fix is not unique."""


@dataclass(frozen=True)
class AnchorSet:
    positions: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.positions, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"anchors must be an (m, 2) array, got shape {pts.shape}")
        if pts.shape[0] < 3:
            raise DegenerateGeometryError(f"need at least 3 anchors, got {pts.shape[0]}")
        if np.linalg.matrix_rank(_design(pts)) < 2:
            raise DegenerateGeometryError("anchors are collinear")
        object.__setattr__(self, "positions", pts)

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class PositionFix:
    p: np.ndarray
    residual: float


def _design(pts: np.ndarray) -> np.ndarray:
    return 2.0 * (pts[1:] - pts[0])


def range_residual_rms(p, anchors: AnchorSet, distances) -> float:
    ranges = np.linalg.norm(anchors.positions - np.asarray(p, dtype=float), axis=1)
    return float(np.sqrt(np.mean((ranges - np.asarray(distances, dtype=float)) ** 2)))


def trilaterate(anchors: AnchorSet, distances: Sequence[float], refine: bool = False) -> PositionFix:
    """Estimate a 2-D position from distances to each anchor.

    Args:
        anchors: anchor positions in metres.
        distances: one positive range per anchor, same order.
        refine: run a few Gauss-Newton iterations on the true range
            residuals after the linear solve.
    """
    if not isinstance(anchors, AnchorSet):
        anchors = AnchorSet(anchors)
    d = np.asarray(distances, dtype=float)
    pts = anchors.positions
    if d.shape != (len(anchors),):
        raise ValueError(f"expected {len(anchors)} distances, got {d.shape}")
    if np.any(~(d > 0)):
        raise ValueError("distances must be positive")

    M = _design(pts)
    sq = np.sum(pts**2, axis=1)
    b = d[0] ** 2 - d[1:] ** 2 + sq[1:] - sq[0]
    if M.shape[0] == 2:
        p = np.linalg.solve(M, b)
    else:
        p, *_ = np.linalg.lstsq(M, b, rcond=None)

    if refine:
        p = _gauss_newton(p, pts, d)
    return PositionFix(p, range_residual_rms(p, anchors, d))


def _gauss_newton(p: np.ndarray, pts: np.ndarray, d: np.ndarray, iters: int = 10) -> np.ndarray:
    for _ in range(iters):
        diff = p - pts
        ranges = np.linalg.norm(diff, axis=1)
        if np.any(ranges < 1e-12):
            break
        J = diff / ranges[:, None]
        step, *_ = np.linalg.lstsq(J, d - ranges, rcond=None)
        p = p + step
        if np.linalg.norm(step) < 1e-12:
            break
    return p
