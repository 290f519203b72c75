"""Circular statistics, 45 degree direction bins and per-bin matrix averages.

Bearings are compass degrees in ``[0, 360)``, measured clockwise from north,
and name the direction the wind comes *from*.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from windcorr.conf import get_setting
from windcorr.core import CorrelationMatrix, FarmLayout, SignalPanel

logger = logging.getLogger(__name__)

COMPASS_LABELS: Tuple[str, ...] = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")


class DirectionError(ValueError):
    """No meaningful direction can be assigned."""


class DegenerateMean(DirectionError):
    """The resultant vector is (numerically) zero."""


class NoDirectionData(DirectionError):
    """Every cell of the requested window is missing."""


class MixedTurbineSets(ValueError):
    """Matrices handed to :func:`bin_average` disagree on ids or source mode."""


@dataclasses.dataclass(frozen=True)
class CircularMean:
    direction: float
    resultant_length: float


def _wrap(degrees: float) -> float:
    wrapped = math.fmod(degrees, 360.0)
    if wrapped < 0:
        wrapped += 360.0
    # fmod of a tiny negative number lands just below 360
    if wrapped >= 360.0 or 360.0 - wrapped < 1e-10:
        wrapped = 0.0
    return wrapped


def angular_difference(a: float, b: float) -> float:
    """Signed shortest rotation from ``b`` to ``a`` in degrees, in ``[-180, 180)``."""
    return (a - b + 180.0) % 360.0 - 180.0


def circular_mean(angles: Sequence[float], weights: Optional[Sequence[float]] = None) -> CircularMean:
    """Direction of the (weighted) mean unit vector, with its resultant length."""
    radians = np.deg2rad(np.asarray(angles, dtype=np.float64).ravel())
    if radians.size == 0:
        raise NoDirectionData("circular mean of an empty set of angles")
    if weights is None:
        w = np.ones_like(radians)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape != radians.shape:
            raise ValueError(f"{w.size} weights for {radians.size} angles")
        if np.any(w < 0) or not w.sum() > 0:
            raise ValueError("weights must be non-negative with a positive sum")
    total = w.sum()
    mean_sin = float(np.dot(w, np.sin(radians)) / total)
    mean_cos = float(np.dot(w, np.cos(radians)) / total)
    resultant = math.hypot(mean_sin, mean_cos)
    if resultant < get_setting("DEGENERATE_RESULTANT"):
        raise DegenerateMean(f"resultant length {resultant:.3e} is too small for a direction")
    return CircularMean(_wrap(math.degrees(math.atan2(mean_sin, mean_cos))), resultant)


def circular_mean_along(values: np.ndarray, mask: np.ndarray, axis: int = -1) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized circular mean over ``axis`` of the present cells.

    Returns ``(direction, resultant_length)``; both are NaN where no cell is
    present, and the direction is NaN where the resultant is degenerate.
    """
    radians = np.deg2rad(np.where(mask, values, 0.0))
    count = mask.sum(axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_sin = np.where(mask, np.sin(radians), 0.0).sum(axis=axis) / count
        mean_cos = np.where(mask, np.cos(radians), 0.0).sum(axis=axis) / count
    resultant = np.hypot(mean_sin, mean_cos)
    direction = np.mod(np.degrees(np.arctan2(mean_sin, mean_cos)), 360.0)
    direction = np.where(360.0 - direction < 1e-10, 0.0, direction)
    degenerate = ~(resultant >= get_setting("DEGENERATE_RESULTANT"))
    direction = np.where(degenerate, np.nan, direction)
    return direction, resultant


def window_direction(panel: SignalPanel, start: int = 0, length: Optional[int] = None) -> float:
    """Circular mean over all turbines and all present cells of a window."""
    length = panel.n_steps - start if length is None else length
    if start < 0 or length < 1 or start + length > panel.n_steps:
        raise IndexError(f"window [{start}, {start + length}) outside panel of {panel.n_steps} steps")
    mask = panel.mask[:, start:start + length]
    if not mask.any():
        raise NoDirectionData(f"no direction data in window starting at step {start}")
    values = panel.values[:, start:start + length][mask]
    return circular_mean(values).direction


@dataclasses.dataclass(frozen=True)
class DirectionBins:
    """Eight 45 degree bins; bin ``k`` covers ``[c + 45k - 22.5, c + 45k + 22.5)``."""

    center0: float = 0.0
    width: float = 45.0
    count: int = 8
    labels: Tuple[str, ...] = COMPASS_LABELS

    def __post_init__(self) -> None:
        if self.count * self.width != 360.0:
            raise ValueError("bins must partition the full circle")
        if len(self.labels) != self.count:
            raise ValueError(f"{len(self.labels)} labels for {self.count} bins")
        object.__setattr__(self, "center0", float(self.center0) % 360.0)

    @classmethod
    def from_layout(cls, layout: FarmLayout, center0: Optional[float] = None) -> "DirectionBins":
        return cls(layout.row_orthogonal_bearing if center0 is None else center0)

    def center(self, index: int) -> float:
        return (self.center0 + index * self.width) % 360.0

    def edges(self, index: int) -> Tuple[float, float]:
        low = (self.center(index) - self.width / 2.0) % 360.0
        return low, (low + self.width) % 360.0


def bin_of(angle: float, bins: DirectionBins) -> int:
    """Index of the half-open bin holding ``angle`` (lower edge inclusive)."""
    shifted = (float(angle) - bins.center0 + bins.width / 2.0) % 360.0
    return int(shifted // bins.width) % bins.count


@dataclasses.dataclass(frozen=True)
class DirectedMatrix:
    """A window's correlation matrix with its mean direction and wind speed.

    ``direction`` is ``None`` when the window had no meaningful direction.
    """

    matrix: CorrelationMatrix
    direction: Optional[float]
    wind_speed: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class BinAverage:
    index: int
    label: str
    matrix: Optional[CorrelationMatrix]
    window_count: int
    mean_wind_speed: Optional[float]
    mean_direction: Optional[float]

    @property
    def is_empty(self) -> bool:
        return self.window_count == 0


@dataclasses.dataclass(frozen=True)
class BinnedMatrices:
    bins: DirectionBins
    averages: Tuple[BinAverage, ...]
    excluded: int = 0

    @property
    def assigned(self) -> int:
        return sum(a.window_count for a in self.averages)

    def by_label(self, label: str) -> BinAverage:
        for average in self.averages:
            if average.label == label:
                return average
        raise KeyError(label)


def _window_bounds(panel: SignalPanel, matrix: CorrelationMatrix) -> Tuple[int, int]:
    offset = (matrix.window_start - panel.t0).total_seconds() / panel.step
    length = matrix.window_len / panel.step
    start, count = int(round(offset)), int(round(length))
    if abs(offset - start) > 1e-6 or abs(length - count) > 1e-6 or count < 1:
        raise DirectionError(
            f"window starting {matrix.window_start} ({matrix.window_len:g} s) is off the "
            f"{panel.step:g} s grid of the direction panel"
        )
    return start, count


def directed_matrices(
    matrices: Sequence[CorrelationMatrix],
    wind_direction: SignalPanel,
    wind_speed: Optional[SignalPanel] = None,
) -> List[DirectedMatrix]:
    """Attach each window's mean direction (and mean wind speed) to its matrix.

    Windows without data or with a degenerate mean get ``direction=None``.
    """
    directed = []
    for matrix in matrices:
        start, length = _window_bounds(wind_direction, matrix)
        try:
            direction: Optional[float] = window_direction(wind_direction, start, length)
        except DirectionError as exc:
            logger.debug("No direction for window %s: %s", matrix.window_start, exc)
            direction = None
        speed = None
        if wind_speed is not None:
            start, length = _window_bounds(wind_speed, matrix)
            cells = wind_speed.mask[:, start:start + length]
            if cells.any():
                speed = float(wind_speed.values[:, start:start + length][cells].mean())
        directed.append(DirectedMatrix(matrix, direction, speed))
    return directed


def _average_bin(index: int, bins: DirectionBins, members: List[DirectedMatrix]) -> BinAverage:
    label = bins.labels[index]
    if not members:
        return BinAverage(index, label, None, 0, None, None)
    stack = np.stack([m.matrix.entries for m in members])
    first = members[0].matrix
    matrix = CorrelationMatrix(
        first.ids,
        stack.mean(axis=0) if len(members) > 1 else stack[0],
        first.window_start,
        first.window_len,
        first.source,
        None,
        first.n_samples,
    )
    speeds = [m.wind_speed for m in members if m.wind_speed is not None and np.isfinite(m.wind_speed)]
    return BinAverage(
        index,
        label,
        matrix,
        len(members),
        float(np.mean(speeds)) if speeds else None,
        circular_mean([m.direction for m in members]).direction,
    )


def bin_average(items: Sequence[DirectedMatrix], bins: DirectionBins, jobs: int = 1) -> BinnedMatrices:
    """Elementwise mean correlation matrix per direction bin."""
    if items:
        ids = items[0].matrix.ids
        source = items[0].matrix.source
        for item in items[1:]:
            if item.matrix.ids != ids:
                raise MixedTurbineSets("matrices do not share the same turbine ids")
            if item.matrix.source != source:
                raise MixedTurbineSets(
                    f"matrices mix source modes {source.value!r} and {item.matrix.source.value!r}"
                )

    members: Dict[int, List[DirectedMatrix]] = {k: [] for k in range(bins.count)}
    excluded = 0
    for item in items:
        if item.direction is None or not np.isfinite(item.direction):
            excluded += 1
            continue
        members[bin_of(item.direction, bins)].append(item)
    if excluded:
        logger.warning("%d window(s) without a meaningful direction excluded from binning", excluded)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        averages = tuple(pool.map(lambda k: _average_bin(k, bins, members[k]), range(bins.count)))
    logger.info(
        "Binned %d window(s): %s",
        len(items) - excluded,
        ", ".join(f"{a.label}={a.window_count}" for a in averages),
    )
    return BinnedMatrices(bins, averages, excluded)


def bin_summary(binned: BinnedMatrices) -> List[Dict[str, object]]:
    """Rows of the per-bin summary table."""
    rows = []
    for average in binned.averages:
        rows.append(
            {
                "bin": average.label,
                "center_deg": binned.bins.center(average.index),
                "window_count": average.window_count,
                "mean_wind_speed": average.mean_wind_speed,
                "mean_direction": average.mean_direction,
            }
        )
    return rows


def front_line(layout: FarmLayout, bearing: float, wake_decay: Optional[float] = None) -> FrozenSet[str]:
    """Turbines outside every upstream wake cone, i.e. the ones that see the ambient wind."""
    if wake_decay is None:
        wake_decay = float(get_setting("WAKE_DECAY"))
    _, inside = layout.wake_cones([bearing], wake_decay)
    waked = inside[0].any(axis=0)
    return frozenset(tid for tid, hit in zip(layout.turbine_ids, waked) if not hit)


def mean_block_correlation(matrix: CorrelationMatrix, group_a: Sequence[str], group_b: Sequence[str]) -> float:
    """Mean correlation between two groups of turbines, skipping the diagonal."""
    index = {tid: i for i, tid in enumerate(matrix.ids)}
    rows = [index[t] for t in group_a]
    cols = [index[t] for t in group_b]
    block = matrix.entries[np.ix_(rows, cols)]
    keep = np.ones(block.shape, dtype=bool)
    for r, row in enumerate(rows):
        for c, col in enumerate(cols):
            if row == col:
                keep[r, c] = False
    if not keep.any():
        raise ValueError("groups share no off-diagonal pairs")
    return float(block[keep].mean())

