"""Centering, covariance, correlation, spectra and reduced-rank correlation matrices.

With ``M`` the row-centered ``N x T`` panel::

    covariance   S = M M^T / T
    correlation  C = s^-1 S s^-1,   s = diag(sqrt(S_ii))

Reduced-rank matrices come from ``M = U S V^T`` with selected singular values
zeroed before the covariance is recomputed.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from windcorr.conf import get_setting
from windcorr.core import (
    CorrelationMatrix,
    CovarianceMatrix,
    EigenDecomposition,
    MatrixSource,
    Observable,
    SignalPanel,
    SvdFactors,
    as_utc_timestamp,
    parse_duration,
    steps_of,
)

logger = logging.getLogger(__name__)


class IncompletePanel(ValueError):
    """Correlation kernels need a panel without masked cells."""


class ZeroVarianceTurbine(ValueError):
    def __init__(self, turbines: Sequence[str], window_start=None) -> None:
        self.turbines = tuple(turbines)
        self.window_start = window_start
        where = f" in window starting {window_start}" if window_start is not None else ""
        super().__init__(f"zero variance for turbine(s) {', '.join(self.turbines)}{where}")


class NonSymmetricMatrix(ValueError):
    pass


class WindowError(ValueError):
    """Window length or stride does not fit the panel."""


@dataclasses.dataclass(frozen=True, eq=False)
class CenteredPanel:
    """Row-centered data matrix ``M`` with the row means that were removed."""

    turbine_ids: Tuple[str, ...]
    values: np.ndarray
    means: np.ndarray
    window_start: pd.Timestamp
    step: float
    source: MatrixSource = MatrixSource.RAW

    def __post_init__(self) -> None:
        for name in ("values", "means"):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "turbine_ids", tuple(str(i) for i in self.turbine_ids))
        object.__setattr__(self, "window_start", as_utc_timestamp(self.window_start))
        object.__setattr__(self, "source", MatrixSource(self.source))

    @property
    def n_turbines(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def window_len(self) -> float:
        return self.n_steps * self.step

    def replace_values(self, values: np.ndarray, source: Optional[MatrixSource] = None) -> "CenteredPanel":
        return CenteredPanel(
            self.turbine_ids,
            values,
            self.means,
            self.window_start,
            self.step,
            self.source if source is None else source,
        )


def _source_of(panel: SignalPanel) -> MatrixSource:
    return MatrixSource.DEVIATION if panel.observable is Observable.DEVIATION else MatrixSource.RAW


def _require_complete(panel: SignalPanel) -> None:
    if not panel.is_complete:
        holes = int((~panel.mask).sum())
        raise IncompletePanel(f"{panel!r} still has {holes} masked cell(s); clean and fill it first")


def _center_rows(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    means = values.mean(axis=1)
    centered = values - means[:, None]
    # constant rows must come out as exact zeros
    centered[np.ptp(values, axis=1) == 0.0] = 0.0
    return centered, means


def center(panel: SignalPanel) -> CenteredPanel:
    """Subtract each turbine's time mean."""
    _require_complete(panel)
    centered, means = _center_rows(panel.values)
    return CenteredPanel(panel.turbine_ids, centered, means, panel.t0, panel.step, _source_of(panel))


def covariance(m: CenteredPanel) -> CovarianceMatrix:
    """Population covariance ``M M^T / T``."""
    sigma = m.values @ m.values.T / m.n_steps
    sigma = (sigma + sigma.T) / 2.0
    stddevs = np.sqrt(np.clip(np.diag(sigma), 0.0, None))
    return CovarianceMatrix(m.turbine_ids, sigma, stddevs, m.window_start, m.window_len, m.source, m.n_steps)


def zero_variance_turbines(cov: CovarianceMatrix) -> List[str]:
    sigma = cov.stddevs
    if sigma.size == 0:
        return []
    largest = float(sigma.max())
    if largest == 0.0:
        return list(cov.ids)
    limit = get_setting("ZERO_VARIANCE_RTOL") * largest
    return [tid for tid, s in zip(cov.ids, sigma) if s <= limit]


def correlation(cov: CovarianceMatrix) -> CorrelationMatrix:
    """Normalize a covariance matrix; raises :class:`ZeroVarianceTurbine`."""
    zero = zero_variance_turbines(cov)
    if zero:
        raise ZeroVarianceTurbine(zero, cov.window_start)
    sigma = cov.stddevs
    c = cov.entries / np.outer(sigma, sigma)
    c = (c + c.T) / 2.0
    np.fill_diagonal(c, 1.0)
    np.clip(c, -1.0, 1.0, out=c)
    rank = int(np.linalg.matrix_rank(c, hermitian=True))
    return CorrelationMatrix(cov.ids, c, cov.window_start, cov.window_len, cov.source, rank, cov.n_samples)


def _entries(matrix: Union[CorrelationMatrix, np.ndarray]) -> np.ndarray:
    return matrix.entries if isinstance(matrix, CorrelationMatrix) else np.asarray(matrix, dtype=np.float64)


def _orient_columns(vectors: np.ndarray) -> np.ndarray:
    """+1/-1 per column so that its largest-magnitude component is positive."""
    if vectors.size == 0:
        return np.ones(vectors.shape[1] if vectors.ndim == 2 else 0)
    lead = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return np.where(lead < 0, -1.0, 1.0)


def eigen(matrix: Union[CorrelationMatrix, np.ndarray], tol: float = 1e-10) -> EigenDecomposition:
    """Eigenvalues in descending order with deterministically oriented eigenvectors."""
    c = _entries(matrix)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise NonSymmetricMatrix(f"expected a square matrix, got shape {c.shape}")
    asymmetry = float(np.max(np.abs(c - c.T), initial=0.0))
    if asymmetry > tol * max(1.0, float(np.max(np.abs(c), initial=0.0))):
        raise NonSymmetricMatrix(f"matrix is not symmetric (max |C - C^T| = {asymmetry:.3e})")
    values, vectors = linalg.eigh((c + c.T) / 2.0)
    values, vectors = values[::-1], vectors[:, ::-1]
    vectors = vectors * _orient_columns(vectors)
    return EigenDecomposition(values, vectors)


def svd(m: CenteredPanel) -> SvdFactors:
    """Thin SVD of the centered panel with the eigenvector sign convention on ``U``."""
    u, s, vt = linalg.svd(m.values, full_matrices=False)
    signs = _orient_columns(u)
    return SvdFactors(u * signs, s, vt.T * signs)


def null_singular_values(s: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    if s.size == 0 or s[0] == 0.0:
        return np.ones_like(s, dtype=bool)
    return s <= s[0] * max(shape) * np.finfo(np.float64).eps


def reduce(m: CenteredPanel, factors: Optional[SvdFactors] = None, drop: Iterable[int] = (1,)) -> CenteredPanel:
    """Rebuild ``M`` with the singular values numbered in ``drop`` (1-based) set to 0."""
    drop = sorted(set(int(k) for k in drop))
    k_max = min(m.values.shape)
    outside = [k for k in drop if not 1 <= k <= k_max]
    if outside:
        raise ValueError(f"singular value index(es) {outside} outside 1..{k_max}")
    if not drop:
        return m
    factors = factors if factors is not None else svd(m)
    s = factors.singular_values.copy()
    s[null_singular_values(s, m.values.shape)] = 0.0
    s[np.asarray(drop) - 1] = 0.0
    rebuilt = (factors.u * s) @ factors.v.T
    rebuilt = rebuilt - rebuilt.mean(axis=1, keepdims=True)
    return m.replace_values(rebuilt, MatrixSource.REDUCED)


def raw_correlation(panel: SignalPanel) -> CorrelationMatrix:
    return correlation(covariance(center(panel)))


def reduced_correlation(panel: SignalPanel, drop: Iterable[int] = (1,)) -> CorrelationMatrix:
    """Correlation of the panel after zeroing the singular values in ``drop``."""
    reduced = reduce(center(panel), drop=drop)
    cov = covariance(reduced)
    if reduced.source is not MatrixSource.REDUCED:
        cov = dataclasses.replace(cov, source=MatrixSource.REDUCED)
    return correlation(cov)


def deviation_series(panel: SignalPanel) -> SignalPanel:
    """Each turbine's series minus the farm mean at the same instant."""
    _require_complete(panel)
    deviation = panel.values - panel.values.mean(axis=0, keepdims=True)
    return panel.replace_data(deviation, np.ones_like(panel.mask), observable=Observable.DEVIATION)


def deviation_correlation(panel: SignalPanel) -> CorrelationMatrix:
    return raw_correlation(deviation_series(panel))


@dataclasses.dataclass(frozen=True)
class CorrelationMode:
    """``raw``, ``deviation``, ``reduced`` (drop the first singular value) or ``reduced:1,2``."""

    source: MatrixSource
    drop: Tuple[int, ...] = ()

    @classmethod
    def parse(cls, text: Union[str, "CorrelationMode"]) -> "CorrelationMode":
        if isinstance(text, CorrelationMode):
            return text
        name, _, rest = str(text).strip().lower().partition(":")
        try:
            source = MatrixSource(name)
        except ValueError:
            raise ValueError(f"unknown correlation mode {text!r}; expected raw, deviation, reduced or reduced:<k,...>") from None
        if source is not MatrixSource.REDUCED:
            if rest:
                raise ValueError(f"mode {name!r} takes no singular value list")
            return cls(source)
        if not rest:
            return cls(source, (1,))
        try:
            drop = tuple(sorted({int(k) for k in rest.split(",") if k.strip()}))
        except ValueError:
            raise ValueError(f"invalid singular value list in mode {text!r}") from None
        if not drop or min(drop) < 1:
            raise ValueError(f"singular value indexes in {text!r} must be positive")
        return cls(source, drop)

    def __str__(self) -> str:
        if self.source is MatrixSource.REDUCED and self.drop != (1,):
            return f"reduced:{','.join(str(k) for k in self.drop)}"
        return self.source.value

    def matrix(self, panel: SignalPanel) -> CorrelationMatrix:
        if self.source is MatrixSource.RAW:
            return raw_correlation(panel)
        if self.source is MatrixSource.DEVIATION:
            return deviation_correlation(panel)
        return reduced_correlation(panel, self.drop)


@dataclasses.dataclass(frozen=True)
class WindowSpec:
    """Window length and stride in seconds."""

    length: float
    stride: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "length", parse_duration(self.length))
        object.__setattr__(self, "stride", parse_duration(self.stride))

    def steps(self, step: float) -> Tuple[int, int]:
        try:
            length = steps_of(self.length, step, "window length")
            stride = steps_of(self.stride, step, "window stride")
        except ValueError as exc:
            raise WindowError(str(exc)) from exc
        if length < 2:
            raise WindowError(f"window of {self.length:g} s spans fewer than 2 steps of {step:g} s")
        return length, stride

    def starts(self, n_steps: int, step: float) -> range:
        length, stride = self.steps(step)
        if length > n_steps:
            raise WindowError(f"window of {length} steps is longer than the panel ({n_steps} steps)")
        return range(0, n_steps - length + 1, stride)


@dataclasses.dataclass(frozen=True)
class WindowFailure:
    """Placeholder for a window whose correlation matrix is undefined."""

    index: int
    window_start: pd.Timestamp
    window_len: float
    turbines: Tuple[str, ...]
    reason: str


WindowResult = Union[CorrelationMatrix, WindowFailure]


def sliding_correlations(
    panel: SignalPanel,
    spec: WindowSpec,
    mode: Union[str, CorrelationMode] = "raw",
    jobs: int = 1,
) -> List[WindowResult]:
    """One correlation matrix per window, ordered by window start."""
    _require_complete(panel)
    mode = CorrelationMode.parse(mode)
    length, _ = spec.steps(panel.step)
    starts = spec.starts(panel.n_steps, panel.step)

    def compute(item: Tuple[int, int]) -> WindowResult:
        index, start = item
        window = panel.window(start, length)
        try:
            return mode.matrix(window)
        except ZeroVarianceTurbine as exc:
            return WindowFailure(index, window.t0, window.duration, exc.turbines, str(exc))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(compute, enumerate(starts)))
    failures = [r for r in results if isinstance(r, WindowFailure)]
    for failure in failures:
        logger.warning("Window %d: %s", failure.index, failure.reason)
    logger.info(
        "Computed %d %s window(s) of %d steps (%d failed) from %r",
        len(results),
        mode,
        length,
        len(failures),
        panel,
    )
    return results


def mean_off_diagonal(matrix: Union[CorrelationMatrix, np.ndarray]) -> float:
    c = _entries(matrix)
    n = c.shape[0]
    if n < 2:
        raise ValueError("a 1 x 1 matrix has no off-diagonal entries")
    return float((c.sum() - np.trace(c)) / (n * (n - 1)))


def window_length_profile(
    panel: SignalPanel,
    lengths: Sequence[Union[str, float]],
    mode: Union[str, CorrelationMode] = "raw",
    jobs: int = 1,
) -> Dict[float, float]:
    """Mean off-diagonal correlation for disjoint windows of each length.

    Windows whose matrix is undefined are skipped; a length with no usable
    window maps to NaN.
    """
    profile: Dict[float, float] = {}
    for length in lengths:
        seconds = parse_duration(length)
        results = sliding_correlations(panel, WindowSpec(seconds, seconds), mode, jobs)
        values = [mean_off_diagonal(r) for r in results if isinstance(r, CorrelationMatrix)]
        profile[seconds] = float(np.mean(values)) if values else float("nan")
    return profile


def spectrum_summary(decomposition: EigenDecomposition, zero_tol: float = 1e-10, top: int = 5) -> Dict[str, object]:
    """Counts of zero, small, medium and large eigenvalues and the leading ones."""
    values = decomposition.eigenvalues
    zero = np.abs(values) < zero_tol
    return {
        "n": int(values.size),
        "zero": int(zero.sum()),
        "below_one": int(((values < 1.0) & ~zero).sum()),
        "one_to_three": int(((values >= 1.0) & (values <= 3.0)).sum()),
        "above_three": int((values > 3.0).sum()),
        "largest": [float(v) for v in values[:top]],
        "trace": decomposition.trace,
    }
