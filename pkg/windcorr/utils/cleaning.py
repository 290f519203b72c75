"""Thanet-style classification of missing power data and the two fill strategies.

A missing cell is a *failure* when its turbine misses much more data than the
rest of the farm over half a day, or when it reports far less power than the
other turbines; it is a *shutdown* when many turbines are missing at once at
low wind speed. Anything else is left *unassigned*.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from windcorr.conf import ConfigFileError, get_setting, read_ini_section
from windcorr.core import (
    CleaningReport,
    PanelFormatError,
    PathLike,
    SignalPanel,
    as_utc_timestamp,
    format_timestamps,
    parse_duration,
    read_header,
    steps_of,
)

logger = logging.getLogger(__name__)


class MisalignedPanels(ValueError):
    """Power, wind and label panels must share ids, start, step and shape."""


class ThresholdError(ValueError):
    """Invalid threshold values or windows that do not fit the panel step."""


class FillStrategy(str, enum.Enum):
    ZERO = "zero"
    LAST_VALUE = "last_value"


class Label(enum.IntEnum):
    PRESENT = 0
    FAILURE = 1
    SHUTDOWN = 2
    UNASSIGNED = 3

    @property
    def letter(self) -> str:
        return self.name[0]

    @classmethod
    def from_letter(cls, letter: str) -> "Label":
        for label in cls:
            if label.letter == letter:
                return label
        raise ValueError(f"unknown label code {letter!r}")


@dataclasses.dataclass(frozen=True)
class Thresholds:
    dens_min: float = 0.6
    dens_dev_min: float = 0.1
    psi10_max: float = -1000.0
    shutdown_wind_max: float = 4.0
    shutdown_farm_min: int = 20
    dens_window: float = 12 * 3600.0
    psi_window: float = 600.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.dens_min <= 1.0:
            raise ThresholdError(f"dens_min must lie in [0, 1], got {self.dens_min}")
        if not -1.0 <= self.dens_dev_min <= 1.0:
            raise ThresholdError(f"dens_dev_min must lie in [-1, 1], got {self.dens_dev_min}")
        if self.shutdown_wind_max <= 0:
            raise ThresholdError(f"shutdown_wind_max must be positive, got {self.shutdown_wind_max}")
        if self.shutdown_farm_min < 0:
            raise ThresholdError(f"shutdown_farm_min must not be negative, got {self.shutdown_farm_min}")
        for name in ("dens_window", "psi_window"):
            if not getattr(self, name) > 0:
                raise ThresholdError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "Thresholds":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(fields))
        if unknown:
            raise ThresholdError(f"unknown threshold(s): {', '.join(unknown)}")
        kwargs = {}
        for name, raw in values.items():
            try:
                if name.endswith("_window"):
                    kwargs[name] = parse_duration(raw)
                elif name == "shutdown_farm_min":
                    kwargs[name] = int(raw)
                else:
                    kwargs[name] = float(raw)
            except ValueError as exc:
                raise ThresholdError(f"invalid value for {name}: {raw!r}") from exc
        return cls(**kwargs)

    @classmethod
    def default(cls) -> "Thresholds":
        return cls.from_mapping(get_setting("THRESHOLDS"))

    @classmethod
    def from_config(cls, path: PathLike) -> "Thresholds":
        """Settings defaults overridden by the ``[thresholds]`` section of ``path``."""
        fields = [f.name for f in dataclasses.fields(cls)]
        try:
            overrides = read_ini_section(path, "thresholds", known=fields)
        except ConfigFileError as exc:
            raise ThresholdError(str(exc)) from exc
        merged = dict(get_setting("THRESHOLDS"))
        merged.update(overrides)
        return cls.from_mapping(merged)

    def window_steps(self, step: float) -> Tuple[int, int]:
        try:
            return steps_of(self.dens_window, step, "dens_window"), steps_of(self.psi_window, step, "psi_window")
        except ValueError as exc:
            raise ThresholdError(str(exc)) from exc


@dataclasses.dataclass(frozen=True, eq=False)
class NaStatistics:
    na_dens: np.ndarray
    na_dens_dev: np.ndarray
    na_farm: np.ndarray
    psi10: np.ndarray


@dataclasses.dataclass(frozen=True, eq=False)
class NaLabels:
    """N x T label codes aligned with a power panel."""

    turbine_ids: Tuple[str, ...]
    t0: pd.Timestamp
    step: float
    codes: np.ndarray

    def __post_init__(self) -> None:
        codes = np.array(self.codes, dtype=np.int8, copy=True)
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "turbine_ids", tuple(str(i) for i in self.turbine_ids))
        object.__setattr__(self, "t0", as_utc_timestamp(self.t0))
        object.__setattr__(self, "step", float(self.step))

    def cells(self, label: Label) -> np.ndarray:
        return self.codes == int(label)

    def count(self, label: Label) -> int:
        return int(self.cells(label).sum())

    def counts(self) -> Dict[str, int]:
        return {label.name.lower(): self.count(label) for label in Label}

    def letters(self) -> np.ndarray:
        table = np.array([label.letter for label in Label])
        return table[self.codes]


def _check_aligned(panel: SignalPanel, other, what: str) -> None:
    shape = other.codes.shape if isinstance(other, NaLabels) else other.values.shape
    if (
        panel.turbine_ids != other.turbine_ids
        or panel.t0 != other.t0
        or panel.step != other.step
        or panel.values.shape != shape
    ):
        raise MisalignedPanels(
            f"{what} does not align with the power panel "
            f"({len(other.turbine_ids)} ids from {other.t0} every {other.step:g} s vs "
            f"{panel.n_turbines} ids from {panel.t0} every {panel.step:g} s)"
        )


def _centered_mean(frame: pd.DataFrame, steps: int) -> pd.DataFrame:
    # truncated at the panel edges; NaN only where the whole window is NaN
    return frame.rolling(window=steps, center=True, min_periods=1).mean()


def _covered_by_windows(fired: np.ndarray, steps: int) -> np.ndarray:
    """N x T cells lying inside at least one fired centered window.

    Uses the alignment of ``_centered_mean``: the window at t spans
    ``[t - steps // 2, t + (steps - 1) // 2]``, truncated at the panel edges.
    """
    n, t = fired.shape
    offset = (steps - 1) // 2
    cumulative = np.concatenate([np.zeros((n, 1), dtype=np.int64), np.cumsum(fired, axis=1, dtype=np.int64)], axis=1)
    cells = np.arange(t)
    first = np.clip(cells - offset, 0, t)
    last = np.clip(cells + steps - offset, 0, t)
    return cumulative[:, last] - cumulative[:, first] > 0


def na_statistics(power: SignalPanel, wind: SignalPanel, thresholds: Optional[Thresholds] = None) -> NaStatistics:
    """Missing-data density, its deviation from the farm, farm-wide counts and Psi10."""
    thresholds = thresholds or Thresholds.default()
    _check_aligned(power, wind, "wind speed panel")
    dens_steps, psi_steps = thresholds.window_steps(power.step)

    # frames are T x N so that rolling runs along time
    missing = pd.DataFrame((~power.mask).T.astype(np.float64))
    na_dens = _centered_mean(missing, dens_steps)
    spread = na_dens.sub(na_dens.mean(axis=1), axis=0)
    na_dens_dev = _centered_mean(spread, dens_steps)
    na_farm = (~power.mask).sum(axis=0)

    present = power.mask
    values = np.where(present, power.values, 0.0)
    total = values.sum(axis=0)
    count = present.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        others = (total[None, :] - values) / (count[None, :] - 1)
    psi = np.where(present & (count[None, :] > 1), values - others, np.nan)
    psi10 = _centered_mean(pd.DataFrame(psi.T), psi_steps).to_numpy().T

    stats = NaStatistics(na_dens.to_numpy().T, na_dens_dev.to_numpy().T, na_farm, psi10)
    logger.debug(
        "NA statistics over %d x %d cells: windows %d/%d steps, max farm-wide missing %d",
        power.n_turbines,
        power.n_steps,
        dens_steps,
        psi_steps,
        int(na_farm.max(initial=0)),
    )
    return stats


def classify(
    power: SignalPanel,
    wind: SignalPanel,
    stats: Optional[NaStatistics] = None,
    thresholds: Optional[Thresholds] = None,
) -> NaLabels:
    """Label every cell present, failure, shutdown or unassigned.

    A missing cell is a failure when it lies inside any 12 h window whose
    centre passes both density thresholds. Present cells whose Psi10 falls
    below ``psi10_max`` are relabeled failure; failure takes precedence over
    shutdown.
    """
    thresholds = thresholds or Thresholds.default()
    _check_aligned(power, wind, "wind speed panel")
    stats = stats if stats is not None else na_statistics(power, wind, thresholds)

    missing = ~power.mask
    dens_steps, _ = thresholds.window_steps(power.step)
    fired = (stats.na_dens > thresholds.dens_min) & (stats.na_dens_dev > thresholds.dens_dev_min)
    # a dense window marks every gap cell it contains, not only its center
    density = _covered_by_windows(fired, dens_steps)
    with np.errstate(invalid="ignore"):
        low_output = np.nan_to_num(stats.psi10, nan=np.inf) < thresholds.psi10_max
        low_wind = ~wind.mask | (np.where(wind.mask, wind.values, np.inf) < thresholds.shutdown_wind_max)
    failure = (missing & density) | low_output
    farm_wide = (stats.na_farm > thresholds.shutdown_farm_min)[None, :]
    shutdown = missing & low_wind & farm_wide & ~failure

    codes = np.full(power.values.shape, int(Label.PRESENT), dtype=np.int8)
    codes[missing] = int(Label.UNASSIGNED)
    codes[shutdown] = int(Label.SHUTDOWN)
    codes[failure] = int(Label.FAILURE)
    labels = NaLabels(power.turbine_ids, power.t0, power.step, codes)
    logger.info(
        "Classified %d missing cell(s): %s, %d present cell(s) overridden as failure",
        int(missing.sum()),
        labels.counts(),
        int((failure & power.mask).sum()),
    )
    return labels


def fill_shutdowns(
    power: SignalPanel,
    labels: NaLabels,
    strategy=FillStrategy.LAST_VALUE,
    include_unassigned: bool = True,
) -> SignalPanel:
    """Fill shutdown (and by default unassigned) cells; failure cells stay masked.

    ``last_value`` carries each turbine's latest non-failure present value
    forward; gaps with nothing to carry fall back to 0 kW.
    """
    _check_aligned(power, labels, "label panel")
    strategy = FillStrategy(strategy)
    targets = labels.cells(Label.SHUTDOWN)
    if include_unassigned:
        targets = targets | labels.cells(Label.UNASSIGNED)
    source = labels.cells(Label.PRESENT) & power.mask

    values = np.where(source, power.values, np.nan)
    if strategy is FillStrategy.ZERO:
        fill = np.zeros_like(values)
    else:
        carried = pd.DataFrame(values.T).ffill().to_numpy().T
        fill = np.nan_to_num(carried, nan=0.0)
    values = np.where(targets, fill, values)
    filled = power.replace_data(values, source | targets)
    logger.info("Filled %d gap cell(s) with strategy %s", int(targets.sum()), strategy.value)
    return filled


def fill_failures(power: SignalPanel, labels: NaLabels) -> Tuple[SignalPanel, int]:
    """Replace failure cells by the mean of the other non-failure turbines.

    Returns the filled panel and the number of steps where every turbine was
    in failure (those cells become 0 kW).
    """
    _check_aligned(power, labels, "label panel")
    failure = labels.cells(Label.FAILURE)
    usable = power.mask & ~failure
    values = np.where(usable, power.values, 0.0)
    total = values.sum(axis=0)
    count = usable.sum(axis=0)
    # a failure cell is never usable, so "other turbines" is the usable set itself
    with np.errstate(invalid="ignore", divide="ignore"):
        farm_mean = np.where(count > 0, total / np.maximum(count, 1), 0.0)
    all_failed = failure.all(axis=0) if failure.size else np.zeros(power.n_steps, dtype=bool)
    out = np.where(failure, farm_mean[None, :], power.values)
    mask = usable | failure
    filled = power.replace_data(out, mask)
    n_all = int(all_failed.sum())
    if n_all:
        logger.warning("%d step(s) with every turbine in failure filled with 0 kW", n_all)
    starved = int(((count == 0) & failure.any(axis=0) & ~all_failed).sum())
    if starved:
        logger.warning("%d step(s) without a usable turbine to average; failures filled with 0 kW", starved)
    logger.info("Filled %d failure cell(s)", int(failure.sum()))
    return filled, n_all


def build_report(power: SignalPanel, labels: NaLabels) -> CleaningReport:
    """Per-cause accounting of the labels against the power panel's mask."""
    _check_aligned(power, labels, "label panel")
    missing = ~power.mask
    failure = labels.cells(Label.FAILURE)
    shutdown = labels.cells(Label.SHUTDOWN)
    unassigned = labels.cells(Label.UNASSIGNED)
    per_turbine = {
        tid: {
            "missing": int(missing[i].sum()),
            "failure": int((missing[i] & failure[i]).sum()),
            "shutdown": int(shutdown[i].sum()),
            "unassigned": int(unassigned[i].sum()),
            "failure_overrides": int((power.mask[i] & failure[i]).sum()),
        }
        for i, tid in enumerate(power.turbine_ids)
    }
    return CleaningReport(
        total_points=int(missing.size),
        missing_raw=int(missing.sum()),
        classified_failure=int((missing & failure).sum()),
        classified_shutdown=int(shutdown.sum()),
        unassigned=int(unassigned.sum()),
        failure_overrides=int((power.mask & failure).sum()),
        all_failure_steps=int(failure.all(axis=0).sum()) if failure.size else 0,
        per_turbine=per_turbine,
    )


def clean_power(
    power: SignalPanel,
    wind: SignalPanel,
    thresholds: Optional[Thresholds] = None,
    strategy=FillStrategy.LAST_VALUE,
) -> Tuple[SignalPanel, NaLabels, CleaningReport]:
    """classify, fill shutdowns, fill failures and report in one call."""
    labels = classify(power, wind, thresholds=thresholds)
    report = build_report(power, labels)
    filled, _ = fill_failures(fill_shutdowns(power, labels, strategy), labels)
    return filled, labels, report


def write_labels(labels: NaLabels, path: PathLike) -> None:
    """Wide CSV like a panel, with the codes P, F, S and U."""
    frame = pd.DataFrame(labels.letters().T, columns=list(labels.turbine_ids))
    times = pd.date_range(labels.t0, periods=labels.codes.shape[1], freq=pd.Timedelta(seconds=labels.step))
    frame.insert(0, "timestamp", format_timestamps(times))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def read_labels(path: PathLike) -> NaLabels:
    header = read_header(path)
    if header[0] != "timestamp" or len(header) < 2:
        raise PanelFormatError(f"{path}:1: expected 'timestamp' followed by turbine ids")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    frame.columns = header
    stamps = pd.to_datetime(frame["timestamp"], utc=True, format="ISO8601")
    step = float((stamps.iloc[1] - stamps.iloc[0]).total_seconds()) if len(stamps) > 1 else float(get_setting("STEP"))
    lookup = {label.letter: int(label) for label in Label}
    letters = frame[header[1:]].to_numpy(dtype=str)
    unknown = sorted(set(np.unique(letters)) - set(lookup))
    if unknown:
        raise PanelFormatError(f"{path}: unknown label code(s) {unknown}")
    codes = np.vectorize(lookup.__getitem__, otypes=[np.int8])(letters).T
    return NaLabels(tuple(header[1:]), stamps.iloc[0], step, codes)
