"""Raw SCADA exports to panels: parsing, resampling and Riffgat-style filters.

Raw exports are long CSV files, one measurement per line::

    timestamp,turbine,observable,value[,stddev]
    2014-03-01T00:00:00Z,1,active_power,1523.41235,12.3

``value`` and ``stddev`` may be ``NA``. Timestamps are ISO-8601 UTC.
"""
from __future__ import annotations

import dataclasses
import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from windcorr.conf import get_setting
from windcorr.core import (
    NA_TOKEN,
    CleaningReport,
    Observable,
    PathLike,
    SignalPanel,
    require_valid,
    steps_of,
)
from windcorr.utils.direction import circular_mean_along

logger = logging.getLogger(__name__)

RAW_COLUMNS = ("timestamp", "turbine", "observable", "value")
CHANNELS = ("value", "stddev")

RULE_CONSECUTIVE_EQUAL = "consecutive_equal"
RULE_ZERO_STDDEV = "zero_stddev"
RULE_OVER_SPEED = "over_speed"


class ScadaParseError(ValueError):
    """Raised when a raw export breaks the schema; carries the file location."""

    def __init__(self, path: PathLike, line: int, column: Optional[str], message: str) -> None:
        self.path = str(path)
        self.line = line
        self.column = column
        where = f"{path}:{line}" + (f" [{column}]" if column else "")
        super().__init__(f"{where}: {message}")


class ResampleError(ValueError):
    """Raised when the target step is not an integer multiple of the panel step."""


@dataclasses.dataclass(frozen=True)
class RawRecordStream:
    """Validated rows of a raw export; ``line`` is the 1-based file line."""

    frame: pd.DataFrame
    path: str

    @property
    def observables(self) -> Tuple[Observable, ...]:
        return tuple(sorted(set(self.frame["observable"]), key=lambda o: o.value))

    def __len__(self) -> int:
        return len(self.frame)


def read_raw_records(path: PathLike) -> RawRecordStream:
    """Load and validate a raw export; the first offending line rejects the file."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.ParserError as exc:
        raise ScadaParseError(path, 0, None, str(exc)) from exc
    missing = [c for c in RAW_COLUMNS if c not in frame.columns]
    if missing:
        raise ScadaParseError(path, 1, None, f"missing column(s) {', '.join(missing)}")
    if "stddev" not in frame.columns:
        frame["stddev"] = NA_TOKEN
    frame["line"] = np.arange(2, len(frame) + 2)

    stamps = pd.to_datetime(frame["timestamp"], utc=True, format="ISO8601", errors="coerce")
    bad = np.flatnonzero(stamps.isna().to_numpy())
    if bad.size:
        row = int(bad[0])
        raise ScadaParseError(path, row + 2, "timestamp", f"malformed timestamp {frame['timestamp'].iloc[row]!r}")
    frame["timestamp"] = stamps

    tags: Dict[str, Observable] = {}
    for tag in frame["observable"].unique():
        try:
            tags[tag] = Observable.parse(tag)
        except ValueError:
            row = int(np.flatnonzero((frame["observable"] == tag).to_numpy())[0])
            raise ScadaParseError(path, row + 2, "observable", f"unknown observable tag {tag!r}") from None
    frame["observable"] = frame["observable"].map(tags)
    frame["turbine"] = frame["turbine"].str.strip()

    for column in CHANNELS:
        text = frame[column].str.strip()
        na = text == NA_TOKEN
        cells = np.where(na.to_numpy(), "nan", text.to_numpy())
        try:
            parsed = cells.astype(np.float64)
        except ValueError:
            for idx, cell in enumerate(cells):
                try:
                    float(cell)
                except ValueError:
                    raise ScadaParseError(path, idx + 2, column, f"not a number: {cell!r}") from None
            raise
        frame[column] = parsed

    duplicated = frame.duplicated(subset=["timestamp", "turbine", "observable"], keep="first")
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0])
        first = frame.loc[
            (frame["timestamp"] == frame["timestamp"].iat[row])
            & (frame["turbine"] == frame["turbine"].iat[row])
            & (frame["observable"] == frame["observable"].iat[row]),
            "line",
        ].iat[0]
        raise ScadaParseError(
            path,
            row + 2,
            None,
            f"duplicate record for turbine {frame['turbine'].iat[row]!r} at "
            f"{frame['timestamp'].iat[row].isoformat()} (first seen on line {first})",
        )
    logger.info("Read %d raw record(s) from %s", len(frame), path)
    return RawRecordStream(frame, str(path))


def _infer_step(stamps: np.ndarray) -> float:
    unique = np.unique(stamps)
    if unique.size < 2:
        return float(get_setting("STEP"))
    diffs = np.diff(unique).astype("timedelta64[ms]").astype(np.int64)
    step_ms = int(np.gcd.reduce(diffs))
    return step_ms / 1000.0


def parse_scada(
    path: Union[PathLike, RawRecordStream],
    observable: Union[str, Observable],
    channel: str = "value",
    step: Optional[float] = None,
    event_driven: bool = False,
) -> SignalPanel:
    """Build the panel of one observable from a raw export.

    Turbines are ordered by first appearance in the file. The time grid runs
    from the earliest to the latest timestamp of the observable at ``step``
    (inferred as the greatest common spacing when omitted). Absent
    ``(turbine, time)`` cells are masked, unless ``event_driven`` is set, in
    which case each turbine's last observation is carried forward.
    """
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    stream = path if isinstance(path, RawRecordStream) else read_raw_records(path)
    observable = Observable.parse(observable)
    rows = stream.frame[stream.frame["observable"] == observable]
    if rows.empty:
        raise ScadaParseError(stream.path, 1, "observable", f"no records for observable {observable.value!r}")

    stamps = rows["timestamp"].dt.tz_convert(None).to_numpy().astype("datetime64[ns]")
    if step is None:
        step = float(get_setting("HIGH_RES_STEP")) if event_driven else _infer_step(stamps)
    t0 = stamps.min()
    offsets = (stamps - t0).astype("timedelta64[ns]").astype(np.int64) / 1e9
    ratio = offsets / step
    columns = np.rint(ratio).astype(np.int64)
    if not event_driven:
        off_grid = np.flatnonzero(np.abs(ratio - columns) > 1e-6)
        if off_grid.size:
            line = int(rows["line"].iat[int(off_grid[0])])
            raise ScadaParseError(stream.path, line, "timestamp", f"timestamp is off the {step:g} s grid")
    else:
        columns = np.floor(ratio + 1e-9).astype(np.int64)

    turbine_ids = list(dict.fromkeys(rows["turbine"]))
    row_of = {tid: i for i, tid in enumerate(turbine_ids)}
    n_steps = int(columns.max()) + 1
    values = np.full((len(turbine_ids), n_steps), np.nan)
    mask = np.zeros_like(values, dtype=bool)
    row_index = rows["turbine"].map(row_of).to_numpy()
    cells = rows[channel].to_numpy(dtype=np.float64)

    if event_driven:
        # later events within the same step win
        order = np.lexsort((offsets, columns, row_index))
        row_index, columns, cells = row_index[order], columns[order], cells[order]
    values[row_index, columns] = cells
    mask[row_index, columns] = np.isfinite(cells)

    panel = SignalPanel(tuple(turbine_ids), pd.Timestamp(t0, tz="UTC"), step, values, mask, observable)
    if event_driven:
        panel = forward_fill(panel)
    logger.info("Parsed %r (%s channel)", panel, channel)
    return panel


def forward_fill(panel: SignalPanel) -> SignalPanel:
    """Carry each turbine's last present value forward (leading gaps stay masked)."""
    frame = pd.DataFrame(np.where(panel.mask, panel.values, np.nan).T)
    filled = frame.ffill().to_numpy().T
    return panel.replace_data(filled, np.isfinite(filled))


def _bucket_view(panel: SignalPanel, target_step: float) -> Tuple[np.ndarray, np.ndarray, int]:
    try:
        k = steps_of(target_step, panel.step, "target step")
    except ValueError as exc:
        raise ResampleError(str(exc)) from exc
    n, t = panel.values.shape
    buckets = -(-t // k)
    pad = buckets * k - t
    values = np.pad(np.where(panel.mask, panel.values, 0.0), ((0, 0), (0, pad)))
    mask = np.pad(panel.mask, ((0, 0), (0, pad)), constant_values=False)
    return values.reshape(n, buckets, k), mask.reshape(n, buckets, k), k


def resample_mean(panel: SignalPanel, target_step: float) -> SignalPanel:
    """Left-aligned bucket means of the present values; empty buckets are masked."""
    require_valid(panel)
    values, mask, k = _bucket_view(panel, target_step)
    if k == 1:
        return panel
    count = mask.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = values.sum(axis=2) / count
    out = panel.replace_data(means, count > 0, step=float(target_step))
    logger.debug("Resampled %s from %g s to %g s", panel.observable.value, panel.step, target_step)
    return out


def resample_circular_mean(panel: SignalPanel, target_step: float) -> SignalPanel:
    """Bucket circular means; buckets with a zero resultant are masked."""
    require_valid(panel)
    values, mask, k = _bucket_view(panel, target_step)
    if k == 1:
        return panel
    direction, _ = circular_mean_along(values, mask, axis=2)
    return panel.replace_data(direction, np.isfinite(direction), step=float(target_step))


def _bitwise_repeat(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Cells equal, bit for bit, to the present cell right before them."""
    bits = np.ascontiguousarray(values).view(np.uint64)
    repeat = np.zeros_like(mask)
    repeat[:, 1:] = mask[:, 1:] & mask[:, :-1] & (bits[:, 1:] == bits[:, :-1])
    return repeat


def riffgat_clean(
    panel: SignalPanel,
    stddev_panel: Optional[SignalPanel] = None,
    max_wind_speed: Optional[float] = None,
) -> Tuple[SignalPanel, CleaningReport]:
    """Mask stale repeats, zero-deviation intervals and implausible wind speeds.

    Rules run in order and a cell is attributed to the first rule that masks it:
    consecutive bitwise-equal values (first kept), interval stddev exactly 0,
    and for wind speed panels values above ``max_wind_speed`` (30 m/s).
    """
    require_valid(panel)
    if stddev_panel is not None and (
        stddev_panel.values.shape != panel.values.shape
        or stddev_panel.turbine_ids != panel.turbine_ids
    ):
        raise ValueError(
            f"stddev panel {stddev_panel.values.shape} does not match panel {panel.values.shape}"
        )
    limit = float(get_setting("MAX_WIND_SPEED") if max_wind_speed is None else max_wind_speed)

    mask = panel.mask.copy()
    removed: Dict[str, np.ndarray] = {}

    removed[RULE_CONSECUTIVE_EQUAL] = _bitwise_repeat(panel.values, panel.mask)
    mask &= ~removed[RULE_CONSECUTIVE_EQUAL]

    if stddev_panel is not None:
        zero = stddev_panel.mask & (np.where(stddev_panel.mask, stddev_panel.values, np.nan) == 0.0)
        removed[RULE_ZERO_STDDEV] = mask & zero
    else:
        removed[RULE_ZERO_STDDEV] = np.zeros_like(mask)
    mask &= ~removed[RULE_ZERO_STDDEV]

    if panel.observable is Observable.WIND_SPEED:
        removed[RULE_OVER_SPEED] = mask & (np.where(mask, panel.values, -np.inf) > limit)
    else:
        removed[RULE_OVER_SPEED] = np.zeros_like(mask)
    mask &= ~removed[RULE_OVER_SPEED]

    cleaned = panel.replace_data(panel.values, mask)
    counts = {rule: int(cells.sum()) for rule, cells in removed.items()}
    missing = int((~mask).sum())
    per_turbine = {
        tid: {rule: int(cells[i].sum()) for rule, cells in removed.items()}
        for i, tid in enumerate(panel.turbine_ids)
    }
    for i, tid in enumerate(panel.turbine_ids):
        per_turbine[tid]["missing"] = int((~mask[i]).sum())
    report = CleaningReport(
        total_points=int(mask.size),
        missing_raw=missing,
        unassigned=missing,
        per_turbine=per_turbine,
        removed_by_rule=counts,
    )
    logger.info(
        "Riffgat cleaning of %s: removed %s, %d of %d cells now missing",
        panel.observable.value,
        counts,
        missing,
        mask.size,
    )
    return cleaned, report


def fill_constant(panel: SignalPanel, value: float) -> SignalPanel:
    """Replace every masked cell by ``value``."""
    filled = np.where(panel.mask, panel.values, float(value))
    return panel.replace_data(filled, np.ones_like(panel.mask))

