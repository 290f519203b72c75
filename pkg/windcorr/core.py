"""Domain types shared by every windcorr module, plus their file formats.

Panels are ``N x T`` arrays of one observable for ``N`` turbines on a uniform
time grid. A boolean mask marks the present cells; masked cells hold NaN as an
internal sentinel but no kernel reads them, every kernel consults the mask.
All types are immutable after construction (their arrays are read-only).
"""
from __future__ import annotations

import dataclasses
import enum
import json
import logging
import os
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from windcorr.conf import get_setting, read_ini_section

logger = logging.getLogger(__name__)

PathLike = Union[str, "os.PathLike[str]"]

NA_TOKEN = "NA"


class PanelFormatError(ValueError):
    """Raised when a panel CSV file violates the documented schema."""


class LayoutError(ValueError):
    """Raised when a farm layout violates its invariants."""


class InvalidPanel(ValueError):
    """Raised when a panel handed to a kernel fails :func:`validate_panel`."""

    def __init__(self, violations: Sequence["Violation"]) -> None:
        self.violations = list(violations)
        summary = "; ".join(v.message for v in self.violations[:5])
        if len(self.violations) > 5:
            summary += f"; ... ({len(self.violations)} violations)"
        super().__init__(summary)


class Observable(str, enum.Enum):
    ACTIVE_POWER = "active_power"
    WIND_SPEED = "wind_speed"
    WIND_DIRECTION = "wind_direction"
    DEVIATION = "deviation"

    @classmethod
    def parse(cls, value: Union[str, "Observable"]) -> "Observable":
        if isinstance(value, Observable):
            return value
        text = str(value).strip().lower()
        aliases = {
            "power": cls.ACTIVE_POWER,
            "speed": cls.WIND_SPEED,
            "wind": cls.WIND_SPEED,
            "direction": cls.WIND_DIRECTION,
        }
        if text in aliases:
            return aliases[text]
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown observable tag: {value!r}") from None

    @property
    def unit(self) -> str:
        return {
            Observable.ACTIVE_POWER: "kW",
            Observable.WIND_SPEED: "m/s",
            Observable.WIND_DIRECTION: "deg",
            Observable.DEVIATION: "kW",
        }[self]


class MatrixSource(str, enum.Enum):
    RAW = "raw"
    REDUCED = "reduced"
    DEVIATION = "deviation"


def as_utc_timestamp(value) -> pd.Timestamp:
    stamp = pd.Timestamp(value)
    if stamp.tzinfo is None:
        return stamp.tz_localize("UTC")
    return stamp.tz_convert("UTC")


def format_timestamps(times: Iterable[pd.Timestamp]) -> List[str]:
    """ISO-8601 UTC with a trailing ``Z``; fractional seconds only when needed."""
    index = pd.DatetimeIndex(list(times))
    if index.tz is None:
        index = index.tz_localize("UTC")
    else:
        index = index.tz_convert("UTC")
    if (index.microsecond == 0).all() and (index.nanosecond == 0).all():
        return list(index.strftime("%Y-%m-%dT%H:%M:%SZ"))
    return list(index.strftime("%Y-%m-%dT%H:%M:%S.%fZ"))


def parse_duration(value: Union[str, int, float]) -> float:
    """Parse ``"30m"``, ``"12h"``, ``"10s"``, ``"1d"`` or plain seconds."""
    if isinstance(value, (int, float, np.integer, np.floating)):
        seconds = float(value)
    else:
        text = str(value).strip()
        try:
            seconds = float(text)
        except ValueError:
            try:
                seconds = pd.Timedelta(text).total_seconds()
            except ValueError as exc:
                raise ValueError(f"invalid duration: {value!r}") from exc
    if not np.isfinite(seconds) or seconds <= 0:
        raise ValueError(f"duration must be positive: {value!r}")
    return seconds


def steps_of(duration: float, step: float, what: str = "duration") -> int:
    """Number of panel steps in ``duration``; must be an integer multiple."""
    ratio = duration / step
    count = int(round(ratio))
    if count < 1 or abs(ratio - count) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"{what} {duration:g} s is not a positive integer multiple of the step {step:g} s")
    return count


@dataclasses.dataclass(frozen=True)
class Violation:
    code: str
    message: str
    turbine: Optional[int] = None
    time: Optional[int] = None


@dataclasses.dataclass(frozen=True, eq=False)
class SignalPanel:
    """N x T panel of one observable with an availability mask."""

    turbine_ids: Tuple[str, ...]
    t0: pd.Timestamp
    step: float
    values: np.ndarray
    mask: np.ndarray
    observable: Observable = Observable.ACTIVE_POWER

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        mask = np.array(self.mask, dtype=bool, copy=True)
        if values.shape == mask.shape:
            values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "turbine_ids", tuple(str(i) for i in self.turbine_ids))
        object.__setattr__(self, "t0", as_utc_timestamp(self.t0))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "observable", Observable.parse(self.observable))

    @classmethod
    def from_values(
        cls,
        turbine_ids: Sequence[str],
        t0,
        step: float,
        values,
        observable: Union[str, Observable] = Observable.ACTIVE_POWER,
    ) -> "SignalPanel":
        """Build a panel whose mask is ``isfinite(values)``."""
        array = np.asarray(values, dtype=np.float64)
        return cls(tuple(turbine_ids), t0, step, array, np.isfinite(array), observable)

    @property
    def n_turbines(self) -> int:
        return self.values.shape[0] if self.values.ndim >= 1 else 0

    @property
    def n_steps(self) -> int:
        return self.values.shape[1] if self.values.ndim == 2 else 0

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def times(self) -> pd.DatetimeIndex:
        return pd.date_range(self.t0, periods=self.n_steps, freq=pd.Timedelta(seconds=self.step))

    @property
    def duration(self) -> float:
        return self.n_steps * self.step

    @property
    def is_complete(self) -> bool:
        return bool(self.mask.all())

    @property
    def present_fraction(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0

    def time_at(self, index: int) -> pd.Timestamp:
        return self.t0 + pd.Timedelta(seconds=self.step * index)

    def replace_data(
        self,
        values: np.ndarray,
        mask: Optional[np.ndarray] = None,
        observable: Optional[Union[str, Observable]] = None,
        t0=None,
        step: Optional[float] = None,
    ) -> "SignalPanel":
        values = np.asarray(values, dtype=np.float64)
        if mask is None:
            mask = np.isfinite(values)
        return SignalPanel(
            self.turbine_ids,
            self.t0 if t0 is None else t0,
            self.step if step is None else step,
            values,
            mask,
            self.observable if observable is None else observable,
        )

    def window(self, start: int, length: int) -> "SignalPanel":
        if start < 0 or length < 1 or start + length > self.n_steps:
            raise IndexError(f"window [{start}, {start + length}) outside panel of {self.n_steps} steps")
        return self.replace_data(
            self.values[:, start:start + length],
            self.mask[:, start:start + length],
            t0=self.time_at(start),
        )

    def select(self, turbine_ids: Sequence[str]) -> "SignalPanel":
        position = {tid: i for i, tid in enumerate(self.turbine_ids)}
        try:
            rows = [position[str(tid)] for tid in turbine_ids]
        except KeyError as exc:
            raise KeyError(f"turbine {exc.args[0]} not in panel") from None
        return SignalPanel(
            tuple(str(t) for t in turbine_ids),
            self.t0,
            self.step,
            self.values[rows],
            self.mask[rows],
            self.observable,
        )

    def equals(self, other: "SignalPanel") -> bool:
        """Bit-exact comparison of data and metadata."""
        if not isinstance(other, SignalPanel):
            return False
        if (
            self.turbine_ids != other.turbine_ids
            or self.t0 != other.t0
            or self.step != other.step
            or self.observable != other.observable
            or self.values.shape != other.values.shape
            or not np.array_equal(self.mask, other.mask)
        ):
            return False
        present = self.values[self.mask]
        return np.array_equal(present.view(np.uint64), other.values[other.mask].view(np.uint64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignalPanel):
            return NotImplemented
        return self.equals(other)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"SignalPanel({self.observable.value}, N={self.n_turbines}, T={self.n_steps}, "
            f"t0={self.t0.isoformat()}, step={self.step:g}s, present={self.present_fraction:.2%})"
        )


def validate_panel(panel: SignalPanel) -> List[Violation]:
    """Return every violated panel invariant; an empty list means valid."""
    violations: List[Violation] = []
    values, mask = panel.values, panel.mask

    if values.ndim != 2:
        violations.append(Violation("not_two_dimensional", f"values must be N x T, got shape {values.shape}"))
        return violations
    n, t = values.shape
    if n < 1:
        violations.append(Violation("no_turbines", "panel has no turbines (N = 0)"))
    if t < 1:
        violations.append(Violation("no_samples", "panel has no time steps (T = 0)"))
    if len(panel.turbine_ids) != n:
        violations.append(
            Violation("id_count_mismatch", f"{len(panel.turbine_ids)} turbine ids for {n} rows")
        )
    seen: Dict[str, int] = {}
    for index, tid in enumerate(panel.turbine_ids):
        if tid in seen:
            violations.append(
                Violation("duplicate_id", f"turbine id {tid!r} at row {index} repeats row {seen[tid]}", turbine=index)
            )
        else:
            seen[tid] = index
    if mask.shape != values.shape:
        violations.append(
            Violation("shape_mismatch", f"mask shape {mask.shape} differs from values shape {values.shape}")
        )
    if not np.isfinite(panel.step) or panel.step <= 0:
        violations.append(Violation("nonpositive_step", f"time step must be positive, got {panel.step!r}"))
    if mask.shape == values.shape:
        bad_rows, bad_cols = np.nonzero(mask & ~np.isfinite(values))
        for row, col in zip(bad_rows.tolist(), bad_cols.tolist()):
            violations.append(
                Violation("non_finite_value", f"present cell (turbine {row}, time {col}) is not finite", row, col)
            )
    return violations


def require_valid(panel: SignalPanel) -> SignalPanel:
    violations = validate_panel(panel)
    if violations:
        raise InvalidPanel(violations)
    return panel


@dataclasses.dataclass(frozen=True, eq=False)
class FarmLayout:
    """Turbine positions (easting/northing in m), rotor diameter and rows."""

    turbine_ids: Tuple[str, ...]
    positions: np.ndarray
    rotor_diameter: float
    row_of: Tuple[int, ...]
    row_orthogonal_bearing: float = 0.0

    def __post_init__(self) -> None:
        ids = tuple(str(i) for i in self.turbine_ids)
        positions = np.array(self.positions, dtype=np.float64, copy=True).reshape(-1, 2)
        rows = tuple(int(r) for r in self.row_of)
        if not ids:
            raise LayoutError("layout has no turbines")
        if len(set(ids)) != len(ids):
            raise LayoutError("turbine ids must be unique")
        if positions.shape[0] != len(ids) or len(rows) != len(ids):
            raise LayoutError(
                f"{len(ids)} ids, {positions.shape[0]} positions and {len(rows)} row indices do not match"
            )
        if not np.all(np.isfinite(positions)):
            raise LayoutError("positions must be finite")
        if not self.rotor_diameter > 0:
            raise LayoutError(f"rotor diameter must be positive, got {self.rotor_diameter!r}")
        unique_positions = np.unique(positions, axis=0)
        if unique_positions.shape[0] != positions.shape[0]:
            raise LayoutError("turbine positions must be pairwise distinct")
        if sorted(set(rows)) != list(range(max(rows) + 1)):
            raise LayoutError(f"row indices must be contiguous from 0, got {sorted(set(rows))}")
        positions.setflags(write=False)
        object.__setattr__(self, "turbine_ids", ids)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "rotor_diameter", float(self.rotor_diameter))
        object.__setattr__(self, "row_of", rows)
        object.__setattr__(self, "row_orthogonal_bearing", float(self.row_orthogonal_bearing) % 360.0)

    @property
    def n_turbines(self) -> int:
        return len(self.turbine_ids)

    @property
    def n_rows(self) -> int:
        return max(self.row_of) + 1

    def rows(self) -> List[Tuple[str, ...]]:
        grouped: List[List[str]] = [[] for _ in range(self.n_rows)]
        for tid, row in zip(self.turbine_ids, self.row_of):
            grouped[row].append(tid)
        return [tuple(g) for g in grouped]

    def index_of(self, turbine_id: str) -> int:
        return self.turbine_ids.index(str(turbine_id))

    def wake_cones(self, bearings, wake_decay: float) -> Tuple[np.ndarray, np.ndarray]:
        """Top-hat wake geometry for winds coming from ``bearings`` (degrees).

        Returns ``(x, inside)``, both ``len(bearings) x N x N``: ``x[b, i, j]`` is
        how far turbine j stands downstream of turbine i, and ``inside[b, i, j]``
        is true when j lies in the cone of half-width ``(D + 2 k x) / 2`` behind i.
        """
        bearings = np.atleast_1d(np.asarray(bearings, dtype=np.float64))
        theta = np.deg2rad(bearings)
        downwind = -np.stack([np.sin(theta), np.cos(theta)], axis=-1)  # B x 2
        # offsets[i, j] = position of j relative to i
        offsets = self.positions[None, :, :] - self.positions[:, None, :]
        x = np.einsum("ijc,bc->bij", offsets, downwind)
        lateral = np.abs(
            offsets[None, :, :, 0] * downwind[:, None, None, 1] - offsets[None, :, :, 1] * downwind[:, None, None, 0]
        )
        reach = np.clip(x, 0.0, None)
        inside = (x > 0) & (lateral < (self.rotor_diameter + 2.0 * wake_decay * reach) / 2.0)
        return reach, inside


@dataclasses.dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    ids: Tuple[str, ...]
    entries: np.ndarray
    stddevs: np.ndarray
    window_start: pd.Timestamp
    window_len: float
    source: MatrixSource = MatrixSource.RAW
    n_samples: Optional[int] = None

    def __post_init__(self) -> None:
        for name in ("entries", "stddevs"):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "window_start", as_utc_timestamp(self.window_start))
        object.__setattr__(self, "source", MatrixSource(self.source))


@dataclasses.dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric unit-diagonal matrix with the window it was estimated on."""

    ids: Tuple[str, ...]
    entries: np.ndarray
    window_start: pd.Timestamp
    window_len: float
    source: MatrixSource = MatrixSource.RAW
    rank: Optional[int] = None
    n_samples: Optional[int] = None

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.float64, copy=True)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "window_start", as_utc_timestamp(self.window_start))
        object.__setattr__(self, "window_len", float(self.window_len))
        object.__setattr__(self, "source", MatrixSource(self.source))

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def is_rank_deficient(self) -> bool:
        return self.rank is not None and self.rank < self.n

    def violations(self, tol: float = 1e-10) -> List[str]:
        """Check symmetry, unit diagonal, bounds and positive semi-definiteness."""
        c = self.entries
        problems: List[str] = []
        if c.shape != (self.n, self.n):
            return [f"entries shape {c.shape} does not match {self.n} ids"]
        if np.max(np.abs(c - c.T), initial=0.0) > tol:
            problems.append("not symmetric")
        if np.max(np.abs(np.diag(c) - 1.0), initial=0.0) > tol:
            problems.append("diagonal differs from 1")
        if np.any(c > 1.0 + tol) or np.any(c < -1.0 - tol):
            problems.append("entries outside [-1, 1]")
        smallest = float(np.linalg.eigvalsh((c + c.T) / 2.0)[0])
        if smallest < -1e-8 * self.n:
            problems.append(f"not positive semi-definite (smallest eigenvalue {smallest:.3e})")
        return problems

    def metadata(self) -> Dict[str, object]:
        return {
            "ids": list(self.ids),
            "window_start": format_timestamps([self.window_start])[0],
            "window_len_s": self.window_len,
            "source": self.source.value,
            "rank": self.rank,
            "n_samples": self.n_samples,
            "rank_deficient": self.is_rank_deficient,
        }


@dataclasses.dataclass(frozen=True, eq=False)
class SvdFactors:
    """Thin SVD ``M = U S V^T`` with ``k = min(N, T)``.

    ``u`` is N x k, ``v`` is T x k; both have orthonormal columns. For
    ``T >= N`` ``u`` is the full orthogonal N x N factor.
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        for name in ("u", "singular_values", "v"):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def vt(self) -> np.ndarray:
        return self.v.T

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


@dataclasses.dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self) -> None:
        for name in ("eigenvalues", "eigenvectors"):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())


@dataclasses.dataclass(frozen=True)
class CleaningReport:
    """Per-cause accounting of missing and replaced cells.

    ``classified_failure`` counts missing cells labeled failure, so
    ``missing_raw == classified_failure + classified_shutdown + unassigned``.
    Present cells relabeled as failure are counted in ``failure_overrides``.
    """

    total_points: int
    missing_raw: int
    classified_failure: int = 0
    classified_shutdown: int = 0
    unassigned: int = 0
    failure_overrides: int = 0
    all_failure_steps: int = 0
    per_turbine: Mapping[str, Mapping[str, int]] = dataclasses.field(default_factory=dict)
    removed_by_rule: Mapping[str, int] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.missing_raw != self.classified_failure + self.classified_shutdown + self.unassigned:
            raise ValueError(
                "missing_raw must equal classified_failure + classified_shutdown + unassigned "
                f"({self.missing_raw} != {self.classified_failure} + {self.classified_shutdown} + {self.unassigned})"
            )

    def _percent(self, count: int) -> float:
        return round(100.0 * count / self.total_points, 4) if self.total_points else 0.0

    @property
    def percentages(self) -> Dict[str, float]:
        return {
            "missing_raw": self._percent(self.missing_raw),
            "classified_failure": self._percent(self.classified_failure),
            "classified_shutdown": self._percent(self.classified_shutdown),
            "unassigned": self._percent(self.unassigned),
            "failure_overrides": self._percent(self.failure_overrides),
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "total_points": self.total_points,
            "missing_raw": self.missing_raw,
            "classified_failure": self.classified_failure,
            "classified_shutdown": self.classified_shutdown,
            "unassigned": self.unassigned,
            "failure_overrides": self.failure_overrides,
            "all_failure_steps": self.all_failure_steps,
            "removed_by_rule": dict(self.removed_by_rule),
            "per_turbine": {k: dict(v) for k, v in self.per_turbine.items()},
            "percentages": self.percentages,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "CleaningReport":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in fields})


# ---------------------------------------------------------------------------
# Panel CSV: header ``timestamp,<id1>,<id2>,...``, one row per time step
# ---------------------------------------------------------------------------

def panel_sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".meta.json")


def write_panel(panel: SignalPanel, path: PathLike) -> None:
    """Write the wide CSV plus a ``.meta.json`` sidecar holding the step and observable."""
    require_valid(panel)
    frame = pd.DataFrame(panel.values.T, columns=list(panel.turbine_ids))
    frame.insert(0, "timestamp", format_timestamps(panel.times))
    frame.to_csv(path, index=False, na_rep=NA_TOKEN, lineterminator="\n", encoding="utf-8")
    with open(panel_sidecar_path(path), "w", encoding="utf-8") as handle:
        json.dump({"observable": panel.observable.value, "step_s": float(panel.step)}, handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.debug("Wrote %r to %s", panel, path)


def read_panel_metadata(path: PathLike) -> Dict[str, object]:
    sidecar = panel_sidecar_path(path)
    if not sidecar.exists():
        return {}
    try:
        with open(sidecar, "r", encoding="utf-8") as handle:
            meta = json.load(handle)
        return {"observable": Observable.parse(meta["observable"]), "step_s": parse_duration(meta["step_s"])}
    except (KeyError, TypeError, ValueError) as exc:
        raise PanelFormatError(f"{sidecar}: invalid panel metadata: {exc}") from exc


def read_header(path: PathLike) -> List[str]:
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline().rstrip("\r\n")
    if not first:
        raise PanelFormatError(f"{path}: empty file")
    return first.split(",")


def _parse_cells(path: PathLike, raw: np.ndarray, missing: np.ndarray) -> np.ndarray:
    """Decimal text to float64 with correct rounding, so written panels re-read bit-exact."""
    text = np.where(missing, "nan", raw).astype(str)
    try:
        numeric = text.astype(np.float64)
    except ValueError:
        numeric = np.full(text.shape, np.nan)
        for (row, col), cell in np.ndenumerate(text):
            try:
                numeric[row, col] = float(cell)
            except ValueError:
                raise PanelFormatError(f"{path}:{row + 2}:{col + 2}: not a number: {cell!r}") from None
    unparsed = ~missing & ~np.isfinite(numeric)
    if unparsed.any():
        row, col = (int(x[0]) for x in np.nonzero(unparsed))
        raise PanelFormatError(f"{path}:{row + 2}:{col + 2}: not a finite number: {raw[row, col]!r}")
    return numeric


def read_panel(
    path: PathLike,
    observable: Optional[Union[str, Observable]] = None,
    step: Optional[float] = None,
) -> SignalPanel:
    """Read a wide panel CSV; ``NA`` cells become masked.

    The step and observable come from the ``.meta.json`` sidecar when it exists.
    Without one, the observable defaults to active power and a single-row file
    needs an explicit ``step``.
    """
    meta = read_panel_metadata(path)
    if observable is None:
        observable = meta.get("observable", Observable.ACTIVE_POWER)
    observable = Observable.parse(observable)
    if "observable" in meta and meta["observable"] is not observable:
        raise PanelFormatError(f"{path}: panel holds {meta['observable'].value}, not {observable.value}")
    if "step_s" in meta:
        if step is not None and abs(step - meta["step_s"]) > 1e-6:
            raise PanelFormatError(f"{path}: file step {meta['step_s']:g} s differs from expected {step:g} s")
        step = meta["step_s"]
    header = read_header(path)
    if header[0] != "timestamp":
        raise PanelFormatError(f"{path}:1: first column must be 'timestamp', got {header[0]!r}")
    ids = header[1:]
    if not ids:
        raise PanelFormatError(f"{path}:1: no turbine columns")
    duplicates = sorted({tid for tid in ids if ids.count(tid) > 1})
    if duplicates:
        raise PanelFormatError(f"{path}:1: duplicate turbine column(s) {duplicates}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.ParserError as exc:
        raise PanelFormatError(f"{path}: {exc}") from exc
    if frame.empty:
        raise PanelFormatError(f"{path}: no data rows")
    frame.columns = header

    stamps = pd.to_datetime(frame["timestamp"], utc=True, format="ISO8601", errors="coerce")
    bad = np.flatnonzero(stamps.isna().to_numpy())
    if bad.size:
        row = int(bad[0])
        raise PanelFormatError(f"{path}:{row + 2}:1: malformed timestamp {frame['timestamp'].iloc[row]!r}")

    raw = frame[ids].to_numpy(dtype=object)
    missing = raw == NA_TOKEN
    numeric = _parse_cells(path, raw, missing)

    offsets = (stamps - stamps.iloc[0]).dt.total_seconds().to_numpy()
    diffs = np.diff(offsets)
    if diffs.size:
        inferred = float(diffs[0])
        irregular = np.flatnonzero(np.abs(diffs - inferred) > 1e-6)
        if inferred <= 0 or irregular.size:
            row = int(irregular[0]) + 1 if irregular.size else 1
            raise PanelFormatError(f"{path}:{row + 2}:1: timestamps are not uniformly spaced")
        if step is not None and abs(step - inferred) > 1e-6:
            raise PanelFormatError(f"{path}: file step {inferred:g} s differs from expected {step:g} s")
        step = inferred if step is None else step
    elif step is None:
        raise PanelFormatError(f"{path}: a single-row panel without metadata needs an explicit step")

    panel = SignalPanel(tuple(ids), stamps.iloc[0], step, numeric.T, ~missing.T, observable)
    logger.debug("Read %r from %s", panel, path)
    return panel


# ---------------------------------------------------------------------------
# Layout: CSV ``id,easting_m,northing_m,row`` plus an INI ``[layout]`` section
# ---------------------------------------------------------------------------

LAYOUT_COLUMNS = ["id", "easting_m", "northing_m", "row"]
LAYOUT_KEYS = ("rotor_diameter_m", "row_orthogonal_bearing_deg")


def layout_config_path(csv_path: PathLike) -> Path:
    return Path(csv_path).with_suffix(".cfg")


def read_layout(csv_path: PathLike, config_path: Optional[PathLike] = None) -> FarmLayout:
    """Read a layout CSV; the rotor diameter and bearing come from ``config_path``
    (default: the ``.cfg`` file next to the CSV)."""
    frame = pd.read_csv(csv_path, dtype={"id": str}, keep_default_na=False)
    if list(frame.columns) != LAYOUT_COLUMNS:
        raise LayoutError(f"{csv_path}: header must be {','.join(LAYOUT_COLUMNS)}, got {','.join(frame.columns)}")
    cfg = read_ini_section(config_path or layout_config_path(csv_path), "layout", LAYOUT_KEYS)
    try:
        rotor_diameter = float(cfg["rotor_diameter_m"])
        bearing = float(cfg.get("row_orthogonal_bearing_deg", 0.0))
    except (KeyError, ValueError) as exc:
        raise LayoutError(f"{config_path or layout_config_path(csv_path)}: {exc}") from exc
    return FarmLayout(
        tuple(frame["id"].astype(str)),
        frame[["easting_m", "northing_m"]].to_numpy(dtype=np.float64),
        rotor_diameter,
        tuple(frame["row"].astype(int)),
        bearing,
    )


def write_layout(layout: FarmLayout, csv_path: PathLike, config_path: Optional[PathLike] = None) -> None:
    frame = pd.DataFrame(
        {
            "id": list(layout.turbine_ids),
            "easting_m": layout.positions[:, 0],
            "northing_m": layout.positions[:, 1],
            "row": list(layout.row_of),
        }
    )
    frame.to_csv(csv_path, index=False, lineterminator="\n")
    with open(config_path or layout_config_path(csv_path), "w", encoding="utf-8") as handle:
        handle.write("[layout]\n")
        handle.write(f"rotor_diameter_m = {layout.rotor_diameter!r}\n")
        handle.write(f"row_orthogonal_bearing_deg = {layout.row_orthogonal_bearing!r}\n")


# ---------------------------------------------------------------------------
# Matrix CSV with id header row/column and a JSON sidecar
# ---------------------------------------------------------------------------

def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def write_matrix(matrix: CorrelationMatrix, path: PathLike, digits: Optional[int] = None) -> None:
    digits = int(digits or get_setting("MATRIX_DIGITS"))
    frame = pd.DataFrame(matrix.entries, index=list(matrix.ids), columns=list(matrix.ids))
    frame.index.name = "id"
    frame.to_csv(path, float_format=f"%.{digits}g", lineterminator="\n")
    with open(sidecar_path(path), "w", encoding="utf-8") as handle:
        json.dump(matrix.metadata(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_matrix(path: PathLike) -> CorrelationMatrix:
    frame = pd.read_csv(path, index_col=0, dtype={"id": str})
    frame.index = frame.index.astype(str)
    if list(frame.index) != list(frame.columns):
        raise PanelFormatError(f"{path}: row ids and column ids differ")
    meta: Dict[str, object] = {}
    if sidecar_path(path).exists():
        with open(sidecar_path(path), "r", encoding="utf-8") as handle:
            meta = json.load(handle)
    return CorrelationMatrix(
        tuple(frame.columns),
        frame.to_numpy(dtype=np.float64),
        meta.get("window_start", "1970-01-01T00:00:00Z"),
        float(meta.get("window_len_s", 0.0)),
        MatrixSource(meta.get("source", MatrixSource.RAW.value)),
        meta.get("rank"),
        meta.get("n_samples"),
    )
