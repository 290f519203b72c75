"""Synthetic SCADA data with known ground truth.

A farm-wide ambient wind (mean-reverting speed, wandering or scheduled
direction) is slowed down behind upwind turbines by top-hat Jensen wakes,
turned into power through a cubic power curve, and then damaged with
failure episodes, low-wind shutdowns and sporadic gaps.

All randomness comes from one ``numpy.random.Generator`` seeded from the
configuration and drawn in this order:

1. initial ambient speed and direction
2. speed innovations, then direction innovations (one per step each)
3. placement of random failure episodes, then of random lulls
4. lull speed jitter
5. power noise, then slow power drifts (only when enabled)
6. anemometer noise, then wind vane noise
7. turbines blanked by each lull
8. near-zero outliers inside failure episodes
9. sporadic gaps
"""
from __future__ import annotations

import dataclasses
import logging
import math
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from windcorr.conf import ConfigFileError, get_setting, read_ini_section
from windcorr.core import (
    NA_TOKEN,
    FarmLayout,
    Observable,
    PathLike,
    SignalPanel,
    as_utc_timestamp,
    format_timestamps,
    parse_duration,
    read_layout,
    steps_of,
    write_layout,
    write_panel,
)
from windcorr.utils.cleaning import Label, NaLabels, write_labels

logger = logging.getLogger(__name__)

DEFAULT_START = "2014-01-01T00:00:00Z"


class SimulationConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Layout presets
# ---------------------------------------------------------------------------

def riffgat_like_layout() -> FarmLayout:
    """Three west-east rows of ten turbines, ids 1-10 in the northern row."""
    ids, positions, rows = [], [], []
    for row in range(3):
        for column in range(10):
            ids.append(str(row * 10 + column + 1))
            positions.append((550.0 * column, 600.0 * (2 - row)))
            rows.append(row)
    return FarmLayout(tuple(ids), np.array(positions), 120.0, tuple(rows), 0.0)


THANET_ROW_SIZES = (11, 13, 15, 17, 16, 15, 13)


def thanet_like_layout() -> FarmLayout:
    """100 turbines in seven NW-SE rows; row 0 is the north-eastern one."""
    along = np.array([math.sin(math.radians(135.0)), math.cos(math.radians(135.0))])
    across = np.array([math.sin(math.radians(45.0)), math.cos(math.radians(45.0))])
    ids, positions, rows = [], [], []
    for row, size in enumerate(THANET_ROW_SIZES):
        for k in range(size):
            ids.append(str(len(ids) + 1))
            positions.append((k - (size - 1) / 2.0) * 470.0 * along - row * 720.0 * across)
            rows.append(row)
    return FarmLayout(tuple(ids), np.round(np.array(positions), 3), 90.0, tuple(rows), 45.0)


LAYOUT_PRESETS = {
    "riffgat": riffgat_like_layout,
    "thanet": thanet_like_layout,
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class TurbineModel:
    cut_in: float = 4.0
    rated_speed: float = 13.0
    rated_power: float = 3600.0
    cut_out: float = 25.0

    def __post_init__(self) -> None:
        if not 0 <= self.cut_in < self.rated_speed < self.cut_out:
            raise SimulationConfigError(
                f"need cut-in < rated speed < cut-out, got {self.cut_in}, {self.rated_speed}, {self.cut_out}"
            )
        if not self.rated_power > 0:
            raise SimulationConfigError(f"rated power must be positive, got {self.rated_power}")


@dataclasses.dataclass(frozen=True)
class DirectionEpisode:
    """Hold the ambient direction at ``bearing`` (plus jitter) for ``duration`` seconds."""

    bearing: float
    duration: float


@dataclasses.dataclass(frozen=True)
class FailureEpisode:
    turbine: str
    start: float
    duration: float


@dataclasses.dataclass(frozen=True)
class LullEpisode:
    start: float
    duration: float


@dataclasses.dataclass(frozen=True)
class SimulationConfig:
    """Everything :func:`simulate` needs; times are seconds from ``t0``."""

    layout: FarmLayout = dataclasses.field(default_factory=riffgat_like_layout)
    t0: pd.Timestamp = DEFAULT_START
    duration: float = 6 * 86400.0
    step: float = 600.0
    # ambient wind
    mean_speed: float = 10.0
    speed_reversion: float = 0.3
    speed_volatility: float = 1.5
    initial_direction: Optional[float] = None
    direction_drift: float = 0.0
    direction_volatility: float = 10.0
    direction_episodes: Tuple[DirectionEpisode, ...] = ()
    direction_jitter: float = 2.0
    # wakes
    ct: float = 0.8
    wake_decay: float = dataclasses.field(default_factory=lambda: float(get_setting("WAKE_DECAY")))
    turbine: TurbineModel = TurbineModel()
    # measurement
    noise_std: float = 30.0
    drift: bool = False
    drift_volatility: float = 100.0
    anemometer_noise: float = 0.1
    vane_noise: float = 2.0
    # injections
    failures: Tuple[FailureEpisode, ...] = ()
    random_failures: int = 0
    random_failure_duration: float = 48 * 3600.0
    failure_outlier_rate: float = 0.02
    lulls: Tuple[LullEpisode, ...] = ()
    random_lulls: int = 0
    random_lull_duration: float = 3 * 3600.0
    lull_speed: float = 2.5
    lull_fraction: float = 0.9
    sporadic_na_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "t0", as_utc_timestamp(self.t0))
        for name in ("duration", "step", "random_failure_duration", "random_lull_duration"):
            object.__setattr__(self, name, parse_duration(getattr(self, name)))
        if not 0.0 < self.ct < 1.0:
            raise SimulationConfigError(f"thrust coefficient must lie in (0, 1), got {self.ct}")
        if not self.wake_decay > 0:
            raise SimulationConfigError(f"wake decay constant must be positive, got {self.wake_decay}")
        try:
            steps_of(self.duration, self.step, "duration")
        except ValueError as exc:
            raise SimulationConfigError(str(exc)) from exc
        for name in ("mean_speed", "speed_reversion", "speed_volatility", "direction_volatility",
                     "direction_jitter", "noise_std", "drift_volatility", "anemometer_noise",
                     "vane_noise", "lull_speed", "random_failures", "random_lulls"):
            if getattr(self, name) < 0:
                raise SimulationConfigError(f"{name} must not be negative, got {getattr(self, name)}")
        for name in ("failure_outlier_rate", "lull_fraction", "sporadic_na_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SimulationConfigError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        for failure in self.failures:
            if failure.turbine not in self.layout.turbine_ids:
                raise SimulationConfigError(f"failure episode names unknown turbine {failure.turbine!r}")
        for episode in (*self.failures, *self.lulls):
            if episode.start < 0 or episode.duration <= 0 or episode.start + episode.duration > self.duration:
                raise SimulationConfigError(f"episode {episode} does not fit into {self.duration:g} s")
        if self.random_failure_duration > self.duration or self.random_lull_duration > self.duration:
            raise SimulationConfigError("random episodes are longer than the simulation")

    @property
    def n_steps(self) -> int:
        return steps_of(self.duration, self.step, "duration")

    @classmethod
    def from_config(cls, path: PathLike, seed: Optional[int] = None) -> "SimulationConfig":
        """Read the ``[simulation]`` section of an INI file.

        ``layout`` is a preset name (``riffgat``, ``thanet``) or a layout CSV
        path relative to the file. Episode lists use ``;`` separators::

            direction_episodes = 0:12h; 45:12h
            failures = 7:24h:48h
            lulls = 60h:3h
        """
        known = [f.name for f in dataclasses.fields(cls) if f.name != "turbine"]
        known += ["turbine_" + f.name for f in dataclasses.fields(TurbineModel)]
        kwargs: Dict[str, object] = {}
        turbine: Dict[str, float] = {}
        try:
            items = read_ini_section(path, "simulation", known)
            for key, text in items.items():
                if key == "layout":
                    kwargs[key] = _layout_from_text(text, Path(path).parent)
                elif key == "t0":
                    kwargs[key] = as_utc_timestamp(text)
                elif key.startswith("turbine_"):
                    turbine[key[len("turbine_"):]] = float(text)
                elif key == "direction_episodes":
                    kwargs[key] = tuple(
                        DirectionEpisode(float(b), parse_duration(d)) for b, d in _split_episodes(text, 2)
                    )
                elif key == "failures":
                    kwargs[key] = tuple(
                        FailureEpisode(t, parse_duration(s), parse_duration(d)) for t, s, d in _split_episodes(text, 3)
                    )
                elif key == "lulls":
                    kwargs[key] = tuple(LullEpisode(parse_duration(s), parse_duration(d)) for s, d in _split_episodes(text, 2))
                elif key == "drift":
                    kwargs[key] = text.strip().lower() in ("1", "true", "yes", "on")
                elif key in ("seed", "random_failures", "random_lulls"):
                    kwargs[key] = int(text)
                elif key == "initial_direction":
                    kwargs[key] = None if text.strip().lower() in ("", "random") else float(text)
                elif key in ("duration", "step", "random_failure_duration", "random_lull_duration"):
                    kwargs[key] = parse_duration(text)
                else:
                    kwargs[key] = float(text)
        except (ValueError, ConfigFileError) as exc:
            raise SimulationConfigError(f"{path}: {exc}") from exc
        if turbine:
            kwargs["turbine"] = TurbineModel(**turbine)
        if seed is not None:
            kwargs["seed"] = int(seed)
        return cls(**kwargs)


def _split_episodes(text: str, width: int) -> Tuple[Tuple[str, ...], ...]:
    episodes = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = tuple(p.strip() for p in chunk.split(":"))
        if len(parts) != width:
            raise ValueError(f"episode {chunk.strip()!r} needs {width} ':'-separated fields")
        episodes.append(parts)
    return tuple(episodes)


def _layout_from_text(text: str, base: Path) -> FarmLayout:
    name = text.strip()
    if name.lower() in LAYOUT_PRESETS:
        return LAYOUT_PRESETS[name.lower()]()
    path = Path(name)
    return read_layout(path if path.is_absolute() else base / path)


# ---------------------------------------------------------------------------
# Physics
# ---------------------------------------------------------------------------

def power_curve(u, turbine: TurbineModel = TurbineModel()) -> np.ndarray:
    """Cubic between cut-in and rated speed, rated up to cut-out, 0 elsewhere."""
    u = np.asarray(u, dtype=np.float64)
    cubic = turbine.rated_power * (u ** 3 - turbine.cut_in ** 3) / (turbine.rated_speed ** 3 - turbine.cut_in ** 3)
    power = np.where(u < turbine.rated_speed, cubic, turbine.rated_power)
    power = np.where((u <= turbine.cut_in) | (u > turbine.cut_out), 0.0, power)
    return power


def jensen_deficit(x, rotor_diameter: float, ct: float, wake_decay: float) -> np.ndarray:
    """Fractional speed deficit ``x`` metres behind a rotor (top-hat wake)."""
    x = np.asarray(x, dtype=np.float64)
    return (1.0 - math.sqrt(1.0 - ct)) * (rotor_diameter / (rotor_diameter + 2.0 * wake_decay * x)) ** 2


def wake_factors(layout: FarmLayout, bearings, ct: float, wake_decay: float) -> np.ndarray:
    """``len(bearings) x N`` speed factors ``1 - sqrt(sum of squared deficits)``.

    ``bearings`` are the directions the wind comes from.
    """
    x, inside = layout.wake_cones(bearings, wake_decay)
    deficits = np.where(inside, jensen_deficit(x, layout.rotor_diameter, ct, wake_decay), 0.0)
    total = np.sqrt((deficits ** 2).sum(axis=1))
    return np.clip(1.0 - total, 0.0, 1.0)


def effective_speed(layout: FarmLayout, ambient, bearings, ct: float, wake_decay: float) -> np.ndarray:
    """N x T speeds seen by each rotor; evaluated in chunks of time steps."""
    ambient = np.asarray(ambient, dtype=np.float64)
    bearings = np.asarray(bearings, dtype=np.float64)
    n = layout.n_turbines
    chunk = max(1, 2_000_000 // (n * n))
    factors = np.empty((ambient.size, n))
    for start in range(0, ambient.size, chunk):
        factors[start:start + chunk] = wake_factors(layout, bearings[start:start + chunk], ct, wake_decay)
    return (factors * ambient[:, None]).T


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True, eq=False)
class SimulationResult:
    config: SimulationConfig
    power: SignalPanel
    wind_speed: SignalPanel
    wind_direction: SignalPanel
    labels: NaLabels
    ambient_speed: np.ndarray
    ambient_direction: np.ndarray
    effective_speed: np.ndarray

    @property
    def layout(self) -> FarmLayout:
        return self.config.layout


def _ambient_wind(config: SimulationConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    t = config.n_steps
    dt = config.step / 3600.0
    speed = np.empty(t)
    direction = np.empty(t)
    speed0 = config.mean_speed + rng.normal(0.0, config.speed_volatility)
    direction0 = rng.uniform(0.0, 360.0) if config.initial_direction is None else config.initial_direction
    speed_steps = rng.normal(0.0, 1.0, t)
    direction_steps = rng.normal(0.0, 1.0, t)

    speed[0] = max(speed0, 0.0)
    for k in range(1, t):
        pull = config.speed_reversion * (config.mean_speed - speed[k - 1]) * dt
        speed[k] = max(speed[k - 1] + pull + config.speed_volatility * math.sqrt(dt) * speed_steps[k], 0.0)

    walk = direction0 + np.cumsum(
        np.concatenate(([0.0], config.direction_drift * dt + config.direction_volatility * math.sqrt(dt) * direction_steps[1:]))
    )
    direction[:] = walk
    if config.direction_episodes:
        k = 0
        for episode in config.direction_episodes:
            n = int(round(episode.duration / config.step))
            direction[k:k + n] = episode.bearing + config.direction_jitter * direction_steps[k:k + n]
            k += n
        if k < t:
            direction[k:] = config.direction_episodes[-1].bearing + config.direction_jitter * direction_steps[k:]
    return speed, np.mod(direction, 360.0)


def _episode_cells(start: float, duration: float, step: float, t: int) -> slice:
    first = int(start // step)
    return slice(first, min(t, first + max(1, int(round(duration / step)))))


def simulate(config: SimulationConfig) -> SimulationResult:
    """Generate power, wind speed and wind direction panels with ground-truth labels."""
    rng = np.random.default_rng(config.seed)
    layout = config.layout
    n, t = layout.n_turbines, config.n_steps

    ambient, bearing = _ambient_wind(config, rng)

    failures = list(config.failures)
    for _ in range(config.random_failures):
        turbine = layout.turbine_ids[int(rng.integers(n))]
        latest = config.duration - config.random_failure_duration
        start = float(rng.integers(int(latest // config.step) + 1)) * config.step
        failures.append(FailureEpisode(turbine, start, config.random_failure_duration))
    lulls = list(config.lulls)
    for _ in range(config.random_lulls):
        latest = config.duration - config.random_lull_duration
        start = float(rng.integers(int(latest // config.step) + 1)) * config.step
        lulls.append(LullEpisode(start, config.random_lull_duration))

    lull_steps = np.zeros(t, dtype=bool)
    for lull in lulls:
        lull_steps[_episode_cells(lull.start, lull.duration, config.step, t)] = True
    jitter = np.abs(rng.normal(0.0, 0.3, t))
    ambient = np.where(lull_steps, config.lull_speed + jitter, ambient)

    speed = effective_speed(layout, ambient, bearing, config.ct, config.wake_decay)
    power = power_curve(speed, config.turbine) + rng.normal(0.0, config.noise_std, (n, t))
    if config.drift:
        dt = config.step / 3600.0
        power += np.cumsum(rng.normal(0.0, config.drift_volatility * math.sqrt(dt), (n, t)), axis=1)
    power = np.clip(power, 0.0, config.turbine.rated_power)
    measured_speed = np.clip(speed + rng.normal(0.0, config.anemometer_noise, (n, t)), 0.0, None)
    measured_direction = np.mod(bearing[None, :] + rng.normal(0.0, config.vane_noise, (n, t)), 360.0)

    codes = np.full((n, t), int(Label.PRESENT), dtype=np.int8)
    blank = np.zeros((n, t), dtype=bool)
    blanked_per_lull = int(round(config.lull_fraction * n))
    for lull in lulls:
        cells = _episode_cells(lull.start, lull.duration, config.step, t)
        chosen = rng.choice(n, size=blanked_per_lull, replace=False)
        blank[chosen, cells] = True
        codes[chosen, cells] = int(Label.SHUTDOWN)

    for failure in failures:
        row = layout.index_of(failure.turbine)
        cells = _episode_cells(failure.start, failure.duration, config.step, t)
        blank[row, cells] = True
        codes[row, cells] = int(Label.FAILURE)
    failed = codes == int(Label.FAILURE)
    outliers = failed & (rng.random((n, t)) < config.failure_outlier_rate)
    power = np.where(outliers, rng.uniform(0.0, 20.0, (n, t)), power)
    blank &= ~outliers

    sporadic = ~blank & ~failed & (rng.random((n, t)) < config.sporadic_na_rate)
    blank |= sporadic
    codes[sporadic] = int(Label.UNASSIGNED)

    ids = layout.turbine_ids
    power_panel = SignalPanel(ids, config.t0, config.step, power, ~blank, Observable.ACTIVE_POWER)
    full = np.ones((n, t), dtype=bool)
    speed_panel = SignalPanel(ids, config.t0, config.step, measured_speed, full, Observable.WIND_SPEED)
    direction_panel = SignalPanel(ids, config.t0, config.step, measured_direction, full, Observable.WIND_DIRECTION)
    labels = NaLabels(ids, config.t0, config.step, codes)
    logger.info(
        "Simulated %d turbines x %d steps (seed %d): %d failure episode(s), %d lull(s), %d sporadic gap(s)",
        n,
        t,
        config.seed,
        len(failures),
        len(lulls),
        int(sporadic.sum()),
    )
    return SimulationResult(config, power_panel, speed_panel, direction_panel, labels, ambient, bearing, speed)


def write_raw_export(result: SimulationResult, path: PathLike) -> None:
    """Write the three panels as one long raw export (stddev left ``NA``)."""
    frames = []
    times = format_timestamps(result.power.times)
    for panel in (result.power, result.wind_speed, result.wind_direction):
        n, t = panel.values.shape
        frame = pd.DataFrame(
            {
                "timestamp": np.tile(times, n),
                "turbine": np.repeat(panel.turbine_ids, t),
                "observable": panel.observable.value,
                "value": panel.values.ravel(),
                "stddev": NA_TOKEN,
            }
        )
        frames.append(frame[panel.mask.ravel()])
    raw = pd.concat(frames, ignore_index=True)
    raw.to_csv(path, index=False, na_rep=NA_TOKEN, lineterminator="\n", encoding="utf-8")


def write_simulation(result: SimulationResult, out_dir: PathLike) -> Dict[str, Path]:
    """Panel CSVs, ground-truth labels, layout and raw export under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "power": out / "power.csv",
        "wind_speed": out / "wind_speed.csv",
        "wind_direction": out / "wind_direction.csv",
        "labels": out / "labels_truth.csv",
        "layout": out / "layout.csv",
        "raw": out / "raw.csv",
    }
    write_panel(result.power, paths["power"])
    write_panel(result.wind_speed, paths["wind_speed"])
    write_panel(result.wind_direction, paths["wind_direction"])
    write_labels(result.labels, paths["labels"])
    write_layout(result.layout, paths["layout"])
    write_raw_export(result, paths["raw"])
    logger.info("Wrote simulation artifacts to %s", out)
    return paths


# ---------------------------------------------------------------------------
# Fixture generators
# ---------------------------------------------------------------------------

def collective_panel(
    n_turbines: int,
    n_steps: int,
    step: float = 600.0,
    driver_volatility: float = 1.0,
    noise_std: float = 1.0,
    seed: int = 0,
    t0=DEFAULT_START,
) -> SignalPanel:
    """Common random-walk driver plus white idiosyncratic noise per turbine."""
    rng = np.random.default_rng(seed)
    driver = np.cumsum(rng.normal(0.0, driver_volatility, n_steps))
    noise = rng.normal(0.0, noise_std, (n_turbines, n_steps))
    ids = tuple(str(i + 1) for i in range(n_turbines))
    return SignalPanel.from_values(ids, t0, step, driver[None, :] + noise)


def constant_correlation_panel(
    n_turbines: int,
    n_steps: int,
    rho: float,
    step: float = 600.0,
    seed: int = 0,
    t0=DEFAULT_START,
) -> SignalPanel:
    """Panel whose sample correlation matrix is exactly ``rho`` off the diagonal.

    Needs ``n_steps > n_turbines`` and ``-1/(N-1) < rho < 1``.
    """
    if n_steps <= n_turbines:
        raise ValueError("need more steps than turbines")
    if not -1.0 / (n_turbines - 1) < rho < 1.0:
        raise ValueError(f"rho {rho} outside the positive definite range")
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n_steps, n_turbines))
    z -= z.mean(axis=0)
    q, _ = np.linalg.qr(z)  # orthonormal, zero-mean columns
    target = np.full((n_turbines, n_turbines), rho)
    np.fill_diagonal(target, 1.0)
    chol = np.linalg.cholesky(target)
    values = math.sqrt(n_steps) * chol @ q.T
    ids = tuple(str(i + 1) for i in range(n_turbines))
    return SignalPanel.from_values(ids, t0, step, values)


def episodes_for_bins(bearings: Sequence[float], duration: float) -> Tuple[DirectionEpisode, ...]:
    return tuple(DirectionEpisode(float(b), parse_duration(duration)) for b in bearings)
